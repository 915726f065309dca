use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{LtiError, SecondOrderSystem};
use crate::linalg::to_complex;

/// The second-order data a mechanical realization was built from. Kept so
/// frequency sweeps and rigid-mode deflation can work in modal coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct MechanicalParts {
    pub mass: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    /// `n_dof × m`
    pub force_map: DMatrix<f64>,
    /// `p × n_dof`
    pub displacement_map: DMatrix<f64>,
    /// `p × n_dof`
    pub velocity_map: DMatrix<f64>,
}

/// `E ẋ = A x + B u`, `y = C x + D u`.
#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorStateSpace {
    e: DMatrix<f64>,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    input_labels: Vec<String>,
    output_labels: Vec<String>,
    mechanical: Option<Arc<MechanicalParts>>,
}

impl DescriptorStateSpace {
    pub fn new(
        e: DMatrix<f64>,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        input_labels: Vec<String>,
        output_labels: Vec<String>,
    ) -> Result<Self, LtiError> {
        let n = a.nrows();
        let (m, p) = (b.ncols(), c.nrows());
        let dims_ok = a.ncols() == n
            && e.shape() == (n, n)
            && b.nrows() == n
            && c.ncols() == n
            && d.shape() == (p, m)
            && input_labels.len() == m
            && output_labels.len() == p;
        if !dims_ok {
            return Err(LtiError::Dimension(format!(
                "E {:?}, A {:?}, B {:?}, C {:?}, D {:?}, {} input / {} output labels",
                e.shape(),
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape(),
                input_labels.len(),
                output_labels.len()
            )));
        }
        Ok(Self {
            e,
            a,
            b,
            c,
            d,
            input_labels,
            output_labels,
            mechanical: None,
        })
    }

    /// Standard state space (`E = I`).
    pub fn standard(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        input_labels: Vec<String>,
        output_labels: Vec<String>,
    ) -> Result<Self, LtiError> {
        let n = a.nrows();
        Self::new(DMatrix::identity(n, n), a, b, c, d, input_labels, output_labels)
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn e(&self) -> &DMatrix<f64> {
        &self.e
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn input_labels(&self) -> &[String] {
        &self.input_labels
    }

    pub fn output_labels(&self) -> &[String] {
        &self.output_labels
    }

    pub fn mechanical(&self) -> Option<&MechanicalParts> {
        self.mechanical.as_deref()
    }

    /// Replaces the feedthrough term.
    pub fn with_feedthrough(mut self, d: DMatrix<f64>) -> Result<Self, LtiError> {
        if d.shape() != self.d.shape() {
            return Err(LtiError::Dimension(format!(
                "feedthrough {:?}, expected {:?}",
                d.shape(),
                self.d.shape()
            )));
        }
        self.d = d;
        Ok(self)
    }

    /// Checks `det(sE − A) ≠ 0` at a fixed generic complex point.
    pub fn check_regular(&self) -> Result<(), LtiError> {
        let n = self.n_states();
        if n == 0 {
            return Ok(());
        }
        let s = Complex64::new(0.618_033_988_749_894_9, 1.324_717_957_244_746);
        let pencil = to_complex(&self.e) * s - to_complex(&self.a);
        let scale = pencil.iter().fold(0.0f64, |acc, v| acc.max(v.norm()));
        let lu = pencil.lu();
        let u = lu.u();
        let min_pivot = (0..n).map(|i| u[(i, i)].norm()).fold(f64::INFINITY, f64::min);
        if !(min_pivot > 1e-13 * scale) {
            return Err(LtiError::PencilNotRegular);
        }
        Ok(())
    }
}

/// Realizes `M q̈ + D q̇ + K q = B_f u` with state `x = [q; q̇]`:
/// `E = [I 0; 0 M]`, `A = [0 I; −K −D]`, `B = [0; B_f]`, `C = [C_q C_v]`, `D_ss = 0`.
pub fn to_descriptor(sys: &SecondOrderSystem) -> Result<DescriptorStateSpace, LtiError> {
    let n = sys.n_dof();
    let mass = sys.mass().to_dense();
    let damping = sys.damping().to_dense();
    let stiffness = sys.stiffness().to_dense();

    for port in sys.outputs() {
        if port.kind == super::OutputKind::Velocity && mass.row(port.dof).iter().all(|v| *v == 0.0) {
            return Err(LtiError::MasslessVelocityOutput {
                label: port.label.clone(),
                dof: port.dof,
            });
        }
    }

    let force_map = sys.force_map();
    let (cq, cv) = sys.output_maps();
    let (m, p) = (force_map.ncols(), cq.nrows());

    let mut e = DMatrix::zeros(2 * n, 2 * n);
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    e.view_mut((0, 0), (n, n)).fill_with_identity();
    e.view_mut((n, n), (n, n)).copy_from(&mass);
    a.view_mut((0, n), (n, n)).fill_with_identity();
    a.view_mut((n, 0), (n, n)).copy_from(&(-&stiffness));
    a.view_mut((n, n), (n, n)).copy_from(&(-&damping));

    let mut b = DMatrix::zeros(2 * n, m);
    b.view_mut((n, 0), (n, m)).copy_from(&force_map);
    let mut c = DMatrix::zeros(p, 2 * n);
    c.view_mut((0, 0), (p, n)).copy_from(&cq);
    c.view_mut((0, n), (p, n)).copy_from(&cv);

    let mut ss = DescriptorStateSpace::new(
        e,
        a,
        b,
        c,
        DMatrix::zeros(p, m),
        sys.input_labels(),
        sys.output_labels(),
    )?;
    ss.mechanical = Some(Arc::new(MechanicalParts {
        mass,
        damping,
        stiffness,
        force_map,
        displacement_map: cq,
        velocity_map: cv,
    }));
    Ok(ss)
}
