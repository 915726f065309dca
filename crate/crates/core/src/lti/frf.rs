use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::{DescriptorStateSpace, LtiError, MechanicalParts, RIGID_MODE_TOL};
use crate::linalg::{generalized_symmetric_eigen, to_complex, HessenbergForm};

/// Complex `p × m` responses on a strictly increasing angular-frequency grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FrfSweep {
    frequencies: Vec<f64>,
    data: Vec<DMatrix<Complex64>>,
    input_labels: Vec<String>,
    output_labels: Vec<String>,
}

impl FrfSweep {
    pub fn new(
        frequencies: Vec<f64>,
        data: Vec<DMatrix<Complex64>>,
        input_labels: Vec<String>,
        output_labels: Vec<String>,
    ) -> Result<Self, LtiError> {
        check_grid(&frequencies)?;
        if data.len() != frequencies.len() {
            return Err(LtiError::Dimension(format!(
                "{} responses for {} frequencies",
                data.len(),
                frequencies.len()
            )));
        }
        let (p, m) = (output_labels.len(), input_labels.len());
        for (k, g) in data.iter().enumerate() {
            if g.shape() != (p, m) {
                return Err(LtiError::Dimension(format!(
                    "response at ω = {} is {:?}, expected {:?}",
                    frequencies[k],
                    g.shape(),
                    (p, m)
                )));
            }
            if !g.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
                return Err(LtiError::NonFinite { omega: frequencies[k] });
            }
        }
        Ok(Self {
            frequencies,
            data,
            input_labels,
            output_labels,
        })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn data(&self) -> &[DMatrix<Complex64>] {
        &self.data
    }

    pub fn at(&self, k: usize) -> &DMatrix<Complex64> {
        &self.data[k]
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn n_inputs(&self) -> usize {
        self.input_labels.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.output_labels.len()
    }

    pub fn input_labels(&self) -> &[String] {
        &self.input_labels
    }

    pub fn output_labels(&self) -> &[String] {
        &self.output_labels
    }

    /// Response of one (output, input) entry over the grid.
    pub fn entry(&self, output: usize, input: usize) -> Vec<Complex64> {
        self.data.iter().map(|g| g[(output, input)]).collect()
    }
}

pub(crate) fn check_grid(frequencies: &[f64]) -> Result<(), LtiError> {
    let ok = !frequencies.is_empty()
        && frequencies.iter().all(|w| w.is_finite() && *w >= 0.0)
        && frequencies.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(LtiError::BadGrid)
    }
}

/// Precomputed factorization for repeated frequency sweeps of one realization.
///
/// Mechanical realizations whose damping is diagonalized by the undamped
/// modes are evaluated by modal superposition; other realizations with an
/// invertible `E` go through a Hessenberg form of `E⁻¹A`; singular `E`
/// falls back to a dense LU of `iωE − A` per frequency.
#[derive(Clone, Debug)]
pub struct FrfEvaluator {
    engine: Engine,
    feedthrough: DMatrix<Complex64>,
    input_labels: Vec<String>,
    output_labels: Vec<String>,
}

#[derive(Clone, Debug)]
enum Engine {
    Modal {
        eigenvalues: Vec<f64>,
        modal_damping: Vec<f64>,
        /// Φᵀ B_f
        modal_inputs: DMatrix<f64>,
        /// C_q Φ
        disp_rows: DMatrix<f64>,
        /// C_v Φ, `None` without velocity outputs
        vel_rows: Option<DMatrix<f64>>,
    },
    Hessenberg {
        form: HessenbergForm,
        /// Qᵀ E⁻¹ B
        rhs: DMatrix<Complex64>,
        /// C Q
        out: DMatrix<Complex64>,
    },
    Pencil {
        e: DMatrix<Complex64>,
        a: DMatrix<Complex64>,
        b: DMatrix<Complex64>,
        c: DMatrix<Complex64>,
    },
}

/// Off-diagonal modal damping (relative to the largest entry) below which
/// the damping is treated as classical.
pub(crate) const CLASSICAL_DAMPING_TOL: f64 = 1e-12;

impl FrfEvaluator {
    pub fn new(ss: &DescriptorStateSpace) -> Result<Self, LtiError> {
        let engine = match ss.mechanical().map(modal_engine).transpose()?.flatten() {
            Some(engine) => engine,
            None => general_engine(ss),
        };
        Ok(Self {
            engine,
            feedthrough: to_complex(ss.d()),
            input_labels: ss.input_labels().to_vec(),
            output_labels: ss.output_labels().to_vec(),
        })
    }

    pub fn uses_modal_superposition(&self) -> bool {
        matches!(self.engine, Engine::Modal { .. })
    }

    /// `C(iωE − A)⁻¹B + D` at a single frequency.
    pub fn response(&self, omega: f64) -> Result<DMatrix<Complex64>, LtiError> {
        let s = Complex64::new(0.0, omega);
        let g = match &self.engine {
            Engine::Modal {
                eigenvalues,
                modal_damping,
                modal_inputs,
                disp_rows,
                vel_rows,
            } => {
                // (C_q + iω C_v) Φ diag(1/den) Φᵀ B_f with real products
                let mut re = modal_inputs.clone();
                let mut im = modal_inputs.clone();
                for (r, (&lam, &d)) in eigenvalues.iter().zip(modal_damping).enumerate() {
                    let den = Complex64::new(lam - omega * omega, omega * d);
                    if den.norm() <= 1e2 * f64::EPSILON * (lam.abs() + omega * omega) {
                        return Err(LtiError::SingularAtFrequency { omega });
                    }
                    let inv = den.inv();
                    re.row_mut(r).scale_mut(inv.re);
                    im.row_mut(r).scale_mut(inv.im);
                }
                let (mut g_re, mut g_im) = (disp_rows * &re, disp_rows * &im);
                if let Some(cv) = vel_rows {
                    g_re -= cv * &im * omega;
                    g_im += cv * &re * omega;
                }
                DMatrix::from_fn(g_re.nrows(), g_re.ncols(), |i, j| Complex64::new(g_re[(i, j)], g_im[(i, j)]))
            }
            Engine::Hessenberg { form, rhs, out } => {
                let x = form
                    .solve_shifted(s, rhs)
                    .ok_or(LtiError::SingularAtFrequency { omega })?;
                out * x
            }
            Engine::Pencil { e, a, b, c } => {
                let pencil = e * s - a;
                let x = pencil
                    .lu()
                    .solve(b)
                    .ok_or(LtiError::SingularAtFrequency { omega })?;
                c * x
            }
        };
        let g = g + &self.feedthrough;
        if !g.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(LtiError::NonFinite { omega });
        }
        Ok(g)
    }

    /// Evaluates the grid in parallel; results keep grid order.
    pub fn evaluate(&self, omegas: &[f64]) -> Result<FrfSweep, LtiError> {
        check_grid(omegas)?;
        let data = omegas
            .par_iter()
            .map(|&w| self.response(w))
            .collect::<Result<Vec<_>, _>>()?;
        FrfSweep::new(
            omegas.to_vec(),
            data,
            self.input_labels.clone(),
            self.output_labels.clone(),
        )
    }
}

fn modal_engine(parts: &MechanicalParts) -> Result<Option<Engine>, LtiError> {
    let basis = match generalized_symmetric_eigen(&parts.mass, &parts.stiffness) {
        Ok(b) => b,
        // singular mass: no modal route, the general engine handles it
        Err(crate::linalg::LinalgError::NotPositiveDefinite) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let phi = &basis.shapes;
    let dt = phi.transpose() * &parts.damping * phi;
    let n = dt.nrows();
    let max_entry = dt.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let max_off = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .fold(0.0f64, |a, (i, j)| a.max(dt[(i, j)].abs()));
    if max_off > CLASSICAL_DAMPING_TOL * max_entry {
        return Ok(None);
    }
    let scale = basis.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let eigenvalues = basis
        .eigenvalues
        .iter()
        .map(|&l| if l.abs() <= RIGID_MODE_TOL * scale { 0.0 } else { l })
        .collect();
    Ok(Some(Engine::Modal {
        eigenvalues,
        modal_damping: (0..n).map(|i| dt[(i, i)]).collect(),
        modal_inputs: phi.transpose() * &parts.force_map,
        disp_rows: &parts.displacement_map * phi,
        vel_rows: parts
            .velocity_map
            .iter()
            .any(|&v| v != 0.0)
            .then(|| &parts.velocity_map * phi),
    }))
}

fn general_engine(ss: &DescriptorStateSpace) -> Engine {
    let n = ss.n_states();
    let lu = ss.e().clone().lu();
    let invertible = n == 0 || {
        let u = lu.u();
        let scale = ss.e().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        (0..n).all(|i| u[(i, i)].abs() > 1e-13 * scale)
    };
    if invertible {
        let (ea, eb) = if n == 0 {
            (ss.a().clone(), ss.b().clone())
        } else {
            (lu.solve(ss.a()).unwrap(), lu.solve(ss.b()).unwrap())
        };
        let form = HessenbergForm::new(&ea);
        let rhs = to_complex(&(form.q.transpose() * eb));
        let out = to_complex(&(ss.c() * &form.q));
        Engine::Hessenberg { form, rhs, out }
    } else {
        Engine::Pencil {
            e: to_complex(ss.e()),
            a: to_complex(ss.a()),
            b: to_complex(ss.b()),
            c: to_complex(ss.c()),
        }
    }
}

/// `data[k] = C(iω_k E − A)⁻¹B + D` over the grid.
pub fn frf_eval(ss: &DescriptorStateSpace, omegas: &[f64]) -> Result<FrfSweep, LtiError> {
    FrfEvaluator::new(ss)?.evaluate(omegas)
}
