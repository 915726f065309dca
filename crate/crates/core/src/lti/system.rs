use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::LtiError;
use crate::sparse::SparseMatrix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    #[default]
    Displacement,
    Velocity,
}

/// Input column: force `scale · u` applied on `dof`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputPort {
    pub label: String,
    pub dof: usize,
    #[serde(default = "unit")]
    pub scale: f64,
}

/// Output row: `y = scale · q[dof]` (or `q̇[dof]`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputPort {
    pub label: String,
    pub dof: usize,
    #[serde(default = "unit")]
    pub scale: f64,
    #[serde(default)]
    pub kind: OutputKind,
}

fn unit() -> f64 {
    1.0
}

impl InputPort {
    pub fn new(label: impl Into<String>, dof: usize) -> Self {
        Self {
            label: label.into(),
            dof,
            scale: 1.0,
        }
    }
}

impl OutputPort {
    pub fn displacement(label: impl Into<String>, dof: usize) -> Self {
        Self {
            label: label.into(),
            dof,
            scale: 1.0,
            kind: OutputKind::Displacement,
        }
    }

    pub fn velocity(label: impl Into<String>, dof: usize) -> Self {
        Self {
            kind: OutputKind::Velocity,
            ..Self::displacement(label, dof)
        }
    }
}

/// Validation thresholds for [`SecondOrderSystem`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Allowed `max|A − Aᵀ| / max|A|`.
    pub symmetry_rel: f64,
    /// Smallest admissible mass eigenvalue as a fraction of `‖M‖`, negated.
    pub psd_floor_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            symmetry_rel: 1e-10,
            psd_floor_rel: 1e-8,
        }
    }
}

/// `M q̈ + D q̇ + K q = F` with force inputs and displacement/velocity outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondOrderSystem {
    mass: SparseMatrix,
    damping: SparseMatrix,
    stiffness: SparseMatrix,
    inputs: Vec<InputPort>,
    outputs: Vec<OutputPort>,
}

impl SecondOrderSystem {
    pub fn new(
        mass: SparseMatrix,
        damping: SparseMatrix,
        stiffness: SparseMatrix,
        inputs: Vec<InputPort>,
        outputs: Vec<OutputPort>,
    ) -> Result<Self, LtiError> {
        Self::with_tolerances(mass, damping, stiffness, inputs, outputs, Tolerances::default())
    }

    pub fn with_tolerances(
        mass: SparseMatrix,
        damping: SparseMatrix,
        stiffness: SparseMatrix,
        inputs: Vec<InputPort>,
        outputs: Vec<OutputPort>,
        tol: Tolerances,
    ) -> Result<Self, LtiError> {
        let n = mass.nrows();
        for (name, m) in [("M", &mass), ("D", &damping), ("K", &stiffness)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(LtiError::Shape {
                    matrix: name,
                    rows: m.nrows(),
                    cols: m.ncols(),
                    expected: n,
                });
            }
            let defect = m.symmetry_defect();
            if defect > tol.symmetry_rel {
                return Err(LtiError::NotSymmetric { matrix: name, defect });
            }
        }
        if n == 0 {
            return Err(LtiError::Dimension("system has no degrees of freedom".into()));
        }
        check_psd(&mass, tol.psd_floor_rel)?;

        let mut seen = HashSet::new();
        for p in &inputs {
            if p.dof >= n {
                return Err(LtiError::PortOutOfRange {
                    label: p.label.clone(),
                    dof: p.dof,
                    n_dof: n,
                });
            }
            if !seen.insert(p.label.as_str()) {
                return Err(LtiError::DuplicateLabel(p.label.clone()));
            }
        }
        seen.clear();
        for p in &outputs {
            if p.dof >= n {
                return Err(LtiError::PortOutOfRange {
                    label: p.label.clone(),
                    dof: p.dof,
                    n_dof: n,
                });
            }
            if !seen.insert(p.label.as_str()) {
                return Err(LtiError::DuplicateLabel(p.label.clone()));
            }
        }
        Ok(Self {
            mass,
            damping,
            stiffness,
            inputs,
            outputs,
        })
    }

    pub fn n_dof(&self) -> usize {
        self.mass.nrows()
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn damping(&self) -> &SparseMatrix {
        &self.damping
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    pub fn inputs(&self) -> &[InputPort] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[OutputPort] {
        &self.outputs
    }

    pub fn input_labels(&self) -> Vec<String> {
        self.inputs.iter().map(|p| p.label.clone()).collect()
    }

    pub fn output_labels(&self) -> Vec<String> {
        self.outputs.iter().map(|p| p.label.clone()).collect()
    }

    /// Sorted, de-duplicated DOFs touched by any port.
    pub fn port_dofs(&self) -> Vec<usize> {
        let mut dofs: Vec<usize> = self
            .inputs
            .iter()
            .map(|p| p.dof)
            .chain(self.outputs.iter().map(|p| p.dof))
            .collect();
        dofs.sort_unstable();
        dofs.dedup();
        dofs
    }

    /// Replaces the damping matrix, re-validating shape and symmetry.
    pub fn with_damping(&self, damping: SparseMatrix) -> Result<Self, LtiError> {
        Self::new(
            self.mass.clone(),
            damping,
            self.stiffness.clone(),
            self.inputs.clone(),
            self.outputs.clone(),
        )
    }

    /// Same matrices with a different port set.
    pub fn with_ports(&self, inputs: Vec<InputPort>, outputs: Vec<OutputPort>) -> Result<Self, LtiError> {
        Self::new(
            self.mass.clone(),
            self.damping.clone(),
            self.stiffness.clone(),
            inputs,
            outputs,
        )
    }

    /// `n_dof × m` force distribution matrix.
    pub fn force_map(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.n_dof(), self.inputs.len());
        for (j, p) in self.inputs.iter().enumerate() {
            b[(p.dof, j)] += p.scale;
        }
        b
    }

    /// `(p × n_dof, p × n_dof)` displacement and velocity output maps.
    pub fn output_maps(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.n_dof();
        let mut cq = DMatrix::zeros(self.outputs.len(), n);
        let mut cv = DMatrix::zeros(self.outputs.len(), n);
        for (i, p) in self.outputs.iter().enumerate() {
            match p.kind {
                OutputKind::Displacement => cq[(i, p.dof)] += p.scale,
                OutputKind::Velocity => cv[(i, p.dof)] += p.scale,
            }
        }
        (cq, cv)
    }
}

fn check_psd(mass: &SparseMatrix, floor_rel: f64) -> Result<(), LtiError> {
    let dense = mass.to_dense();
    let norm = mass.max_abs() * mass.nrows() as f64;
    if norm == 0.0 {
        // all-zero mass is PSD; massless models are caught where it matters
        return Ok(());
    }
    let shifted = &dense + DMatrix::identity(dense.nrows(), dense.ncols()) * (floor_rel * norm);
    if crate::linalg::symmetrize(&shifted).cholesky().is_none() {
        return Err(LtiError::MassNotPsd);
    }
    Ok(())
}
