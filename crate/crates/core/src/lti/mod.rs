//! Subsystem models: second-order `(M, D, K)` systems, their descriptor
//! realizations, modal damping and pointwise frequency responses.

mod damping;
mod descriptor;
mod frf;
mod grid;
mod system;

pub use damping::{build_modal_damping, modal_damping_ratios, RIGID_MODE_TOL};
pub use descriptor::{to_descriptor, DescriptorStateSpace, MechanicalParts};
pub use frf::{frf_eval, FrfEvaluator, FrfSweep};
pub(crate) use frf::CLASSICAL_DAMPING_TOL;
pub use grid::{lin_space, log_space, FrequencySpacing};
pub use system::{InputPort, OutputKind, OutputPort, SecondOrderSystem, Tolerances};

use thiserror::Error;

use crate::linalg::LinalgError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LtiError {
    #[error("{matrix} is {rows}x{cols}, expected {expected}x{expected}")]
    Shape {
        matrix: &'static str,
        rows: usize,
        cols: usize,
        expected: usize,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{matrix} is not symmetric (relative defect {defect:.3e})")]
    NotSymmetric { matrix: &'static str, defect: f64 },
    #[error("mass matrix is not positive semidefinite")]
    MassNotPsd,
    #[error("port '{label}' references dof {dof}, system has {n_dof}")]
    PortOutOfRange { label: String, dof: usize, n_dof: usize },
    #[error("duplicate port label '{0}'")]
    DuplicateLabel(String),
    #[error("velocity output '{label}' on massless dof {dof}")]
    MasslessVelocityOutput { label: String, dof: usize },
    #[error("frequency grid must be non-empty, finite and strictly increasing")]
    BadGrid,
    #[error("sE − A is singular at ω = {omega} rad/s (undamped resonance on the grid?)")]
    SingularAtFrequency { omega: f64 },
    #[error("non-finite response at ω = {omega} rad/s")]
    NonFinite { omega: f64 },
    #[error("damping ratio {0} outside [0, 1)")]
    DampingRatio(f64),
    #[error("eigen-solve failed: {0}")]
    Eigen(#[from] LinalgError),
    #[error("pencil (E, A) is singular at a generic test point")]
    PencilNotRegular,
}

impl LtiError {
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            LtiError::SingularAtFrequency { .. }
                | LtiError::NonFinite { .. }
                | LtiError::Eigen(_)
                | LtiError::PencilNotRegular
        )
    }
}
