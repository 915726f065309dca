//! Per-subsystem model-order reduction, reduced assembly and the
//! relative-error driven search for minimal subsystem orders.

mod assemble;
mod bt;
mod cms;
mod error;
mod reducer;
mod search;

pub use assemble::assemble_reduced;
pub use bt::{reduce_bt, BalancedRealization};
pub use cms::{reduce_cb, reduce_hh, CraigBampton, HintzHerting};
pub use error::{
    refine_around_resonances, relative_error, verification_grid, EntryError, ErrorReport, DEFAULT_FLOOR,
    DEFAULT_THRESHOLD,
};
pub use reducer::{Reducer, ReductionMethod};
pub use search::{
    minimal_order_search, OrderWitness, RepairStep, SearchOptions, SearchResult, SubsystemOrder,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interconnect::InterconnectError;
use crate::linalg::LinalgError;
use crate::lti::LtiError;

#[derive(Debug, Error)]
pub enum MorError {
    #[error("system is not asymptotically stable after removing rigid-body modes")]
    Unstable,
    #[error("damping couples rigid-body and elastic modes; rigid modes cannot be deflated")]
    RigidDampingCoupling,
    #[error("balanced truncation needs an invertible E")]
    SingularDescriptor,
    #[error("order {requested} outside admissible range {min}..={max}")]
    OrderOutOfRange { requested: usize, min: usize, max: usize },
    #[error("boundary set is empty")]
    EmptyBoundary,
    #[error("boundary DOF {dof} outside 0..{n_dof}")]
    BoundaryOutOfRange { dof: usize, n_dof: usize },
    #[error("port '{label}' on DOF {dof} is not a boundary DOF; reduction would drop it")]
    PortNotOnBoundary { label: String, dof: usize },
    #[error(
        "interior stiffness K_ii is singular: the interior can move as a rigid body; \
         add DOFs that restrain it to the boundary set"
    )]
    SingularInterior,
    #[error("{requested} modes requested, only {available} available")]
    TooManyModes { requested: usize, available: usize },
    #[error("{method} needs a second-order subsystem")]
    NeedsSecondOrder { method: ReductionMethod },
    #[error("frequency grids of full and reduced sweeps differ")]
    GridMismatch,
    #[error("entry ({output}, {input}) outside a {p}x{m} response")]
    EntryOutOfRange { output: usize, input: usize, p: usize, m: usize },
    #[error("{0}")]
    Config(String),
    #[error(
        "relative error {error:.3e} exceeds {threshold} with {subsystem} at full order; \
         the requirement is not attainable with this model"
    )]
    ThresholdUnreachable { subsystem: String, error: f64, threshold: f64 },
    #[error("subsystem '{subsystem}': {source}")]
    Subsystem {
        subsystem: String,
        #[source]
        source: Box<MorError>,
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error(transparent)]
    Interconnect(#[from] InterconnectError),
}

impl MorError {
    pub fn is_numerical(&self) -> bool {
        match self {
            MorError::Unstable
            | MorError::SingularInterior
            | MorError::Linalg(_)
            | MorError::ThresholdUnreachable { .. } => true,
            MorError::Lti(e) => e.is_numerical(),
            MorError::Interconnect(e) => e.is_numerical(),
            MorError::Subsystem { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn in_subsystem(self, name: &str) -> Self {
        MorError::Subsystem {
            subsystem: name.to_string(),
            source: Box::new(self),
        }
    }
}

/// Method-specific data kept with a reduction basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisMetadata {
    Balanced {
        /// Hankel singular values of the elastic part, non-increasing.
        hankel_singular_values: Vec<f64>,
        /// Rigid-body modes carried along untruncated.
        n_rigid: usize,
    },
    ComponentModes {
        n_modes: usize,
        /// Angular frequencies (rad/s) of the kept modes, ascending.
        kept_mode_omegas: Vec<f64>,
        /// Frequency of the highest kept mode, the `f_c` of the basis (Hz).
        cutoff_hz: Option<f64>,
        /// Mode shapes lost to linear dependence (Hintz–Herting only).
        rank_deficiency: usize,
    },
}

/// Projection `x ≈ V x_r`, `x_r = Wᵀ x` (`W = V` for the one-sided
/// component-mode methods).
#[derive(Clone, Debug, PartialEq)]
pub struct ReductionBasis {
    pub method: ReductionMethod,
    pub v: DMatrix<f64>,
    pub w: DMatrix<f64>,
    /// DOFs kept physically (component-mode methods), empty for BT.
    pub boundary: Vec<usize>,
    /// Reduced dimension: states for BT, DOFs for component-mode methods.
    pub order: usize,
    pub metadata: BasisMetadata,
}

impl ReductionBasis {
    /// Reduced order counted in first-order states.
    pub fn state_order(&self) -> usize {
        match self.method {
            ReductionMethod::Bt => self.order,
            ReductionMethod::Cb | ReductionMethod::Hh => 2 * self.order,
        }
    }
}
