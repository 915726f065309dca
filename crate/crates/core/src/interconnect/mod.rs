//! Block collection of subsystems, static and position-dependent
//! interconnection matrices, and closed-loop assembly through the upper LFT
//! `G_c = K21 G_b (I − K11 G_b)⁻¹ K12 + K22`.

mod block;
mod interface;
mod kmatrix;
mod lft;
mod model;
mod posdep;
mod sweep;

pub use block::{block_collect, block_collect_named, block_diag_sweeps, BlockSystem, PortBlock};
pub use interface::{Anchoring, InterfaceSide, InterfaceSpec, OperatingPoint, SpringSpec, VirtualPoint};
pub use kmatrix::InterconnectionMatrix;
pub use lft::{lft_assemble, RCOND_ERROR, RCOND_WARN};
pub use model::{CoupledModel, ExternalPort, Subsystem};
pub use posdep::{
    interp_weights, posdep_k11, spring_coupling, spring_k11, static_k11, Bracket, SpringCoupling,
    COINCIDENCE_TOL, SNAP_TOL,
};
pub use sweep::sweep_operating_points;

use thiserror::Error;

use crate::lti::LtiError;

/// One failing spring inside a [`InterconnectError::Springs`] aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct SpringFailure {
    pub interface: String,
    pub spring: usize,
    pub error: Box<InterconnectError>,
}

impl std::fmt::Display for SpringFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "interface '{}' spring {}: {}", self.interface, self.spring, self.error)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterconnectError {
    #[error("block system needs at least one subsystem")]
    EmptyBlock,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unknown subsystem {0}")]
    UnknownSubsystem(usize),
    #[error("subsystem {subsystem} has no {kind} port {port}")]
    UnknownPort {
        subsystem: usize,
        kind: &'static str,
        port: usize,
    },
    #[error("interface '{0}': grid coordinates must be finite and strictly increasing")]
    GridNotIncreasing(String),
    #[error("interface '{0}': each side needs at least two virtual points")]
    GridTooSmall(String),
    #[error("interface '{interface}': direction '{j}' on side j does not match '{ell}' on side ℓ")]
    DirectionMismatch { interface: String, j: String, ell: String },
    #[error("interface '{interface}' spring {spring}: stiffness {stiffness} must be positive")]
    NonPositiveStiffness {
        interface: String,
        spring: usize,
        stiffness: f64,
    },
    #[error("grid needs at least two points, got {0}")]
    GridTooShort(usize),
    #[error("position {position} outside grid span [{min}, {max}]")]
    OutOfSpan { position: f64, min: f64, max: f64 },
    #[error("no port on side {side} within snap tolerance of position {position}")]
    NotCoincident { side: &'static str, position: f64 },
    #[error("{} spring(s) failed: {}", .0.len(), .0.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("; "))]
    Springs(Vec<SpringFailure>),
    #[error("operating point has {got} entries, model has {expected} interfaces")]
    OperatingPoint { expected: usize, got: usize },
    #[error("I − K11·G_b is singular at ω = {omega} rad/s (reciprocal condition {rcond:.3e})")]
    SingularFeedback { omega: f64, rcond: f64 },
    #[error("cached subsystem FRFs do not cover the requested frequency grid")]
    CacheMiss,
    #[error("frequency grids of the block sweeps differ")]
    FrequencyMismatch,
    #[error(transparent)]
    Lti(#[from] LtiError),
}

impl InterconnectError {
    pub fn is_numerical(&self) -> bool {
        match self {
            InterconnectError::SingularFeedback { .. } => true,
            InterconnectError::Lti(e) => e.is_numerical(),
            InterconnectError::Springs(fs) => fs.iter().any(|f| f.error.is_numerical()),
            _ => false,
        }
    }
}
