//! Deterministic test systems: lumped chains, Euler–Bernoulli beams and a
//! spring-coupled multi-stage bench.

mod beam;
mod bench;
mod chain;
mod grid;

pub use beam::{BeamSpec, BeamSupport, BeamStage};
pub use bench::{make_two_stage_bench, StageModelConfig, TwoStageBench};
pub use chain::{make_chain, ChainBoundary, ChainParams};
pub use grid::make_operating_grid;

use thiserror::Error;

use crate::interconnect::InterconnectError;
use crate::lti::LtiError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("anchor {anchor} of '{stage}' lies outside its grid span [{min}, {max}]")]
    AnchorOutsideGrid {
        stage: String,
        anchor: f64,
        min: f64,
        max: f64,
    },
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error(transparent)]
    Interconnect(#[from] InterconnectError),
}
