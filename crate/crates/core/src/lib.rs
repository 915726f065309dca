//! Modular models of interconnected flexible subsystems.
//!
//! Subsystems are kept as second-order `(M, D, K)` models or descriptor
//! realizations ([`lti`]), collected into a block system and closed through an
//! interconnection matrix with an upper LFT ([`interconnect`]). Interfaces
//! that translate are coupled through fixed grids of virtual interconnection
//! points, so subsystem FRFs are computed once and only the coupling matrix
//! changes with the operating point. [`mor`] reduces subsystems one at a time
//! and verifies the assembled reduced model against a relative-error bound.

pub mod error;
pub mod interconnect;
pub mod io;
pub mod linalg;
pub mod lti;
pub mod models;
pub mod mor;
pub mod sparse;

pub use error::{Error, Result};
pub use sparse::SparseMatrix;
