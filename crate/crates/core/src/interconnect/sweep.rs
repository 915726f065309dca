use rayon::prelude::*;

use super::{
    lft_assemble, posdep_k11, BlockSystem, InterconnectError, InterconnectionMatrix, InterfaceSpec,
    OperatingPoint,
};
use crate::lti::FrfSweep;

/// Assembles `Ḡ_c` at every operating point from one block FRF.
///
/// Only `K̄11` is rebuilt per point; the subsystem responses in `block_frf`
/// are reused as-is. The `K11` partition of `outer` is ignored. The grid of
/// `block_frf` must equal `omegas` exactly: a mismatch is a cache miss and is
/// reported rather than silently re-evaluated.
pub fn sweep_operating_points(
    block_frf: &FrfSweep,
    block: &BlockSystem,
    interfaces: &[InterfaceSpec],
    ops: &[OperatingPoint],
    outer: &InterconnectionMatrix,
    omegas: &[f64],
) -> Result<Vec<FrfSweep>, InterconnectError> {
    if block_frf.frequencies() != omegas {
        return Err(InterconnectError::CacheMiss);
    }
    ops.par_iter()
        .map(|op| {
            let k11 = posdep_k11(interfaces, op, block)?;
            lft_assemble(block_frf, &outer.with_k11(k11)?)
        })
        .collect()
}
