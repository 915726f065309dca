use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BalancedRealization, CraigBampton, HintzHerting, MorError, ReductionBasis};
use crate::interconnect::Subsystem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReductionMethod {
    /// Balanced truncation.
    Bt,
    /// Craig–Bampton component mode synthesis.
    Cb,
    /// Hintz–Herting component mode synthesis.
    Hh,
}

impl ReductionMethod {
    pub fn name(self) -> &'static str {
        match self {
            ReductionMethod::Bt => "BT",
            ReductionMethod::Cb => "CB",
            ReductionMethod::Hh => "HH",
        }
    }
}

impl fmt::Display for ReductionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReductionMethod {
    type Err = MorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bt" => Ok(ReductionMethod::Bt),
            "cb" => Ok(ReductionMethod::Cb),
            "hh" => Ok(ReductionMethod::Hh),
            _ => Err(MorError::Config(format!("unknown reduction method '{s}' (expected bt, cb or hh)"))),
        }
    }
}

/// Precomputed reduction data for one subsystem.
///
/// A *level* is the method's natural step: states for BT, kept modes for the
/// component-mode methods. Every level between [`Reducer::min_level`] and
/// [`Reducer::max_level`] is admissible; the top level reproduces the full
/// model.
#[derive(Clone, Debug)]
pub enum Reducer {
    Bt(BalancedRealization),
    Cb(CraigBampton),
    Hh(HintzHerting),
}

impl Reducer {
    /// Prepares `subsystem` for reduction. Component-mode methods keep every
    /// port DOF as boundary DOF.
    pub fn new(method: ReductionMethod, subsystem: &Subsystem) -> Result<Self, MorError> {
        match method {
            ReductionMethod::Bt => Ok(Reducer::Bt(BalancedRealization::new(&subsystem.descriptor()?)?)),
            ReductionMethod::Cb | ReductionMethod::Hh => {
                let sys = subsystem
                    .as_second_order()
                    .ok_or(MorError::NeedsSecondOrder { method })?;
                let boundary = sys.port_dofs();
                Ok(if method == ReductionMethod::Cb {
                    Reducer::Cb(CraigBampton::new(sys, &boundary)?)
                } else {
                    Reducer::Hh(HintzHerting::new(sys, &boundary)?)
                })
            }
        }
    }

    pub fn method(&self) -> ReductionMethod {
        match self {
            Reducer::Bt(_) => ReductionMethod::Bt,
            Reducer::Cb(_) => ReductionMethod::Cb,
            Reducer::Hh(_) => ReductionMethod::Hh,
        }
    }

    pub fn min_level(&self) -> usize {
        match self {
            Reducer::Bt(b) => b.min_order(),
            Reducer::Cb(_) | Reducer::Hh(_) => 0,
        }
    }

    pub fn max_level(&self) -> usize {
        match self {
            Reducer::Bt(b) => b.n_states(),
            Reducer::Cb(c) => c.max_modes(),
            Reducer::Hh(h) => h.max_modes(),
        }
    }

    /// First-order state count of the unreduced subsystem.
    pub fn full_states(&self) -> usize {
        match self {
            Reducer::Bt(b) => b.n_states(),
            Reducer::Cb(c) => 2 * (c.boundary().len() + c.max_modes()),
            Reducer::Hh(h) => 2 * h.max_modes(),
        }
    }

    pub fn reduce(&self, level: usize) -> Result<(Subsystem, ReductionBasis), MorError> {
        match self {
            Reducer::Bt(b) => b.truncate(level).map(|(ss, basis)| (ss.into(), basis)),
            Reducer::Cb(c) => c.reduce(level).map(|(s, basis)| (s.into(), basis)),
            Reducer::Hh(h) => h.reduce(level).map(|(s, basis)| (s.into(), basis)),
        }
    }
}
