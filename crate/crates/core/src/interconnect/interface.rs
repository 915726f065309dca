use serde::{Deserialize, Serialize};

use super::{BlockSystem, InterconnectError};

/// A virtual interconnection point: one input (force) and one output
/// (displacement) port of a subsystem at a coordinate along the axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirtualPoint {
    pub input: usize,
    pub output: usize,
    pub coordinate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterfaceSide {
    pub subsystem: usize,
    /// Constrained direction, must agree on both sides.
    pub direction: String,
    pub points: Vec<VirtualPoint>,
}

impl InterfaceSide {
    pub fn coordinates(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.coordinate).collect()
    }
}

/// Which body carries the springs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchoring {
    /// Springs are fixed to side j and slide along side ℓ:
    /// position on ℓ is `anchor_ell_base + δ`.
    #[default]
    FixedToJ,
    /// Springs are fixed to side ℓ and slide along side j:
    /// position on j is `anchor_j − δ`.
    FixedToEll,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpringSpec {
    pub stiffness: f64,
    pub anchor_j: f64,
    pub anchor_ell_base: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterfaceSpec {
    pub id: String,
    pub axis: String,
    pub side_j: InterfaceSide,
    pub side_ell: InterfaceSide,
    pub springs: Vec<SpringSpec>,
    #[serde(default)]
    pub anchoring: Anchoring,
}

impl InterfaceSpec {
    /// Spring coordinates `(on side j, on side ℓ)` for relative offset `delta`.
    pub fn spring_positions(&self, spring: &SpringSpec, delta: f64) -> (f64, f64) {
        match self.anchoring {
            Anchoring::FixedToJ => (spring.anchor_j, spring.anchor_ell_base + delta),
            Anchoring::FixedToEll => (spring.anchor_j - delta, spring.anchor_ell_base),
        }
    }

    pub fn validate(&self, block: &BlockSystem) -> Result<(), InterconnectError> {
        if self.side_j.direction != self.side_ell.direction {
            return Err(InterconnectError::DirectionMismatch {
                interface: self.id.clone(),
                j: self.side_j.direction.clone(),
                ell: self.side_ell.direction.clone(),
            });
        }
        for side in [&self.side_j, &self.side_ell] {
            if side.points.len() < 2 {
                return Err(InterconnectError::GridTooSmall(self.id.clone()));
            }
            let increasing = side.points.iter().all(|p| p.coordinate.is_finite())
                && side.points.windows(2).all(|w| w[0].coordinate < w[1].coordinate);
            if !increasing {
                return Err(InterconnectError::GridNotIncreasing(self.id.clone()));
            }
            for p in &side.points {
                block.global_input(side.subsystem, p.input)?;
                block.global_output(side.subsystem, p.output)?;
            }
        }
        for (s, spring) in self.springs.iter().enumerate() {
            if !(spring.stiffness > 0.0 && spring.stiffness.is_finite()) {
                return Err(InterconnectError::NonPositiveStiffness {
                    interface: self.id.clone(),
                    spring: s,
                    stiffness: spring.stiffness,
                });
            }
        }
        Ok(())
    }
}

/// Relative displacement `δ_i` of side ℓ with respect to side j, one entry
/// per interface in model order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub offsets: Vec<f64>,
}

impl OperatingPoint {
    pub fn new(offsets: Vec<f64>) -> Self {
        Self { offsets }
    }

    pub fn check(&self, n_interfaces: usize) -> Result<(), InterconnectError> {
        if self.offsets.len() != n_interfaces {
            return Err(InterconnectError::OperatingPoint {
                expected: n_interfaces,
                got: self.offsets.len(),
            });
        }
        Ok(())
    }
}
