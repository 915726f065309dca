use super::MorError;
use crate::interconnect::{CoupledModel, OperatingPoint, Subsystem};
use crate::lti::FrfSweep;

/// Closed-loop FRF of `model` with its subsystems replaced by `reduced`.
///
/// The interfaces and the position-dependent coupling are those of `model`;
/// reduction only swaps the blocks. Replacements must expose the same port
/// labels in the same order.
pub fn assemble_reduced(
    model: &CoupledModel,
    reduced: Vec<Subsystem>,
    op: &OperatingPoint,
    omegas: &[f64],
) -> Result<FrfSweep, MorError> {
    Ok(model.with_subsystems(reduced)?.assemble(op, omegas)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interconnect::{Anchoring, ExternalPort, InterfaceSide, InterfaceSpec, SpringSpec, VirtualPoint};
    use crate::lti::log_space;
    use crate::models::{make_chain, ChainBoundary, ChainParams};
    use crate::mor::{reduce_cb, relative_error, DEFAULT_FLOOR};

    fn pair() -> CoupledModel {
        let p = ChainParams {
            mass: 1.0,
            stiffness: 50.0,
            damping: 0.3,
        };
        let a = make_chain(10, p, ChainBoundary::FixedFree, &[4, 9]).unwrap();
        let b = make_chain(6, p, ChainBoundary::FreeFree, &[0, 5]).unwrap();
        let side = |sub: usize, coords: [f64; 2]| InterfaceSide {
            subsystem: sub,
            direction: "x".into(),
            points: coords
                .iter()
                .enumerate()
                .map(|(k, &c)| VirtualPoint {
                    coordinate: c,
                    input: k,
                    output: k,
                })
                .collect(),
        };
        let iface = InterfaceSpec {
            id: "ab".into(),
            axis: "x".into(),
            side_j: side(0, [0.0, 1.0]),
            side_ell: side(1, [0.0, 1.0]),
            springs: vec![SpringSpec {
                stiffness: 20.0,
                anchor_j: 0.5,
                anchor_ell_base: 0.5,
            }],
            anchoring: Anchoring::FixedToJ,
        };
        CoupledModel::new(
            vec!["a".into(), "b".into()],
            vec![a.into(), b.into()],
            vec![iface],
            vec![ExternalPort {
                label: "u".into(),
                subsystem: 1,
                port: 1,
            }],
            vec![ExternalPort {
                label: "y".into(),
                subsystem: 1,
                port: 1,
            }],
        )
        .unwrap()
    }

    #[test]
    fn full_order_is_bitwise_identical() {
        let model = pair();
        let w = log_space(0.1, 30.0, 50);
        let op = OperatingPoint::new(vec![0.1]);
        let full = model.assemble(&op, &w).unwrap();
        let same = assemble_reduced(&model, model.subsystems().to_vec(), &op, &w).unwrap();
        assert_eq!(full, same);
    }

    #[test]
    fn one_reduction_serves_all_points() {
        let model = pair();
        let a = model.subsystems()[0].as_second_order().unwrap();
        let (ra, _) = reduce_cb(a, &a.port_dofs(), 8).unwrap();
        let subs = vec![ra.into(), model.subsystems()[1].clone()];
        let w = log_space(0.1, 5.0, 60);
        for d in [-0.2, 0.0, 0.3] {
            let op = OperatingPoint::new(vec![d]);
            let full = model.assemble(&op, &w).unwrap();
            let red = assemble_reduced(&model, subs.clone(), &op, &w).unwrap();
            let err = relative_error(&full, &red, None, DEFAULT_FLOOR).unwrap();
            assert!(err.max_error() < 1e-3, "{}", err.max_error());
        }
    }

    #[test]
    fn port_mismatch_is_rejected() {
        let model = pair();
        let other = make_chain(10, ChainParams::default(), ChainBoundary::FixedFree, &[4]).unwrap();
        let subs = vec![other.into(), model.subsystems()[1].clone()];
        let op = OperatingPoint::new(vec![0.0]);
        assert!(assemble_reduced(&model, subs, &op, &[1.0]).is_err());
    }
}
