//! Spring coupling through virtual interconnection points.
//!
//! A spring between sides j and ℓ is represented by the four virtual points
//! that bracket it, `(j_α, j_β, ℓ_α, ℓ_β)`. With linear interpolation weights
//! collected in `Q` (4×2), its contribution to `K11` is
//! `P_u · Q [−k k; k −k] Qᵀ · P_yᵀ`, where `P_u`/`P_y` scatter the four
//! active points onto the block-system input rows and output columns.
//! Because `Q [−k k; k −k] Qᵀ = −k·v vᵀ` with
//! `v = (w_jα, w_jβ, −w_ℓα, −w_ℓβ)`, each block is rank one and negative
//! semidefinite, and its rows sum to zero whenever the weights on each side
//! sum to one.

use nalgebra::Matrix4;

use super::{
    BlockSystem, InterconnectError, InterfaceSide, InterfaceSpec, OperatingPoint, SpringFailure,
    SpringSpec,
};
use crate::sparse::SparseMatrix;

/// Distance within which a spring counts as sitting on a port in
/// [`static_k11`], and within which a position past a span end is taken as
/// the end point.
pub const SNAP_TOL: f64 = 1e-9;

/// Distance, relative to the grid span, below which a position is taken to
/// coincide with a grid point in [`interp_weights`]. Covers rounding of
/// `anchor + offset` only.
pub const COINCIDENCE_TOL: f64 = 1e-12;

/// Indices of the two grid points bracketing a position and their weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bracket {
    pub alpha: usize,
    pub beta: usize,
    pub w_alpha: f64,
    pub w_beta: f64,
}

/// Linear interpolation weights of `position` on a strictly increasing grid.
///
/// The weight on a point is proportional to the distance to the *other*
/// bracketing point, so a spring sitting on a grid point loads only that
/// point. A coincident point `k` is reported as bracket `[k, k+1]` with
/// weights `(1, 0)`; the last point as `[n−2, n−1]` with `(0, 1)`.
pub fn interp_weights(grid: &[f64], position: f64) -> Result<Bracket, InterconnectError> {
    let n = grid.len();
    if n < 2 {
        return Err(InterconnectError::GridTooShort(n));
    }
    let (min, max) = (grid[0], grid[n - 1]);
    if !(position >= min - SNAP_TOL && position <= max + SNAP_TOL) {
        return Err(InterconnectError::OutOfSpan { position, min, max });
    }
    // Rounding of anchor + offset must not push a spring off the span end or
    // next to a grid point it is meant to sit on.
    let mut position = position.clamp(min, max);
    let upper = grid.partition_point(|&g| g <= position);
    for k in [upper.saturating_sub(1), upper.min(n - 1)] {
        if (grid[k] - position).abs() <= COINCIDENCE_TOL * (max - min) {
            position = grid[k];
        }
    }
    // first index with grid[idx] > position
    let upper = grid.partition_point(|&g| g <= position);
    if upper > 0 && grid[upper - 1] == position {
        let k = upper - 1;
        return Ok(if k + 1 < n {
            Bracket {
                alpha: k,
                beta: k + 1,
                w_alpha: 1.0,
                w_beta: 0.0,
            }
        } else {
            Bracket {
                alpha: k - 1,
                beta: k,
                w_alpha: 0.0,
                w_beta: 1.0,
            }
        });
    }
    let (alpha, beta) = (upper - 1, upper);
    let d_alpha = position - grid[alpha];
    let d_beta = grid[beta] - position;
    let total = d_alpha + d_beta;
    Ok(Bracket {
        alpha,
        beta,
        w_alpha: d_beta / total,
        w_beta: d_alpha / total,
    })
}

/// The 4×4 active block of one spring and where it lands in `K11`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpringCoupling {
    /// Global input rows `(j_α, j_β, ℓ_α, ℓ_β)`.
    pub rows: [usize; 4],
    /// Global output columns, same ordering.
    pub cols: [usize; 4],
    pub block: Matrix4<f64>,
}

impl SpringCoupling {
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..4).flat_map(move |a| (0..4).map(move |b| (self.rows[a], self.cols[b], self.block[(a, b)])))
    }

    pub fn to_sparse(&self, m_b: usize, p_b: usize) -> SparseMatrix {
        SparseMatrix::from_triplets(m_b, p_b, self.triplets())
    }
}

fn side_ports(
    block: &BlockSystem,
    side: &InterfaceSide,
    bracket: &Bracket,
) -> Result<([usize; 2], [usize; 2]), InterconnectError> {
    let pa = &side.points[bracket.alpha];
    let pb = &side.points[bracket.beta];
    Ok((
        [
            block.global_input(side.subsystem, pa.input)?,
            block.global_input(side.subsystem, pb.input)?,
        ],
        [
            block.global_output(side.subsystem, pa.output)?,
            block.global_output(side.subsystem, pb.output)?,
        ],
    ))
}

pub fn spring_coupling(
    spring: &SpringSpec,
    interface: &InterfaceSpec,
    delta: f64,
    block: &BlockSystem,
) -> Result<SpringCoupling, InterconnectError> {
    let (pos_j, pos_ell) = interface.spring_positions(spring, delta);
    let bj = interp_weights(&interface.side_j.coordinates(), pos_j)?;
    let bl = interp_weights(&interface.side_ell.coordinates(), pos_ell)?;
    let (in_j, out_j) = side_ports(block, &interface.side_j, &bj)?;
    let (in_l, out_l) = side_ports(block, &interface.side_ell, &bl)?;

    let v = [bj.w_alpha, bj.w_beta, -bl.w_alpha, -bl.w_beta];
    let k = spring.stiffness;
    let blk = Matrix4::from_fn(|a, b| -k * v[a] * v[b]);
    Ok(SpringCoupling {
        rows: [in_j[0], in_j[1], in_l[0], in_l[1]],
        cols: [out_j[0], out_j[1], out_l[0], out_l[1]],
        block: blk,
    })
}

/// Single-spring contribution `K̄11^(i,s)` as an `m_b × p_b` matrix.
pub fn spring_k11(
    spring: &SpringSpec,
    interface: &InterfaceSpec,
    delta: f64,
    block: &BlockSystem,
) -> Result<SparseMatrix, InterconnectError> {
    Ok(spring_coupling(spring, interface, delta, block)?.to_sparse(block.m_b(), block.p_b()))
}

fn for_each_spring<F>(
    interfaces: &[InterfaceSpec],
    op: &OperatingPoint,
    block: &BlockSystem,
    mut f: F,
) -> Result<SparseMatrix, InterconnectError>
where
    F: FnMut(&InterfaceSpec, &SpringSpec, f64) -> Result<Vec<(usize, usize, f64)>, InterconnectError>,
{
    op.check(interfaces.len())?;
    let mut trip = Vec::new();
    let mut failures = Vec::new();
    for (iface, &delta) in interfaces.iter().zip(&op.offsets) {
        iface.validate(block)?;
        for (s, spring) in iface.springs.iter().enumerate() {
            match f(iface, spring, delta) {
                Ok(t) => trip.extend(t),
                Err(error) => failures.push(SpringFailure {
                    interface: iface.id.clone(),
                    spring: s,
                    error: Box::new(error),
                }),
            }
        }
    }
    if !failures.is_empty() {
        return Err(InterconnectError::Springs(failures));
    }
    Ok(SparseMatrix::from_triplets(block.m_b(), block.p_b(), trip))
}

/// `K̄11 = Σ_i Σ_s K̄11^(i,s)` at the given operating point.
pub fn posdep_k11(
    interfaces: &[InterfaceSpec],
    op: &OperatingPoint,
    block: &BlockSystem,
) -> Result<SparseMatrix, InterconnectError> {
    for_each_spring(interfaces, op, block, |iface, spring, delta| {
        Ok(spring_coupling(spring, iface, delta, block)?.triplets().collect())
    })
}

fn coincident(side: &InterfaceSide, position: f64, name: &'static str) -> Result<usize, InterconnectError> {
    side.points
        .iter()
        .enumerate()
        .filter(|(_, p)| (p.coordinate - position).abs() <= SNAP_TOL)
        .min_by(|a, b| {
            (a.1.coordinate - position)
                .abs()
                .total_cmp(&(b.1.coordinate - position).abs())
        })
        .map(|(k, _)| k)
        .ok_or(InterconnectError::NotCoincident { side: name, position })
}

/// Static coupling: every spring must sit on a port on both sides; the
/// kernel `[−k k; k −k]` is routed between those two ports. No interpolation.
pub fn static_k11(
    interfaces: &[InterfaceSpec],
    op: &OperatingPoint,
    block: &BlockSystem,
) -> Result<SparseMatrix, InterconnectError> {
    for_each_spring(interfaces, op, block, |iface, spring, delta| {
        let (pos_j, pos_ell) = iface.spring_positions(spring, delta);
        let a = &iface.side_j.points[coincident(&iface.side_j, pos_j, "j")?];
        let b = &iface.side_ell.points[coincident(&iface.side_ell, pos_ell, "ℓ")?];
        let ua = block.global_input(iface.side_j.subsystem, a.input)?;
        let ya = block.global_output(iface.side_j.subsystem, a.output)?;
        let ub = block.global_input(iface.side_ell.subsystem, b.input)?;
        let yb = block.global_output(iface.side_ell.subsystem, b.output)?;
        let k = spring.stiffness;
        Ok(vec![(ua, ya, -k), (ua, yb, k), (ub, ya, k), (ub, yb, -k)])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interconnect::{Anchoring, VirtualPoint};

    #[test]
    fn weights_at_grid_point_and_midpoint() {
        let b = interp_weights(&[0.0, 1.0], 0.0).unwrap();
        assert_eq!((b.alpha, b.beta, b.w_alpha, b.w_beta), (0, 1, 1.0, 0.0));
        let b = interp_weights(&[0.0, 1.0], 0.5).unwrap();
        assert_eq!((b.w_alpha, b.w_beta), (0.5, 0.5));
        let b = interp_weights(&[0.0, 1.0], 1.0).unwrap();
        assert_eq!((b.alpha, b.beta, b.w_alpha, b.w_beta), (0, 1, 0.0, 1.0));
    }

    #[test]
    fn weights_on_uneven_grid() {
        // d_alpha = 1, d_beta = 2
        let b = interp_weights(&[0.0, 2.0, 5.0], 3.0).unwrap();
        assert_eq!((b.alpha, b.beta), (1, 2));
        assert!((b.w_alpha - 2.0 / 3.0).abs() < 1e-15);
        assert!((b.w_beta - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn outside_span_is_an_error() {
        assert!(matches!(
            interp_weights(&[0.0, 1.0], 1.0 + 1e-6),
            Err(InterconnectError::OutOfSpan { .. })
        ));
        let b = interp_weights(&[0.0, 1.0], 1.0 + 1e-12).unwrap();
        assert_eq!((b.alpha, b.beta, b.w_alpha, b.w_beta), (0, 1, 0.0, 1.0));
        assert!(matches!(
            interp_weights(&[0.0, 1.0], f64::NAN),
            Err(InterconnectError::OutOfSpan { .. })
        ));
        assert_eq!(interp_weights(&[0.0], 0.0), Err(InterconnectError::GridTooShort(1)));
    }

    fn two_body(grid_j: &[f64], grid_l: &[f64], springs: Vec<SpringSpec>) -> (BlockSystem, InterfaceSpec) {
        let labels = |p: &str, n: usize| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
        let block = BlockSystem::from_ports([
            ("j".to_string(), labels("f", grid_j.len()), labels("q", grid_j.len())),
            ("l".to_string(), labels("f", grid_l.len()), labels("q", grid_l.len())),
        ])
        .unwrap();
        let side = |sub, grid: &[f64]| InterfaceSide {
            subsystem: sub,
            direction: "z".into(),
            points: grid
                .iter()
                .enumerate()
                .map(|(i, &c)| VirtualPoint {
                    input: i,
                    output: i,
                    coordinate: c,
                })
                .collect(),
        };
        let iface = InterfaceSpec {
            id: "rail".into(),
            axis: "y".into(),
            side_j: side(0, grid_j),
            side_ell: side(1, grid_l),
            springs,
            anchoring: Anchoring::FixedToJ,
        };
        (block, iface)
    }

    #[test]
    fn aligned_spring_block() {
        let k = 3.0;
        let (block, iface) = two_body(
            &[0.0, 1.0],
            &[0.0, 1.0],
            vec![SpringSpec {
                stiffness: k,
                anchor_j: 0.0,
                anchor_ell_base: 0.0,
            }],
        );
        let c = spring_coupling(&iface.springs[0], &iface, 0.0, &block).unwrap();
        let expect = Matrix4::new(
            -k, 0.0, k, 0.0, //
            0.0, 0.0, 0.0, 0.0, //
            k, 0.0, -k, 0.0, //
            0.0, 0.0, 0.0, 0.0,
        );
        assert_eq!(c.block, expect);
        assert_eq!(c.rows, [0, 1, 2, 3]);
    }

    #[test]
    fn midpoint_spring_block() {
        let k = 2.0;
        let (block, iface) = two_body(
            &[0.0, 1.0],
            &[0.0, 1.0],
            vec![SpringSpec {
                stiffness: k,
                anchor_j: 0.5,
                anchor_ell_base: 0.25,
            }],
        );
        let c = spring_coupling(&iface.springs[0], &iface, 0.25, &block).unwrap();
        let s = [1.0, 1.0, -1.0, -1.0];
        let expect = Matrix4::from_fn(|a, b| -0.25 * k * s[a] * s[b]);
        assert!((c.block - expect).abs().max() < 1e-15);
    }

    #[test]
    fn flipped_anchoring_moves_side_j() {
        let (block, mut iface) = two_body(
            &[0.0, 1.0],
            &[0.0, 1.0],
            vec![SpringSpec {
                stiffness: 1.0,
                anchor_j: 0.5,
                anchor_ell_base: 0.0,
            }],
        );
        iface.anchoring = Anchoring::FixedToEll;
        assert_eq!(iface.spring_positions(&iface.springs[0], 0.25), (0.25, 0.0));
        let c = spring_coupling(&iface.springs[0], &iface, 0.25, &block).unwrap();
        // side j weights (0.75, 0.25), side ℓ (1, 0)
        assert!((c.block[(0, 0)] + 0.75 * 0.75).abs() < 1e-15);
        assert!((c.block[(1, 2)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn static_requires_coincidence_and_superposes() {
        let springs = vec![
            SpringSpec {
                stiffness: 1.0,
                anchor_j: 0.0,
                anchor_ell_base: 1.0,
            },
            SpringSpec {
                stiffness: 2.0,
                anchor_j: 0.0,
                anchor_ell_base: 0.0,
            },
        ];
        let (block, iface) = two_body(&[0.0, 1.0], &[0.0, 1.0], springs);
        let op = OperatingPoint::new(vec![0.0]);
        let k = static_k11(std::slice::from_ref(&iface), &op, &block).unwrap();
        assert_eq!(k.get(0, 0), -3.0);
        assert_eq!(k.get(0, 3), 1.0);
        assert_eq!(k.get(0, 2), 2.0);

        let err = static_k11(&[iface], &OperatingPoint::new(vec![-0.5]), &block).unwrap_err();
        match err {
            InterconnectError::Springs(f) => {
                assert_eq!(f.len(), 2);
                assert_eq!(f[0].spring, 0);
                assert!(matches!(*f[0].error, InterconnectError::NotCoincident { side: "ℓ", .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_interfaces_give_zero() {
        let (block, _) = two_body(&[0.0, 1.0], &[0.0, 1.0], vec![]);
        let k = posdep_k11(&[], &OperatingPoint::new(vec![]), &block).unwrap();
        assert_eq!(k.shape(), (4, 4));
        assert_eq!(k.nnz(), 0);
        assert!(matches!(
            posdep_k11(&[], &OperatingPoint::new(vec![0.0]), &block),
            Err(InterconnectError::OperatingPoint { expected: 0, got: 1 })
        ));
    }
}
