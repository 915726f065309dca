use nalgebra::DMatrix;

use super::LtiError;
use crate::linalg::{generalized_symmetric_eigen, symmetrize};
use crate::sparse::SparseMatrix;

/// Modes with `ω² <= RIGID_MODE_TOL · ω²_max` count as rigid-body modes.
pub const RIGID_MODE_TOL: f64 = 1e-10;

/// `D = M Φ diag(2ζω_r) Φᵀ M` with mass-normalized undamped modes `Φ`.
/// Rigid-body modes get no damping.
pub fn build_modal_damping(
    mass: &SparseMatrix,
    stiffness: &SparseMatrix,
    zeta: f64,
) -> Result<SparseMatrix, LtiError> {
    if !(0.0..1.0).contains(&zeta) {
        return Err(LtiError::DampingRatio(zeta));
    }
    let n = mass.nrows();
    if stiffness.shape() != (n, n) {
        return Err(LtiError::Shape {
            matrix: "K",
            rows: stiffness.nrows(),
            cols: stiffness.ncols(),
            expected: n,
        });
    }
    if zeta == 0.0 {
        return Ok(SparseMatrix::zeros(n, n));
    }
    let m = mass.to_dense();
    let basis = generalized_symmetric_eigen(&m, &stiffness.to_dense())?;
    let rigid = basis.rigid_modes(RIGID_MODE_TOL);
    let mphi = &m * &basis.shapes;
    let mut weighted = mphi.clone();
    for r in 0..basis.len() {
        let c = if rigid.contains(&r) {
            0.0
        } else {
            2.0 * zeta * basis.omega(r)
        };
        weighted.column_mut(r).scale_mut(c);
    }
    let d = symmetrize(&(weighted * mphi.transpose()));
    Ok(SparseMatrix::from_dense(&d, 0.0))
}

/// Damping ratio `(ΦᵀDΦ)_rr / (2ω_r)` of every undamped mode, `None` for
/// rigid-body modes. Ascending frequency order.
pub fn modal_damping_ratios(
    mass: &SparseMatrix,
    damping: &SparseMatrix,
    stiffness: &SparseMatrix,
) -> Result<Vec<Option<f64>>, LtiError> {
    let basis = generalized_symmetric_eigen(&mass.to_dense(), &stiffness.to_dense())?;
    let rigid = basis.rigid_modes(RIGID_MODE_TOL);
    let phi: &DMatrix<f64> = &basis.shapes;
    let dt = phi.transpose() * damping.to_dense() * phi;
    Ok((0..basis.len())
        .map(|r| {
            if rigid.contains(&r) {
                None
            } else {
                Some(dt[(r, r)] / (2.0 * basis.omega(r)))
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_ratio_gives_exact_zero() {
        let m = SparseMatrix::identity(3);
        let k = SparseMatrix::from_triplets(3, 3, [(0, 0, 2.0), (1, 1, 3.0), (2, 2, 4.0)]);
        let d = build_modal_damping(&m, &k, 0.0).unwrap();
        assert_eq!(d.nnz(), 0);
        assert_eq!(d.shape(), (3, 3));
    }

    #[test]
    fn scalar_formula() {
        let m = SparseMatrix::from_triplets(1, 1, [(0, 0, 1.0)]);
        let k = SparseMatrix::from_triplets(1, 1, [(0, 0, 4.0)]);
        let d = build_modal_damping(&m, &k, 0.03).unwrap();
        assert!((d.get(0, 0) - 0.12).abs() < 1e-15);
    }

    #[test]
    fn ratio_out_of_range() {
        let m = SparseMatrix::identity(1);
        assert_eq!(
            build_modal_damping(&m, &m, 1.0).unwrap_err(),
            LtiError::DampingRatio(1.0)
        );
        assert!(build_modal_damping(&m, &m, -0.1).is_err());
    }

    #[test]
    fn rigid_modes_stay_undamped() {
        // free-free two-mass system
        let m = SparseMatrix::from_triplets(2, 2, [(0, 0, 1.0), (1, 1, 2.0)]);
        let k = SparseMatrix::from_triplets(2, 2, [(0, 0, 5.0), (0, 1, -5.0), (1, 0, -5.0), (1, 1, 5.0)]);
        let d = build_modal_damping(&m, &k, 0.05).unwrap();
        let ratios = modal_damping_ratios(&m, &d, &k).unwrap();
        assert_eq!(ratios[0], None);
        assert!((ratios[1].unwrap() - 0.05).abs() < 1e-12);
        // rigid translation produces no damping force
        let dense = d.to_dense();
        assert!((dense.row_sum()).norm() < 1e-12);
    }
}
