use nalgebra::DMatrix;

use super::{BasisMetadata, MorError, ReductionBasis, ReductionMethod};
use crate::linalg::{generalized_symmetric_eigen, mul_accurate, symmetrize};
use crate::lti::{InputPort, OutputPort, SecondOrderSystem};
use crate::sparse::SparseMatrix;

/// Singular values of the Hintz–Herting residual modes below this fraction
/// of the largest mode-shape column norm count as linearly dependent.
const HH_RANK_TOL: f64 = 1e-8;

/// Boundary split and static constraint modes shared by both methods.
#[derive(Clone, Debug)]
struct StaticModes {
    boundary: Vec<usize>,
    interior: Vec<usize>,
    /// `n × n_b`, identity on the boundary rows and `−K_ii⁻¹K_ib` below.
    psi: DMatrix<f64>,
}

fn check_boundary(sys: &SecondOrderSystem, boundary: &[usize]) -> Result<Vec<usize>, MorError> {
    let n = sys.n_dof();
    let mut b = boundary.to_vec();
    b.sort_unstable();
    b.dedup();
    if b.is_empty() {
        return Err(MorError::EmptyBoundary);
    }
    if let Some(&dof) = b.iter().find(|&&d| d >= n) {
        return Err(MorError::BoundaryOutOfRange { dof, n_dof: n });
    }
    let ports = sys
        .inputs()
        .iter()
        .map(|p| (&p.label, p.dof))
        .chain(sys.outputs().iter().map(|p| (&p.label, p.dof)));
    for (label, dof) in ports {
        if b.binary_search(&dof).is_err() {
            return Err(MorError::PortNotOnBoundary {
                label: label.clone(),
                dof,
            });
        }
    }
    Ok(b)
}

fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| m[(rows[r], cols[c])])
}

impl StaticModes {
    fn new(sys: &SecondOrderSystem, boundary: &[usize], k: &DMatrix<f64>) -> Result<Self, MorError> {
        let boundary = check_boundary(sys, boundary)?;
        let n = sys.n_dof();
        let interior: Vec<usize> = (0..n).filter(|d| boundary.binary_search(d).is_err()).collect();
        let mut psi = DMatrix::zeros(n, boundary.len());
        for (j, &b) in boundary.iter().enumerate() {
            psi[(b, j)] = 1.0;
        }
        if !interior.is_empty() {
            let k_ii = symmetrize(&submatrix(k, &interior, &interior));
            let k_ib = submatrix(k, &interior, &boundary);
            let chol = k_ii.clone().cholesky().ok_or(MorError::SingularInterior)?;
            let mut x = -chol.solve(&k_ib);
            // One refinement step with the residual K_ib + K_ii·X evaluated in
            // twice the working precision. The condensed stiffness depends on
            // that residual, so this is what makes static condensation exact
            // to rounding.
            let mut ab = DMatrix::zeros(interior.len(), interior.len() + boundary.len());
            ab.columns_mut(0, interior.len()).copy_from(&k_ii);
            ab.columns_mut(interior.len(), boundary.len()).copy_from(&k_ib);
            let mut xb = DMatrix::zeros(interior.len() + boundary.len(), boundary.len());
            xb.rows_mut(0, interior.len()).copy_from(&x);
            xb.rows_mut(interior.len(), boundary.len()).fill_with_identity();
            x -= chol.solve(&mul_accurate(&ab, &xb));
            // Cholesky succeeds on some numerically singular matrices; guard
            // against a useless factor through the diagonal ratio.
            let l = chol.l();
            let diag: Vec<f64> = (0..interior.len()).map(|i| l[(i, i)] * l[(i, i)]).collect();
            let (lo, hi) = diag
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
            if !(lo > 1e-13 * hi) || !x.iter().all(|v| v.is_finite()) {
                return Err(MorError::SingularInterior);
            }
            for (r, &i) in interior.iter().enumerate() {
                psi.row_mut(i).copy_from(&x.row(r));
            }
        }
        Ok(Self {
            boundary,
            interior,
            psi,
        })
    }
}

/// Projects `sys` onto `V`, renumbering every port DOF to its position in
/// `boundary` (the first reduced coordinates are the boundary DOFs).
fn project(sys: &SecondOrderSystem, v: &DMatrix<f64>, boundary: &[usize]) -> Result<SecondOrderSystem, MorError> {
    let vt = v.transpose();
    let reduce =
        |m: &SparseMatrix| SparseMatrix::from_dense(&symmetrize(&mul_accurate(&vt, &mul_accurate(&m.to_dense(), v))), 0.0);
    let local = |dof: usize| boundary.binary_search(&dof).expect("ports checked against boundary");
    let inputs = sys
        .inputs()
        .iter()
        .map(|p| InputPort {
            dof: local(p.dof),
            ..p.clone()
        })
        .collect();
    let outputs = sys
        .outputs()
        .iter()
        .map(|p| OutputPort {
            dof: local(p.dof),
            ..p.clone()
        })
        .collect();
    Ok(SecondOrderSystem::new(
        reduce(sys.mass()),
        reduce(sys.damping()),
        reduce(sys.stiffness()),
        inputs,
        outputs,
    )?)
}

fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

fn cutoff_hz(omegas: &[f64]) -> Option<f64> {
    omegas.last().map(|w| w / (2.0 * std::f64::consts::PI))
}

/// Craig–Bampton basis data: static constraint modes and all
/// fixed-interface normal modes, truncated on demand.
#[derive(Clone, Debug)]
pub struct CraigBampton {
    system: SecondOrderSystem,
    statics: StaticModes,
    /// Fixed-interface modes embedded in full coordinates (zero on the
    /// boundary), ascending frequency, mass-normalized.
    modes: DMatrix<f64>,
    omegas: Vec<f64>,
}

impl CraigBampton {
    pub fn new(sys: &SecondOrderSystem, boundary: &[usize]) -> Result<Self, MorError> {
        let k = sys.stiffness().to_dense();
        let statics = StaticModes::new(sys, boundary, &k)?;
        let interior = &statics.interior;
        let n = sys.n_dof();
        let (modes, omegas) = if interior.is_empty() {
            (DMatrix::zeros(n, 0), Vec::new())
        } else {
            let m = sys.mass().to_dense();
            let basis = generalized_symmetric_eigen(
                &submatrix(&m, interior, interior),
                &submatrix(&k, interior, interior),
            )?;
            let mut modes = DMatrix::zeros(n, basis.len());
            for (r, &i) in interior.iter().enumerate() {
                modes.row_mut(i).copy_from(&basis.shapes.row(r));
            }
            let omegas = (0..basis.len()).map(|r| basis.omega(r)).collect();
            (modes, omegas)
        };
        Ok(Self {
            system: sys.clone(),
            statics,
            modes,
            omegas,
        })
    }

    pub fn boundary(&self) -> &[usize] {
        &self.statics.boundary
    }

    /// Number of fixed-interface modes available.
    pub fn max_modes(&self) -> usize {
        self.omegas.len()
    }

    pub fn mode_omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn reduce(&self, n_modes: usize) -> Result<(SecondOrderSystem, ReductionBasis), MorError> {
        if n_modes > self.max_modes() {
            return Err(MorError::TooManyModes {
                requested: n_modes,
                available: self.max_modes(),
            });
        }
        let v = hstack(&self.statics.psi, &self.modes.columns(0, n_modes).into_owned());
        let reduced = project(&self.system, &v, &self.statics.boundary)?;
        let kept = self.omegas[..n_modes].to_vec();
        let basis = ReductionBasis {
            method: ReductionMethod::Cb,
            w: v.clone(),
            order: v.ncols(),
            v,
            boundary: self.statics.boundary.clone(),
            metadata: BasisMetadata::ComponentModes {
                n_modes,
                cutoff_hz: cutoff_hz(&kept),
                kept_mode_omegas: kept,
                rank_deficiency: 0,
            },
        };
        Ok((reduced, basis))
    }
}

/// Hintz–Herting basis data: static constraint modes plus free-interface
/// normal modes with their static part removed.
#[derive(Clone, Debug)]
pub struct HintzHerting {
    system: SecondOrderSystem,
    statics: StaticModes,
    /// Free-interface modes of the full system, ascending, mass-normalized.
    modes: DMatrix<f64>,
    omegas: Vec<f64>,
}

impl HintzHerting {
    pub fn new(sys: &SecondOrderSystem, boundary: &[usize]) -> Result<Self, MorError> {
        let k = sys.stiffness().to_dense();
        let statics = StaticModes::new(sys, boundary, &k)?;
        let basis = generalized_symmetric_eigen(&sys.mass().to_dense(), &k)?;
        let omegas = (0..basis.len()).map(|r| basis.omega(r)).collect();
        Ok(Self {
            system: sys.clone(),
            statics,
            modes: basis.shapes,
            omegas,
        })
    }

    pub fn boundary(&self) -> &[usize] {
        &self.statics.boundary
    }

    /// Number of free-interface modes available.
    pub fn max_modes(&self) -> usize {
        self.omegas.len()
    }

    pub fn mode_omegas(&self) -> &[f64] {
        &self.omegas
    }

    /// Reduces with the `n_modes` lowest free-interface modes. The residual
    /// `Φ − ΨΦ_b` vanishes on the boundary and loses rank for rigid-body
    /// modes (which the static modes already span), so the reduced order is
    /// `n_b + rank`, reported as `rank_deficiency = n_modes − rank`.
    pub fn reduce(&self, n_modes: usize) -> Result<(SecondOrderSystem, ReductionBasis), MorError> {
        if n_modes > self.max_modes() {
            return Err(MorError::TooManyModes {
                requested: n_modes,
                available: self.max_modes(),
            });
        }
        let b = &self.statics.boundary;
        let phi = self.modes.columns(0, n_modes).into_owned();
        let phi_b = submatrix(&phi, b, &(0..n_modes).collect::<Vec<_>>());
        let z = &phi - &self.statics.psi * phi_b;
        let scale = phi.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
        let u = if n_modes == 0 {
            DMatrix::zeros(self.system.n_dof(), 0)
        } else {
            let svd = z.svd(true, false);
            let u = svd.u.expect("requested");
            let keep: Vec<usize> = (0..svd.singular_values.len())
                .filter(|&i| svd.singular_values[i] > HH_RANK_TOL * scale)
                .collect();
            DMatrix::from_fn(u.nrows(), keep.len(), |r, c| u[(r, keep[c])])
        };
        let rank = u.ncols();
        let v = hstack(&self.statics.psi, &u);
        let reduced = project(&self.system, &v, b)?;
        let kept = self.omegas[..n_modes].to_vec();
        let basis = ReductionBasis {
            method: ReductionMethod::Hh,
            w: v.clone(),
            order: v.ncols(),
            v,
            boundary: b.clone(),
            metadata: BasisMetadata::ComponentModes {
                n_modes,
                cutoff_hz: cutoff_hz(&kept),
                kept_mode_omegas: kept,
                rank_deficiency: n_modes - rank,
            },
        };
        Ok((reduced, basis))
    }
}

/// Craig–Bampton reduction keeping `boundary` and `n_modes` fixed-interface modes.
pub fn reduce_cb(
    sys: &SecondOrderSystem,
    boundary: &[usize],
    n_modes: usize,
) -> Result<(SecondOrderSystem, ReductionBasis), MorError> {
    CraigBampton::new(sys, boundary)?.reduce(n_modes)
}

/// Hintz–Herting reduction keeping `boundary` and `n_modes` free-interface modes.
pub fn reduce_hh(
    sys: &SecondOrderSystem,
    boundary: &[usize],
    n_modes: usize,
) -> Result<(SecondOrderSystem, ReductionBasis), MorError> {
    HintzHerting::new(sys, boundary)?.reduce(n_modes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::frf_eval;
    use crate::lti::to_descriptor;
    use crate::models::{make_chain, ChainBoundary, ChainParams};

    fn chain(boundary: ChainBoundary, ports: &[usize]) -> SecondOrderSystem {
        make_chain(
            8,
            ChainParams {
                mass: 1.0,
                stiffness: 100.0,
                damping: 0.1,
            },
            boundary,
            ports,
        )
        .unwrap()
    }

    fn response(sys: &SecondOrderSystem, omegas: &[f64]) -> Vec<DMatrix<num_complex::Complex64>> {
        frf_eval(&to_descriptor(sys).unwrap(), omegas).unwrap().data().to_vec()
    }

    #[test]
    fn cb_without_modes_is_statically_exact() {
        let sys = chain(ChainBoundary::FixedFree, &[2, 7]);
        let (red, basis) = reduce_cb(&sys, &[2, 7], 0).unwrap();
        assert_eq!(basis.order, 2);
        assert_eq!(red.n_dof(), 2);
        let (full, r) = (response(&sys, &[0.0]), response(&red, &[0.0]));
        let diff = (&full[0] - &r[0]).norm() / full[0].norm();
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn cb_with_all_modes_is_exact() {
        let sys = chain(ChainBoundary::FixedFree, &[3]);
        let cb = CraigBampton::new(&sys, &[3]).unwrap();
        assert_eq!(cb.max_modes(), 7);
        let (red, _) = cb.reduce(7).unwrap();
        let w = [0.5, 3.0, 17.0];
        for (a, b) in response(&sys, &w).iter().zip(response(&red, &w)) {
            assert!((a - b).norm() <= 1e-9 * a.norm());
        }
    }

    #[test]
    fn ports_must_be_on_boundary() {
        let sys = chain(ChainBoundary::FixedFree, &[2, 7]);
        assert!(matches!(
            reduce_cb(&sys, &[2], 1),
            Err(MorError::PortNotOnBoundary { dof: 7, .. })
        ));
        assert!(matches!(reduce_cb(&sys, &[], 1), Err(MorError::EmptyBoundary)));
        assert!(matches!(
            reduce_cb(&sys, &[2, 7, 9], 1),
            Err(MorError::BoundaryOutOfRange { dof: 9, .. })
        ));
    }

    #[test]
    fn floating_interior_is_rejected() {
        // free-free chain with an interior that is not tied to any boundary DOF
        let sys = chain(ChainBoundary::FreeFree, &[0]);
        let k = SparseMatrix::from_triplets(3, 3, [(0, 0, 1.0), (1, 1, 1.0), (1, 2, -1.0), (2, 1, -1.0), (2, 2, 1.0)]);
        let m = SparseMatrix::identity(3);
        let split = SecondOrderSystem::new(
            m,
            SparseMatrix::zeros(3, 3),
            k,
            vec![InputPort::new("f", 0)],
            vec![OutputPort::displacement("q", 0)],
        )
        .unwrap();
        assert!(matches!(reduce_cb(&split, &[0], 1), Err(MorError::SingularInterior)));
        // the connected free-free chain is fine
        assert!(reduce_cb(&sys, &[0], 2).is_ok());
    }

    #[test]
    fn too_many_modes() {
        let sys = chain(ChainBoundary::FixedFree, &[7]);
        assert!(matches!(
            reduce_cb(&sys, &[7], 8),
            Err(MorError::TooManyModes { requested: 8, available: 7 })
        ));
    }

    #[test]
    fn hh_drops_rigid_modes() {
        let sys = chain(ChainBoundary::FreeFree, &[0, 7]);
        let hh = HintzHerting::new(&sys, &[0, 7]).unwrap();
        let (red, basis) = hh.reduce(3).unwrap();
        match basis.metadata {
            BasisMetadata::ComponentModes { rank_deficiency, .. } => assert_eq!(rank_deficiency, 1),
            _ => unreachable!(),
        }
        assert_eq!(red.n_dof(), 2 + 2);
        assert_eq!(basis.state_order(), 8);
    }

    #[test]
    fn hh_with_all_modes_is_exact() {
        let sys = chain(ChainBoundary::FixedFree, &[1, 6]);
        let (red, basis) = reduce_hh(&sys, &[1, 6], 8).unwrap();
        assert_eq!(basis.order, 8);
        let w = [0.5, 3.0, 17.0];
        for (a, b) in response(&sys, &w).iter().zip(response(&red, &w)) {
            assert!((a - b).norm() <= 1e-9 * a.norm());
        }
    }

    #[test]
    fn reduced_ports_follow_boundary_order() {
        let sys = chain(ChainBoundary::FixedFree, &[6, 2]);
        let (red, _) = reduce_cb(&sys, &[6, 2], 1).unwrap();
        assert_eq!(red.input_labels(), sys.input_labels());
        assert_eq!(red.inputs()[0].dof, 1);
        assert_eq!(red.inputs()[1].dof, 0);
    }
}
