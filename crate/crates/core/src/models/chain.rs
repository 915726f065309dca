use super::ModelError;
use crate::lti::{InputPort, OutputPort, SecondOrderSystem};
use crate::sparse::SparseMatrix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ChainBoundary {
    /// Spring to ground before the first mass, last mass free.
    #[default]
    FixedFree,
    FreeFree,
    /// Springs to ground at both ends.
    FixedFixed,
}

/// Per-element mass, spring and dashpot values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainParams {
    pub mass: f64,
    pub stiffness: f64,
    pub damping: f64,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            stiffness: 1.0,
            damping: 0.0,
        }
    }
}

fn tridiagonal(n: usize, value: f64, boundary: ChainBoundary) -> SparseMatrix {
    // element e connects dof e-1 and e; dof -1 and dof n are ground
    let (first, last) = match boundary {
        ChainBoundary::FixedFree => (0, n - 1),
        ChainBoundary::FreeFree => (1, n - 1),
        ChainBoundary::FixedFixed => (0, n),
    };
    let mut t = Vec::new();
    for e in first..=last {
        let left = e.checked_sub(1);
        let right = (e < n).then_some(e);
        if let Some(a) = left {
            t.push((a, a, value));
        }
        if let Some(b) = right {
            t.push((b, b, value));
        }
        if let (Some(a), Some(b)) = (left, right) {
            t.push((a, b, -value));
            t.push((b, a, -value));
        }
    }
    SparseMatrix::from_triplets(n, n, t)
}

/// Lumped mass–spring–damper chain of `n` masses with a force input
/// `f{dof}` and a displacement output `q{dof}` at every DOF in `ports`.
pub fn make_chain(
    n: usize,
    params: ChainParams,
    boundary: ChainBoundary,
    ports: &[usize],
) -> Result<SecondOrderSystem, ModelError> {
    if n == 0 {
        return Err(ModelError::Config("chain needs at least one mass".into()));
    }
    let mass = SparseMatrix::identity(n).scale(params.mass);
    let stiffness = tridiagonal(n, params.stiffness, boundary);
    let damping = tridiagonal(n, params.damping, boundary);
    let inputs = ports.iter().map(|&d| InputPort::new(format!("f{d}"), d)).collect();
    let outputs = ports
        .iter()
        .map(|&d| OutputPort::displacement(format!("q{d}"), d))
        .collect();
    Ok(SecondOrderSystem::new(mass, damping, stiffness, inputs, outputs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::generalized_symmetric_eigen;
    use nalgebra::DMatrix;

    #[test]
    fn single_mass() {
        let s = make_chain(1, ChainParams::default(), ChainBoundary::FixedFree, &[0]).unwrap();
        assert_eq!(s.mass().to_dense(), DMatrix::from_element(1, 1, 1.0));
        assert_eq!(s.stiffness().to_dense(), DMatrix::from_element(1, 1, 1.0));
    }

    #[test]
    fn two_dof_fixed_free() {
        let s = make_chain(2, ChainParams::default(), ChainBoundary::FixedFree, &[]).unwrap();
        assert_eq!(
            s.stiffness().to_dense(),
            DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 1.0])
        );
    }

    #[test]
    fn free_free_has_one_rigid_mode() {
        let s = make_chain(5, ChainParams::default(), ChainBoundary::FreeFree, &[]).unwrap();
        let basis = generalized_symmetric_eigen(&s.mass().to_dense(), &s.stiffness().to_dense()).unwrap();
        assert_eq!(basis.rigid_modes(1e-10), vec![0]);
        assert!(basis.eigenvalues[1] > 1e-3);
    }

    #[test]
    fn fixed_fixed_ends() {
        let s = make_chain(3, ChainParams::default(), ChainBoundary::FixedFixed, &[]).unwrap();
        let k = s.stiffness().to_dense();
        assert_eq!((k[(0, 0)], k[(1, 1)], k[(2, 2)]), (2.0, 2.0, 2.0));
    }

    #[test]
    fn damping_follows_stiffness_pattern() {
        let p = ChainParams {
            damping: 0.5,
            ..ChainParams::default()
        };
        let s = make_chain(3, p, ChainBoundary::FixedFree, &[0, 2]).unwrap();
        assert_eq!(s.damping().to_dense(), s.stiffness().to_dense() * 0.5);
        assert_eq!(s.input_labels(), ["f0", "f2"]);
    }
}
