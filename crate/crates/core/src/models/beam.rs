use super::ModelError;
use crate::sparse::SparseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BeamSupport {
    Free,
    /// Clamped at `x = 0`, free at the tip.
    Cantilever,
    ClampedClamped,
}

/// Uniform Euler–Bernoulli beam with two DOFs per node (transverse
/// deflection `w`, rotation `θ`) and consistent mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamSpec {
    pub length: f64,
    pub n_elements: usize,
    /// Bending stiffness `EI` (N·m²).
    pub bending_stiffness: f64,
    /// Mass per unit length `ρA` (kg/m).
    pub mass_per_length: f64,
    pub support: BeamSupport,
}

/// Assembled beam matrices with clamped DOFs removed.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamStage {
    pub mass: SparseMatrix,
    pub stiffness: SparseMatrix,
    pub node_coordinates: Vec<f64>,
    /// Reduced DOF index of `(w, θ)` per node, `None` where clamped.
    dofs: Vec<[Option<usize>; 2]>,
}

impl BeamStage {
    pub fn n_dof(&self) -> usize {
        self.mass.nrows()
    }

    pub fn transverse_dof(&self, node: usize) -> Option<usize> {
        self.dofs.get(node).and_then(|d| d[0])
    }

    /// Node whose coordinate is within `tol` of `x`.
    pub fn node_at(&self, x: f64, tol: f64) -> Option<usize> {
        self.node_coordinates.iter().position(|&c| (c - x).abs() <= tol)
    }

    /// Nodes with coordinates in `[lo, hi]` (with tolerance `tol`) that carry a
    /// free transverse DOF.
    pub fn free_nodes_in(&self, lo: f64, hi: f64, tol: f64) -> Vec<usize> {
        (0..self.node_coordinates.len())
            .filter(|&i| {
                let c = self.node_coordinates[i];
                c >= lo - tol && c <= hi + tol && self.transverse_dof(i).is_some()
            })
            .collect()
    }
}

fn element_matrices(h: f64, ei: f64, rho_a: f64) -> ([[f64; 4]; 4], [[f64; 4]; 4]) {
    let k = ei / (h * h * h);
    let ke = [
        [12.0 * k, 6.0 * h * k, -12.0 * k, 6.0 * h * k],
        [6.0 * h * k, 4.0 * h * h * k, -6.0 * h * k, 2.0 * h * h * k],
        [-12.0 * k, -6.0 * h * k, 12.0 * k, -6.0 * h * k],
        [6.0 * h * k, 2.0 * h * h * k, -6.0 * h * k, 4.0 * h * h * k],
    ];
    let m = rho_a * h / 420.0;
    let me = [
        [156.0 * m, 22.0 * h * m, 54.0 * m, -13.0 * h * m],
        [22.0 * h * m, 4.0 * h * h * m, 13.0 * h * m, -3.0 * h * h * m],
        [54.0 * m, 13.0 * h * m, 156.0 * m, -22.0 * h * m],
        [-13.0 * h * m, -3.0 * h * h * m, -22.0 * h * m, 4.0 * h * h * m],
    ];
    (ke, me)
}

impl BeamSpec {
    pub fn build(&self) -> Result<BeamStage, ModelError> {
        let ok = self.n_elements >= 1
            && self.length > 0.0
            && self.bending_stiffness > 0.0
            && self.mass_per_length > 0.0
            && self.length.is_finite()
            && self.bending_stiffness.is_finite()
            && self.mass_per_length.is_finite();
        if !ok {
            return Err(ModelError::Config(format!("invalid beam {self:?}")));
        }
        let ne = self.n_elements;
        let n_nodes = ne + 1;
        let h = self.length / ne as f64;
        let clamped = |node: usize| match self.support {
            BeamSupport::Free => false,
            BeamSupport::Cantilever => node == 0,
            BeamSupport::ClampedClamped => node == 0 || node == ne,
        };
        let mut next = 0;
        let dofs: Vec<[Option<usize>; 2]> = (0..n_nodes)
            .map(|node| {
                if clamped(node) {
                    [None, None]
                } else {
                    next += 2;
                    [Some(next - 2), Some(next - 1)]
                }
            })
            .collect();
        let n = next;
        let (ke, me) = element_matrices(h, self.bending_stiffness, self.mass_per_length);
        let (mut kt, mut mt) = (Vec::new(), Vec::new());
        for e in 0..ne {
            let map = [dofs[e][0], dofs[e][1], dofs[e + 1][0], dofs[e + 1][1]];
            for a in 0..4 {
                for b in 0..4 {
                    if let (Some(i), Some(j)) = (map[a], map[b]) {
                        kt.push((i, j, ke[a][b]));
                        mt.push((i, j, me[a][b]));
                    }
                }
            }
        }
        let node_coordinates = (0..n_nodes)
            .map(|i| self.length * i as f64 / ne as f64)
            .collect();
        Ok(BeamStage {
            mass: SparseMatrix::from_triplets(n, n, mt),
            stiffness: SparseMatrix::from_triplets(n, n, kt),
            node_coordinates,
            dofs,
        })
    }
}
