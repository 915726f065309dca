//! Dense kernels shared by the modules: the symmetric-definite generalized
//! eigenproblem, shifted Hessenberg solves for frequency sweeps, Lyapunov
//! equations, and complex LU with a condition estimate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("mass matrix is not positive definite (Cholesky failed)")]
    NotPositiveDefinite,
    #[error("matrix is singular")]
    Singular,
    #[error("Schur decomposition did not converge")]
    NoConvergence,
    #[error("Lyapunov operator is singular (eigenvalues λ_i + λ_j ≈ 0)")]
    LyapunovSingular,
}

/// Solution of `K φ = λ M φ` with `Φᵀ M Φ = I`, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct ModalBasis {
    pub eigenvalues: DVector<f64>,
    pub shapes: DMatrix<f64>,
}

impl ModalBasis {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Angular frequency of mode `r`; negative round-off eigenvalues map to 0.
    pub fn omega(&self, r: usize) -> f64 {
        self.eigenvalues[r].max(0.0).sqrt()
    }

    /// Indices of modes with `λ <= rel_tol · max|λ|`.
    pub fn rigid_modes(&self, rel_tol: f64) -> Vec<usize> {
        let scale = self.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        (0..self.len())
            .filter(|&r| self.eigenvalues[r] <= rel_tol * scale)
            .collect()
    }
}

pub fn generalized_symmetric_eigen(
    mass: &DMatrix<f64>,
    stiffness: &DMatrix<f64>,
) -> Result<ModalBasis, LinalgError> {
    let n = mass.nrows();
    if n == 0 {
        return Ok(ModalBasis {
            eigenvalues: DVector::zeros(0),
            shapes: DMatrix::zeros(0, 0),
        });
    }
    let sym_m = symmetrize(mass);
    let chol = sym_m.cholesky().ok_or(LinalgError::NotPositiveDefinite)?;
    let l = chol.l();
    // S = L⁻¹ K L⁻ᵀ
    let linv_k = l
        .solve_lower_triangular(&symmetrize(stiffness))
        .ok_or(LinalgError::Singular)?;
    let s = l
        .solve_lower_triangular(&linv_k.transpose())
        .ok_or(LinalgError::Singular)?;
    let eig = symmetrize(&s).symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let y = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    let shapes = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or(LinalgError::Singular)?;
    Ok(ModalBasis {
        eigenvalues,
        shapes,
    })
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Dot product in twice the working precision (Ogita, Rump and Oishi's
/// `Dot2`), rounded once at the end.
pub fn dot2(a: impl IntoIterator<Item = f64>, b: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut err) = (0.0f64, 0.0f64);
    for (x, y) in a.into_iter().zip(b) {
        let p = x * y;
        let p_err = x.mul_add(y, -p);
        let t = sum + p;
        let z = t - sum;
        err += (sum - (t - z)) + (p - z) + p_err;
        sum = t;
    }
    sum + err
}

/// `A·B` with every entry accumulated by [`dot2`].
pub fn mul_accurate(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.nrows(), "inner dimensions differ");
    DMatrix::from_fn(a.nrows(), b.ncols(), |i, j| {
        dot2(a.row(i).iter().copied(), b.column(j).iter().copied())
    })
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Upper Hessenberg form `A = Q H Qᵀ` for repeated solves of `(sI − A) X = B`
/// at O(n²) per right-hand side instead of a fresh factorization per shift.
#[derive(Clone, Debug)]
pub struct HessenbergForm {
    pub q: DMatrix<f64>,
    pub h: DMatrix<f64>,
    norm: f64,
}

impl HessenbergForm {
    pub fn new(a: &DMatrix<f64>) -> Self {
        let norm = a.abs().row_sum().max();
        if a.nrows() == 0 {
            return Self {
                q: DMatrix::zeros(0, 0),
                h: DMatrix::zeros(0, 0),
                norm,
            };
        }
        let hess = a.clone().hessenberg();
        let (q, h) = hess.unpack();
        Self { q, h, norm }
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    /// Solves `(s·I − H) X = rhs` with rhs given in Hessenberg coordinates.
    /// Returns `None` when a pivot is numerically zero.
    pub fn solve_shifted(&self, s: Complex64, rhs: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
        let n = self.dim();
        let nr = rhs.ncols();
        // row-major working copies
        let mut t = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in i.saturating_sub(1)..n {
                t[i * n + j] = Complex64::new(-self.h[(i, j)], 0.0);
            }
            t[i * n + i] += s;
        }
        let mut x = vec![Complex64::new(0.0, 0.0); n * nr];
        for i in 0..n {
            for c in 0..nr {
                x[i * nr + c] = rhs[(i, c)];
            }
        }
        let tiny = f64::EPSILON * (self.norm + s.norm()).max(f64::MIN_POSITIVE);

        for k in 0..n.saturating_sub(1) {
            if t[(k + 1) * n + k].norm() > t[k * n + k].norm() {
                for j in k..n {
                    t.swap(k * n + j, (k + 1) * n + j);
                }
                for c in 0..nr {
                    x.swap(k * nr + c, (k + 1) * nr + c);
                }
            }
            let piv = t[k * n + k];
            if piv.norm() <= tiny {
                return None;
            }
            let l = t[(k + 1) * n + k] / piv;
            if l.norm() != 0.0 {
                for j in k..n {
                    let v = t[k * n + j];
                    t[(k + 1) * n + j] -= l * v;
                }
                for c in 0..nr {
                    let v = x[k * nr + c];
                    x[(k + 1) * nr + c] -= l * v;
                }
            }
        }
        for i in (0..n).rev() {
            let piv = t[i * n + i];
            if piv.norm() <= tiny {
                return None;
            }
            for j in i + 1..n {
                let tij = t[i * n + j];
                if tij.norm() == 0.0 {
                    continue;
                }
                for c in 0..nr {
                    let v = x[j * nr + c];
                    x[i * nr + c] -= tij * v;
                }
            }
            let inv = piv.inv();
            for c in 0..nr {
                x[i * nr + c] *= inv;
            }
        }
        Some(DMatrix::from_row_slice(n, nr, &x))
    }
}

/// Solves `A X + X Aᵀ + Q = 0` through a complex Schur form of `A`.
///
/// Only requires `λ_i(A) + λ_j(A) ≠ 0`; stability is checked by callers.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let schur = to_complex(a)
        .try_schur(f64::EPSILON, 100 * n.max(10))
        .ok_or(LinalgError::NoConvergence)?;
    let (u, t) = schur.unpack();
    // T Y + Y Tᴴ = −Uᴴ Q U
    let c = -(u.adjoint() * to_complex(q) * &u);
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    let scale = t.iter().fold(0.0f64, |acc, v| acc.max(v.norm()));
    for k in (0..n).rev() {
        let mut rhs: DVector<Complex64> = c.column(k).into_owned();
        for j in k + 1..n {
            let tkj = t[(k, j)].conj();
            if tkj.norm() != 0.0 {
                rhs -= y.column(j) * tkj;
            }
        }
        let shift = t[(k, k)].conj();
        // (T + shift·I) y_k = rhs, back substitution
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for j in i + 1..n {
                acc -= t[(i, j)] * y[(j, k)];
            }
            let d = t[(i, i)] + shift;
            if d.norm() <= 1e2 * f64::EPSILON * scale {
                return Err(LinalgError::LyapunovSingular);
            }
            y[(i, k)] = acc / d;
        }
    }
    let x = &u * y * u.adjoint();
    Ok(symmetrize(&x.map(|v| v.re)))
}

/// Returns a factor `R` with `P ≈ R Rᵀ` for a symmetric positive
/// semidefinite `P`; negative round-off eigenvalues are clipped to zero.
pub fn psd_factor(p: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = symmetrize(p).symmetric_eigen();
    let mut r = eig.eigenvectors.clone();
    for (c, lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        r.column_mut(c).scale_mut(s);
    }
    r
}

/// LU solve of a complex system together with an estimate of the reciprocal
/// 1-norm condition number (Hager–Higham estimator, as in LAPACK `xGECON`).
pub fn solve_with_rcond(
    a: &DMatrix<Complex64>,
    rhs: &DMatrix<Complex64>,
) -> Option<(DMatrix<Complex64>, f64)> {
    let n = a.nrows();
    if n == 0 {
        return Some((DMatrix::zeros(0, rhs.ncols()), 1.0));
    }
    let lu = a.clone().lu();
    let u = lu.u();
    if (0..n).any(|i| u[(i, i)].norm() == 0.0) {
        return None;
    }
    let x = lu.solve(rhs)?;
    if !x.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        return None;
    }
    let norm_a = (0..n)
        .map(|c| a.column(c).iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let inv_norm = inverse_norm1_estimate(&lu, &u);
    let denom = norm_a * inv_norm;
    let rcond = if denom.is_finite() && denom > 0.0 { 1.0 / denom } else { 0.0 };
    Some((x, rcond))
}

type ComplexLu = nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>;

/// Lower bound on `‖A⁻¹‖₁` that is almost always within a small factor.
fn inverse_norm1_estimate(lu: &ComplexLu, u: &DMatrix<Complex64>) -> f64 {
    let n = u.nrows();
    let l = lu.l();
    let p = lu.p();
    // Aᴴ y = b with P A = L U  →  Uᴴ Lᴴ (P y) = b
    let adjoint_solve = |b: &DVector<Complex64>| -> Option<DVector<Complex64>> {
        let z = u.ad_solve_upper_triangular(b)?;
        let mut w = l.ad_solve_lower_triangular(&z)?;
        p.inv_permute_rows(&mut w);
        Some(w)
    };
    let norm1 = |v: &DVector<Complex64>| v.iter().map(|c| c.norm()).sum::<f64>();
    let mut x = DVector::from_element(n, Complex64::new(1.0 / n as f64, 0.0));
    let mut est = 0.0;
    for iter in 0..5 {
        let Some(y) = lu.solve(&x) else {
            return f64::INFINITY;
        };
        let ny = norm1(&y);
        if !ny.is_finite() {
            return f64::INFINITY;
        }
        if iter > 0 && ny <= est {
            break;
        }
        est = ny;
        let xi = y.map(|v| if v.norm() > 0.0 { v / v.norm() } else { Complex64::new(1.0, 0.0) });
        let Some(z) = adjoint_solve(&xi) else {
            return f64::INFINITY;
        };
        let (j, zj) = z
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |acc, (i, v)| if v.norm() > acc.1 { (i, v.norm()) } else { acc });
        if iter > 0 && zj <= z.dotc(&x).re {
            break;
        }
        x.fill(Complex64::new(0.0, 0.0));
        x[j] = Complex64::new(1.0, 0.0);
    }
    // alternative starting vector guards against the estimator's known traps
    let alt = DVector::from_fn(n, |i, _| {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        Complex64::new(sign * (1.0 + t), 0.0)
    });
    if let Some(y) = lu.solve(&alt) {
        est = est.max(2.0 * norm1(&y) / (3.0 * n as f64));
    }
    est
}
