use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::{InterconnectError, InterconnectionMatrix};
use crate::linalg::{solve_with_rcond, to_complex};
use crate::lti::FrfSweep;

/// Reciprocal condition of `I − K11·G_b` below which a warning is logged.
pub const RCOND_WARN: f64 = 1e-10;
/// Reciprocal condition below which assembly fails.
pub const RCOND_ERROR: f64 = 1e-14;

/// `G_c(iω) = K21 G_b (I − K11 G_b)⁻¹ K12 + K22` at every grid frequency.
pub fn lft_assemble(gb: &FrfSweep, k: &InterconnectionMatrix) -> Result<FrfSweep, InterconnectError> {
    if gb.n_inputs() != k.m_b() || gb.n_outputs() != k.p_b() {
        return Err(InterconnectError::Dimension(format!(
            "G_b is {}x{}, K11 is {}x{}",
            gb.n_outputs(),
            gb.n_inputs(),
            k.m_b(),
            k.p_b()
        )));
    }
    // Only inputs driven by K11/K12 and outputs read by K11/K21 take part;
    // restricting G_b to them gives the same closed loop at lower cost.
    let mut rows: Vec<usize> = k.k11().triplets().chain(k.k12().triplets()).filter(|t| t.2 != 0.0).map(|t| t.0).collect();
    let mut cols: Vec<usize> = k.k11().triplets().filter(|t| t.2 != 0.0).map(|t| t.1).collect();
    cols.extend(k.k21().triplets().filter(|t| t.2 != 0.0).map(|t| t.1));
    rows.sort_unstable();
    rows.dedup();
    cols.sort_unstable();
    cols.dedup();
    let local = |set: &[usize], i: usize| set.binary_search(&i).expect("index collected above");
    let k11: Vec<_> = k
        .k11()
        .triplets()
        .filter(|t| t.2 != 0.0)
        .map(|(i, j, v)| (local(&rows, i), local(&cols, j), v))
        .collect();
    let k21: Vec<_> = k
        .k21()
        .triplets()
        .filter(|t| t.2 != 0.0)
        .map(|(i, j, v)| (i, local(&cols, j), v))
        .collect();
    let k12_dense = to_complex(&k.k12().to_dense());
    let k12 = DMatrix::from_fn(rows.len(), k.m_c(), |r, c| k12_dense[(rows[r], c)]);
    let k22 = to_complex(&k.k22().to_dense());
    let n_r = rows.len();

    let data = gb
        .frequencies()
        .par_iter()
        .zip(gb.data().par_iter())
        .map(|(&omega, g)| -> Result<DMatrix<Complex64>, InterconnectError> {
            let g_cr = DMatrix::from_fn(cols.len(), n_r, |c, r| g[(cols[c], rows[r])]);
            let z = if k11.is_empty() {
                k12.clone()
            } else {
                let mut feedback = DMatrix::<Complex64>::identity(n_r, n_r);
                for &(i, j, v) in &k11 {
                    for c in 0..n_r {
                        feedback[(i, c)] -= g_cr[(j, c)] * v;
                    }
                }
                let (z, rcond) = solve_with_rcond(&feedback, &k12)
                    .ok_or(InterconnectError::SingularFeedback { omega, rcond: 0.0 })?;
                if rcond < RCOND_ERROR {
                    return Err(InterconnectError::SingularFeedback { omega, rcond });
                }
                if rcond < RCOND_WARN {
                    log::warn!("ill-conditioned LFT feedback at ω = {omega}: rcond = {rcond:.3e}");
                }
                z
            };
            let gz = g_cr * z;
            let mut out = k22.clone();
            for &(i, j, v) in &k21 {
                for c in 0..out.ncols() {
                    out[(i, c)] += gz[(j, c)] * v;
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(FrfSweep::new(
        gb.frequencies().to_vec(),
        data,
        k.external_inputs().to_vec(),
        k.external_outputs().to_vec(),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseMatrix;

    fn sweep(values: &[f64]) -> FrfSweep {
        let data = values
            .iter()
            .map(|&v| DMatrix::from_element(1, 1, Complex64::new(v, 0.0)))
            .collect();
        FrfSweep::new(
            (1..=values.len()).map(|k| k as f64).collect(),
            data,
            vec!["u".into()],
            vec!["y".into()],
        )
        .unwrap()
    }

    #[test]
    fn open_loop_returns_block_response() {
        let gb = sweep(&[0.5, -2.0]);
        let k = InterconnectionMatrix::new(
            SparseMatrix::zeros(1, 1),
            SparseMatrix::identity(1),
            SparseMatrix::identity(1),
            SparseMatrix::zeros(1, 1),
        )
        .unwrap();
        let gc = lft_assemble(&gb, &k).unwrap();
        assert_eq!(gc.data(), gb.data());
    }

    #[test]
    fn pure_feedthrough() {
        let gb = sweep(&[0.5, -2.0]);
        let k = InterconnectionMatrix::new(
            SparseMatrix::identity(1),
            SparseMatrix::identity(1),
            SparseMatrix::zeros(1, 1),
            SparseMatrix::identity(1),
        )
        .unwrap();
        let gc = lft_assemble(&gb, &k).unwrap();
        for g in gc.data() {
            assert_eq!(g[(0, 0)], Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn scalar_feedback_loop() {
        // g / (1 − k g)
        let gb = sweep(&[0.5]);
        let k = InterconnectionMatrix::new(
            SparseMatrix::from_triplets(1, 1, [(0, 0, -1.0)]),
            SparseMatrix::identity(1),
            SparseMatrix::identity(1),
            SparseMatrix::zeros(1, 1),
        )
        .unwrap();
        let gc = lft_assemble(&gb, &k).unwrap();
        assert!((gc.at(0)[(0, 0)].re - 0.5 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn singular_feedback_names_frequency() {
        // 1 − k g = 0 at the second frequency
        let gb = sweep(&[0.5, 2.0]);
        let k = InterconnectionMatrix::new(
            SparseMatrix::from_triplets(1, 1, [(0, 0, 0.5)]),
            SparseMatrix::identity(1),
            SparseMatrix::identity(1),
            SparseMatrix::zeros(1, 1),
        )
        .unwrap();
        match lft_assemble(&gb, &k).unwrap_err() {
            InterconnectError::SingularFeedback { omega, rcond } => {
                assert_eq!(omega, 2.0);
                assert!(rcond < RCOND_ERROR);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
