use serde::{Deserialize, Serialize};

use super::MorError;
use crate::lti::{log_space, FrfSweep, LtiError};

/// Frequencies where `|G| < DEFAULT_FLOOR · max_ω |G|` (per entry) are left
/// out of the relative error.
pub const DEFAULT_FLOOR: f64 = 1e-12;
/// Largest admissible relative error.
pub const DEFAULT_THRESHOLD: f64 = 0.1;

/// Worst relative error of one FRF entry at one operating point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryError {
    pub op: usize,
    pub output: usize,
    pub input: usize,
    pub output_label: String,
    pub input_label: String,
    /// `max_ω |Ĝ − G| / |G|`, zero when no frequency clears the floor.
    pub max_error: f64,
    /// Frequency (rad/s) of the maximum, `None` when nothing was evaluated.
    pub omega_at_max: Option<f64>,
    /// Number of grid frequencies above the floor.
    pub evaluated: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub entries: Vec<EntryError>,
}

impl ErrorReport {
    /// Concatenates per-point reports, numbering them in order.
    pub fn combine(reports: impl IntoIterator<Item = ErrorReport>) -> Self {
        let entries = reports
            .into_iter()
            .enumerate()
            .flat_map(|(op, r)| r.entries.into_iter().map(move |e| EntryError { op, ..e }))
            .collect();
        Self { entries }
    }

    pub fn max_error(&self) -> f64 {
        self.entries.iter().map(|e| e.max_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&EntryError> {
        self.entries.iter().max_by(|a, b| a.max_error.total_cmp(&b.max_error))
    }

    /// Strict comparison: an error equal to the threshold fails.
    pub fn passes(&self, threshold: f64) -> bool {
        self.max_error() < threshold
    }
}

/// Relative FRF error of `reduced` against `full` for the given
/// `(output, input)` entries, or all entries when `entries` is `None`.
pub fn relative_error(
    full: &FrfSweep,
    reduced: &FrfSweep,
    entries: Option<&[(usize, usize)]>,
    floor: f64,
) -> Result<ErrorReport, MorError> {
    if full.frequencies() != reduced.frequencies() {
        return Err(MorError::GridMismatch);
    }
    let (p, m) = (full.n_outputs(), full.n_inputs());
    if (reduced.n_outputs(), reduced.n_inputs()) != (p, m) {
        return Err(MorError::Lti(LtiError::Dimension(format!(
            "full response is {p}x{m}, reduced is {}x{}",
            reduced.n_outputs(),
            reduced.n_inputs()
        ))));
    }
    let all: Vec<(usize, usize)>;
    let entries = match entries {
        Some(e) => e,
        None => {
            all = (0..p).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
            &all
        }
    };
    let mut out = Vec::with_capacity(entries.len());
    for &(i, j) in entries {
        if i >= p || j >= m {
            return Err(MorError::EntryOutOfRange {
                output: i,
                input: j,
                p,
                m,
            });
        }
        let peak = full.data().iter().map(|g| g[(i, j)].norm()).fold(0.0, f64::max);
        let cutoff = floor * peak;
        let mut worst = (0.0, None);
        let mut evaluated = 0;
        for (k, (g, gr)) in full.data().iter().zip(reduced.data()).enumerate() {
            let mag = g[(i, j)].norm();
            if mag == 0.0 || mag < cutoff {
                continue;
            }
            evaluated += 1;
            let e = (gr[(i, j)] - g[(i, j)]).norm() / mag;
            if !e.is_finite() {
                return Err(MorError::Lti(LtiError::NonFinite {
                    omega: full.frequencies()[k],
                }));
            }
            if worst.1.is_none() || e > worst.0 {
                worst = (e, Some(full.frequencies()[k]));
            }
        }
        out.push(EntryError {
            op: 0,
            output: i,
            input: j,
            output_label: full.output_labels()[i].clone(),
            input_label: full.input_labels()[j].clone(),
            max_error: worst.0,
            omega_at_max: worst.1,
            evaluated,
        });
    }
    Ok(ErrorReport { entries: out })
}

/// `count` log-spaced frequencies (rad/s) on `[omega_min, omega_max]`.
pub fn verification_grid(omega_min: f64, omega_max: f64, count: usize) -> Vec<f64> {
    log_space(omega_min, omega_max, count)
}

/// Splits the grid intervals on both sides of every local maximum of
/// `max_ij |G_ij|` into four, so sharp resonance peaks are sampled closer to
/// their true height.
pub fn refine_around_resonances(grid: &[f64], response: &FrfSweep) -> Result<Vec<f64>, MorError> {
    if response.frequencies() != grid {
        return Err(MorError::GridMismatch);
    }
    let mags: Vec<f64> = response.data().iter().map(|g| g.iter().map(|v| v.norm()).fold(0.0, f64::max)).collect();
    let mut out = grid.to_vec();
    for k in 1..grid.len().saturating_sub(1) {
        if mags[k] > mags[k - 1] && mags[k] >= mags[k + 1] {
            for (a, b) in [(grid[k - 1], grid[k]), (grid[k], grid[k + 1])] {
                out.extend(subdivide(a, b, 4));
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

/// Interior points splitting `[a, b]` into `parts` pieces, log-spaced when
/// both ends are positive.
fn subdivide(a: f64, b: f64, parts: usize) -> impl Iterator<Item = f64> {
    (1..parts).map(move |i| {
        let t = i as f64 / parts as f64;
        if a > 0.0 {
            (a.ln() + t * (b.ln() - a.ln())).exp()
        } else {
            a + t * (b - a)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    fn sweep(values: &[Complex64]) -> FrfSweep {
        let freqs = (1..=values.len()).map(|k| k as f64).collect();
        let data = values.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect();
        FrfSweep::new(freqs, data, vec!["u".into()], vec!["y".into()]).unwrap()
    }

    fn scaled(values: &[Complex64], s: f64) -> FrfSweep {
        sweep(&values.iter().map(|v| v * s).collect::<Vec<_>>())
    }

    const G: [Complex64; 3] = [Complex64::new(1.0, 0.5), Complex64::new(-2.0, 0.1), Complex64::new(0.0, 3.0)];

    #[test]
    fn identical_responses() {
        let r = relative_error(&sweep(&G), &sweep(&G), None, DEFAULT_FLOOR).unwrap();
        assert_eq!(r.max_error(), 0.0);
        assert!(r.passes(DEFAULT_THRESHOLD));
    }

    #[test]
    fn uniform_scaling() {
        let r = relative_error(&sweep(&G), &scaled(&G, 1.05), None, DEFAULT_FLOOR).unwrap();
        assert!((r.max_error() - 0.05).abs() < 1e-12);
        assert!(r.passes(0.1));
        let r = relative_error(&sweep(&G), &scaled(&G, 1.2), None, DEFAULT_FLOOR).unwrap();
        assert!((r.max_error() - 0.2).abs() < 1e-12);
        assert!(!r.passes(0.1));
    }

    #[test]
    fn floor_skips_tiny_values() {
        let full = [Complex64::new(1.0, 0.0), Complex64::new(1e-14, 0.0)];
        let red = [Complex64::new(1.0, 0.0), Complex64::new(1e-3, 0.0)];
        let r = relative_error(&sweep(&full), &sweep(&red), None, DEFAULT_FLOOR).unwrap();
        assert_eq!(r.max_error(), 0.0);
        assert_eq!(r.entries[0].evaluated, 1);
    }

    #[test]
    fn grid_mismatch() {
        let a = sweep(&G);
        let b = FrfSweep::new(vec![1.0, 2.0, 4.0], a.data().to_vec(), vec!["u".into()], vec!["y".into()]).unwrap();
        assert!(matches!(
            relative_error(&a, &b, None, DEFAULT_FLOOR),
            Err(MorError::GridMismatch)
        ));
    }

    #[test]
    fn bad_entry() {
        assert!(matches!(
            relative_error(&sweep(&G), &sweep(&G), Some(&[(0, 1)]), DEFAULT_FLOOR),
            Err(MorError::EntryOutOfRange { .. })
        ));
    }

    #[test]
    fn combine_numbers_points() {
        let r = relative_error(&sweep(&G), &scaled(&G, 1.05), None, DEFAULT_FLOOR).unwrap();
        let all = ErrorReport::combine([r.clone(), r]);
        assert_eq!(all.entries.iter().map(|e| e.op).collect::<Vec<_>>(), [0, 1]);
    }

    #[test]
    fn refinement_adds_points_at_peak() {
        let vals = [1.0, 5.0, 1.0, 0.5].map(|v| Complex64::new(v, 0.0));
        let s = sweep(&vals);
        let refined = refine_around_resonances(s.frequencies(), &s).unwrap();
        assert_eq!(refined.len(), 4 + 6);
        assert!(refined.windows(2).all(|w| w[0] < w[1]));
    }
}
