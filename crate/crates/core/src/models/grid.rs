use super::ModelError;
use crate::interconnect::OperatingPoint;
use crate::lti::lin_space;

/// Cartesian product of per-interface offset ranges. The first interface
/// varies slowest. A count of one yields the midpoint of its range.
pub fn make_operating_grid(ranges: &[(f64, f64)], counts: &[usize]) -> Result<Vec<OperatingPoint>, ModelError> {
    if ranges.len() != counts.len() {
        return Err(ModelError::Config(format!(
            "{} ranges but {} counts",
            ranges.len(),
            counts.len()
        )));
    }
    let mut axes = Vec::with_capacity(ranges.len());
    for (&(lo, hi), &n) in ranges.iter().zip(counts) {
        if n == 0 || !lo.is_finite() || !hi.is_finite() || hi < lo {
            return Err(ModelError::Config(format!(
                "operating range [{lo}, {hi}] with {n} points"
            )));
        }
        axes.push(if n == 1 {
            vec![0.5 * (lo + hi)]
        } else {
            lin_space(lo, hi, n)
        });
    }
    let mut points = vec![Vec::new()];
    for axis in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    Ok(points.into_iter().map(OperatingPoint::new).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_offsets() {
        let g = make_operating_grid(&[(-0.02, 0.02)], &[3]).unwrap();
        let offsets: Vec<f64> = g.iter().map(|p| p.offsets[0]).collect();
        assert_eq!(offsets, vec![-0.02, 0.0, 0.02]);
    }

    #[test]
    fn single_count_is_midpoint() {
        let g = make_operating_grid(&[(0.0, 0.5)], &[1]).unwrap();
        assert_eq!(g, vec![OperatingPoint::new(vec![0.25])]);
    }

    #[test]
    fn two_interfaces_give_nine_points() {
        let g = make_operating_grid(&[(-0.02, 0.02), (-0.02, 0.02)], &[3, 3]).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g[1].offsets, vec![-0.02, 0.0]);
        assert_eq!(g[3].offsets, vec![0.0, -0.02]);
    }

    #[test]
    fn zero_count_is_rejected() {
        assert!(make_operating_grid(&[(0.0, 1.0)], &[0]).is_err());
    }
}
