use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencySpacing {
    Log,
    Lin,
}

/// `count` logarithmically spaced points from `min` to `max`, endpoints exact.
pub fn log_space(min: f64, max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![min],
        _ => {
            let (a, b) = (min.ln(), max.ln());
            let step = (b - a) / (count - 1) as f64;
            let mut v: Vec<f64> = (0..count).map(|k| (a + step * k as f64).exp()).collect();
            v[0] = min;
            v[count - 1] = max;
            v
        }
    }
}

pub fn lin_space(min: f64, max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![min],
        _ => {
            let step = (max - min) / (count - 1) as f64;
            let mut v: Vec<f64> = (0..count).map(|k| min + step * k as f64).collect();
            v[count - 1] = max;
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_are_exact() {
        let g = log_space(0.1, 1000.0, 9);
        assert_eq!(g[0], 0.1);
        assert_eq!(g[8], 1000.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!((g[4] - 10.0).abs() < 1e-12);
        assert_eq!(lin_space(-0.02, 0.02, 3), vec![-0.02, 0.0, 0.02]);
    }
}
