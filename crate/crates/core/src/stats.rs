//! Means and standard errors of correlated time series.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    /// `|self − other|` in units of the combined standard error.
    pub fn z_score(&self, other: f64) -> f64 {
        let d = (self.mean - other).abs();
        if self.stderr > 0.0 {
            d / self.stderr
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Naive standard error of the mean of independent values.
pub fn iid_estimate(xs: &[f64]) -> Estimate {
    Estimate {
        mean: mean(xs),
        stderr: (variance(xs) / xs.len().max(1) as f64).sqrt(),
    }
}

/// Smallest number of blocks used by the blocking analysis.
const MIN_BLOCKS: usize = 16;

/// Standard error estimates at successive block sizes `1, 2, 4, …`.
pub fn blocking_levels(xs: &[f64]) -> Vec<f64> {
    let mut level: Vec<f64> = xs.to_vec();
    let mut out = Vec::new();
    while level.len() >= MIN_BLOCKS {
        out.push((variance(&level) / level.len() as f64).sqrt());
        level = level.chunks_exact(2).map(|p| 0.5 * (p[0] + p[1])).collect();
    }
    out
}

/// Mean with a blocking (Flyvbjerg–Petersen) standard error.
///
/// The first level whose successor agrees within the statistical error of
/// the level estimate is taken as the plateau; without a plateau the largest
/// level estimate is used.
pub fn blocking_estimate(xs: &[f64]) -> Estimate {
    let m = mean(xs);
    let levels = blocking_levels(xs);
    if levels.is_empty() {
        return Estimate {
            mean: m,
            stderr: iid_estimate(xs).stderr,
        };
    }
    let mut nblocks = xs.len();
    for w in levels.windows(2) {
        let tol = w[0] / (2.0 * (nblocks as f64 - 1.0)).sqrt();
        if (w[1] - w[0]).abs() <= tol && w[1] >= w[0] * 0.9 {
            return Estimate {
                mean: m,
                stderr: w[1].max(w[0]),
            };
        }
        nblocks /= 2;
    }
    Estimate {
        mean: m,
        stderr: levels.iter().cloned().fold(0.0, f64::max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn basic_moments() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(variance(&[1.0, 2.0, 3.0]), 1.0);
        assert_eq!(variance(&[5.0]), 0.0);
        assert!(mean(&[]).is_nan());
    }

    #[test]
    fn blocking_on_white_noise_matches_iid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..1 << 14).map(|_| rng.random::<f64>()).collect();
        let b = blocking_estimate(&xs);
        let i = iid_estimate(&xs);
        assert!((b.stderr / i.stderr - 1.0).abs() < 0.2);
    }

    #[test]
    fn blocking_sees_autocorrelation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut x = 0.0;
        let xs: Vec<f64> = (0..1 << 15)
            .map(|_| {
                x = 0.95 * x + rng.random::<f64>() - 0.5;
                x
            })
            .collect();
        // τ_int = (1 + ρ)/(1 − ρ) = 39, so the error grows by about √39.
        let ratio = blocking_estimate(&xs).stderr / iid_estimate(&xs).stderr;
        assert!(ratio > 4.0 && ratio < 8.0, "{ratio}");
    }

    #[test]
    fn z_score() {
        let e = Estimate { mean: 1.0, stderr: 0.5 };
        assert_eq!(e.z_score(2.0), 2.0);
        assert_eq!(Estimate { mean: 1.0, stderr: 0.0 }.z_score(1.0), 0.0);
    }
}
