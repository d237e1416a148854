//! Synthetic data generators and studies with known tail behaviour.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::estimators::kurtosis;
use crate::rng::RunRng;
use crate::{Error, Result};

/// Symmetric α-stable variate (β = 0, unit scale) by the
/// Chambers–Mallows–Stuck transform. α = 1 is standard Cauchy, α = 2 is
/// N(0, 2).
pub fn symmetric_stable(alpha: f64, rng: &mut RunRng) -> f64 {
    let v = FRAC_PI_2 * (2.0 * rng.uniform_open0() - 1.0);
    let w = -rng.uniform_open0().ln();
    if (alpha - 1.0).abs() < 1e-12 {
        return v.tan();
    }
    let a = (alpha * v).sin() / v.cos().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha);
    a * b
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinateLaw {
    /// Classical Pareto with unit scale and the given shape.
    Pareto,
    Gaussian,
}

/// κ^{1/4} of the Euclidean norms of `count` vectors of dimension `dim`
/// with i.i.d. coordinates.
pub fn norm_kurtosis(law: CoordinateLaw, shape: f64, dim: usize, count: usize, rng: &mut RunRng) -> Result<f64> {
    if law == CoordinateLaw::Pareto && !(shape > 0.0) {
        return Err(Error::InvalidArgument(format!("Pareto shape must be positive, got {shape}")));
    }
    let norms: Vec<f64> = (0..count)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let x = match law {
                        CoordinateLaw::Pareto => rng.pareto(shape),
                        CoordinateLaw::Gaussian => rng.normal(),
                    };
                    x * x
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    kurtosis(&norms)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KurtosisStudyRow {
    pub law: CoordinateLaw,
    pub shape: f64,
    pub size: usize,
    /// Per-seed κ^{1/4}, in seed order.
    pub per_seed: Vec<f64>,
    pub mean: f64,
}

/// Norm-kurtosis table over `sizes` for one coordinate law, one row per size.
/// Seed `s` uses stream `s` of the base seed so each seed's draws are
/// independent of the other sizes.
pub fn synth_pareto_study(
    law: CoordinateLaw,
    shape: f64,
    dim: usize,
    sizes: &[usize],
    seeds: &[u64],
) -> Result<Vec<KurtosisStudyRow>> {
    if seeds.is_empty() {
        return Err(Error::Empty("seeds"));
    }
    sizes
        .iter()
        .map(|&size| {
            let per_seed = seeds
                .iter()
                .map(|&s| {
                    let mut rng = RunRng::with_stream(s, size as u64);
                    norm_kurtosis(law, shape, dim, size, &mut rng)
                })
                .collect::<Result<Vec<_>>>()?;
            let mean = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
            Ok(KurtosisStudyRow {
                law,
                shape,
                size,
                per_seed,
                mean,
            })
        })
        .collect()
}

/// Target N(0, σ1²) against sampling density N(0, σ2²).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioTailSpec {
    pub sigma1: f64,
    pub sigma2: f64,
}

impl RatioTailSpec {
    pub fn new(sigma1: f64, sigma2: f64) -> Result<Self> {
        if !(sigma1 > 0.0 && sigma2 > 0.0 && sigma1.is_finite() && sigma2.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "ratio tail scales must be positive and finite, got {sigma1}, {sigma2}"
            )));
        }
        Ok(Self { sigma1, sigma2 })
    }

    /// σ1²/(σ1² − σ2²) when σ1 > σ2, infinite otherwise (ρ bounded).
    pub fn predicted_tail_index(&self) -> f64 {
        let (a, b) = (self.sigma1 * self.sigma1, self.sigma2 * self.sigma2);
        if self.sigma1 > self.sigma2 {
            a / (a - b)
        } else {
            f64::INFINITY
        }
    }

    /// Upper bound σ2/σ1 on ρ when σ1 ≤ σ2.
    pub fn ratio_bound(&self) -> Option<f64> {
        (self.sigma1 <= self.sigma2).then(|| self.sigma2 / self.sigma1)
    }

    pub fn ratio(&self, x: f64) -> f64 {
        let (a, b) = (self.sigma1 * self.sigma1, self.sigma2 * self.sigma2);
        (self.sigma2 / self.sigma1) * (-0.5 * x * x * (1.0 / a - 1.0 / b)).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioTailOutcome {
    pub spec: RatioTailSpec,
    pub samples: usize,
    pub predicted_alpha: f64,
    /// −slope of log survival vs log ρ over the top 1%; absent when ρ is bounded.
    pub empirical_alpha: Option<f64>,
    pub max_ratio: f64,
    pub bound_violations: usize,
}

pub const MIN_RATIO_TAIL_SAMPLES: usize = 10_000;

/// Draws `n` samples from the sampling density and examines the tail of the
/// likelihood ratio.
pub fn ratio_tail_demo(spec: RatioTailSpec, n: usize, seed: u64) -> Result<RatioTailOutcome> {
    if n < MIN_RATIO_TAIL_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "ratio tail demo needs at least {MIN_RATIO_TAIL_SAMPLES} samples, got {n}"
        )));
    }
    let mut rng = RunRng::new(seed);
    let mut ratios: Vec<f64> = (0..n).map(|_| spec.ratio(spec.sigma2 * rng.normal())).collect();
    let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let predicted_alpha = spec.predicted_tail_index();
    let (empirical_alpha, bound_violations) = match spec.ratio_bound() {
        Some(bound) => (None, ratios.iter().filter(|&&r| r > bound + 1e-9).count()),
        None => {
            ratios.sort_by(|a, b| b.total_cmp(a));
            let k = n / 100;
            let nf = n as f64;
            let xs: Vec<f64> = ratios[..k].iter().map(|r| r.ln()).collect();
            let ys: Vec<f64> = (1..=k).map(|i| (i as f64 / nf).ln()).collect();
            (Some(-least_squares_slope(&xs, &ys)), 0)
        }
    };
    Ok(RatioTailOutcome {
        spec,
        samples: n,
        predicted_alpha,
        empirical_alpha,
        max_ratio,
        bound_violations,
    })
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_alpha_two_has_variance_two() {
        let mut rng = RunRng::new(3);
        let x: Vec<f64> = (0..50_000).map(|_| symmetric_stable(2.0, &mut rng)).collect();
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((var - 2.0).abs() < 0.06, "{var}");
    }

    #[test]
    fn stable_cauchy_quartiles() {
        let mut rng = RunRng::new(4);
        let mut x: Vec<f64> = (0..40_000).map(|_| symmetric_stable(1.0, &mut rng)).collect();
        x.sort_by(f64::total_cmp);
        let q3 = x[30_000];
        assert!((q3 - 1.0).abs() < 0.05, "{q3}");
    }

    #[test]
    fn identical_densities_give_unit_ratio() {
        let spec = RatioTailSpec::new(1.3, 1.3).unwrap();
        let out = ratio_tail_demo(spec, 10_000, 1).unwrap();
        assert_eq!(out.max_ratio, 1.0);
        assert_eq!(out.bound_violations, 0);
        assert!(out.predicted_alpha.is_infinite());
    }

    #[test]
    fn narrower_target_is_bounded() {
        let spec = RatioTailSpec::new(0.5, 1.0).unwrap();
        let out = ratio_tail_demo(spec, 100_000, 2).unwrap();
        assert_eq!(out.bound_violations, 0);
        assert!(out.max_ratio <= 2.0 + 1e-12);
    }

    #[test]
    fn predicted_index_formula() {
        let spec = RatioTailSpec::new(2f64.sqrt(), 1.0).unwrap();
        assert!((spec.predicted_tail_index() - 2.0).abs() < 1e-12);
        assert!(RatioTailSpec::new(0.0, 1.0).is_err());
        assert!(ratio_tail_demo(spec, 9_999, 0).is_err());
    }

    #[test]
    fn gaussian_norms_are_flat() {
        let rows = synth_pareto_study(CoordinateLaw::Gaussian, 0.0, 100, &[100, 1000, 10_000], &[1, 2, 3]).unwrap();
        for r in &rows {
            assert!((r.mean - 1.316).abs() < 0.1, "{r:?}");
        }
    }
}
