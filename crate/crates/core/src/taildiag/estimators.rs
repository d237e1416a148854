//! Kurtosis, alpha-index and Anderson–Darling random-projection estimators.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::rng::RunRng;
use crate::{Error, Result};

/// κ^{1/4} of a standard normal: 3^{1/4}.
pub const GAUSSIAN_KURTOSIS_ROOT: f64 = 1.316_074_012_952_492_4;

/// Fourth standardised moment with population moments, returned as κ^{1/4}.
pub fn kurtosis(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 4 {
        return Err(Error::InvalidArgument(format!("kurtosis needs at least 4 samples, got {n}")));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let (mut m2, mut m4) = (0.0, 0.0);
    for x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m4 /= nf;
    let scale = samples.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if !(m2 > 0.0) || m2.sqrt() <= 1e-12 * scale {
        return Err(Error::InvalidArgument("kurtosis of zero-variance sample".into()));
    }
    if !m4.is_finite() || !m2.is_finite() {
        return Err(Error::NonFinite("kurtosis moments".into()));
    }
    Ok((m4 / (m2 * m2)).powf(0.25))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaIndex {
    pub alpha: f64,
    /// Block length m.
    pub block_size: usize,
    /// Number of blocks n (N = m·n samples were used).
    pub blocks: usize,
    /// Samples (X or Y) whose |·| was raised to the log-safety floor.
    pub floored: usize,
}

/// Floor applied to |X| before taking logs.
pub const LOG_FLOOR: f64 = 1e-300;

/// Largest divisor m of `n` with m ≤ √n.
pub fn default_block_size(n: usize) -> usize {
    let mut best = 1;
    let mut m = 1;
    while m * m <= n {
        if n.is_multiple_of(m) {
            best = m;
        }
        m += 1;
    }
    best
}

/// Block-sum estimator for symmetric α-stable data:
/// 1/α̂ = (mean log|Y| − mean log|X|)/log m, with Y_i the sums of m consecutive
/// X's. Samples beyond the last full block are ignored.
pub fn alpha_index(samples: &[f64], block_size: usize) -> Result<AlphaIndex> {
    let m = block_size;
    if m < 2 {
        return Err(Error::InvalidArgument("alpha-index block size must be at least 2".into()));
    }
    let blocks = samples.len() / m;
    if blocks < 2 {
        return Err(Error::InvalidArgument(format!(
            "alpha-index needs at least two blocks of {m}, got {} samples",
            samples.len()
        )));
    }
    let used = &samples[..blocks * m];
    let mut floored = 0;
    let mut safe_log = |x: f64| {
        let a = x.abs();
        if a < LOG_FLOOR {
            floored += 1;
            LOG_FLOOR.ln()
        } else {
            a.ln()
        }
    };
    let mean_log_x = used.iter().map(|&x| safe_log(x)).sum::<f64>() / used.len() as f64;
    let mean_log_y = used
        .chunks_exact(m)
        .map(|c| safe_log(c.iter().sum::<f64>()))
        .sum::<f64>()
        / blocks as f64;
    let inv_alpha = (mean_log_y - mean_log_x) / (m as f64).ln();
    Ok(AlphaIndex {
        alpha: 1.0 / inv_alpha,
        block_size: m,
        blocks,
        floored,
    })
}

/// [`alpha_index`] with [`default_block_size`]. A sample count whose only
/// divisor ≤ √N is 1 (a prime) drops its last sample first.
pub fn alpha_index_default(samples: &[f64]) -> Result<AlphaIndex> {
    let mut n = samples.len();
    let mut m = default_block_size(n);
    if m < 2 && n > 4 {
        n -= 1;
        m = default_block_size(n);
    }
    alpha_index(&samples[..n], m)
}

/// Critical values of the modified statistic A*² = A²(1 + 0.75/n + 2.25/n²)
/// for the normal case with mean and variance estimated, keyed by significance
/// level.
pub const AD_CRITICAL_VALUES: [(f64, f64); 5] = [
    (0.15, 0.576),
    (0.10, 0.656),
    (0.05, 0.752),
    (0.025, 0.873),
    (0.01, 1.035),
];

pub const AD_SIGNIFICANCE: f64 = 0.05;

pub fn ad_critical_value(significance: f64) -> Result<f64> {
    AD_CRITICAL_VALUES
        .iter()
        .find(|(s, _)| (s - significance).abs() < 1e-12)
        .map(|(_, c)| *c)
        .ok_or_else(|| Error::InvalidArgument(format!("no AD critical value for level {significance}")))
}

/// Modified Anderson–Darling statistic A*² against a normal with estimated
/// mean and variance; `None` for zero variance.
pub fn anderson_darling(samples: &[f64]) -> Option<f64> {
    let n = samples.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let scale = samples.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if !(var > 0.0) || var.sqrt() <= 1e-12 * scale {
        return None;
    }
    let sd = var.sqrt();
    let mut z: Vec<f64> = samples.iter().map(|x| (x - mean) / sd).collect();
    z.sort_by(|a, b| a.total_cmp(b));
    // ln Φ(z) = ln(½ erfc(−z/√2)), ln(1 − Φ(z)) = ln(½ erfc(z/√2))
    let ln_cdf = |z: f64| (0.5 * erfc(-z / std::f64::consts::SQRT_2)).max(f64::MIN_POSITIVE).ln();
    let ln_sf = |z: f64| (0.5 * erfc(z / std::f64::consts::SQRT_2)).max(f64::MIN_POSITIVE).ln();
    let mut s = 0.0;
    for i in 0..n {
        let k = (2 * i + 1) as f64;
        s += k * (ln_cdf(z[i]) + ln_sf(z[n - 1 - i]));
    }
    let a2 = -nf - s / nf;
    Some(a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf)))
}

/// Result of the random-projection Gaussianity test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdFraction {
    pub fraction: f64,
    pub accepted: usize,
    pub tested: usize,
    /// Directions whose projection had zero variance.
    pub skipped: usize,
}

/// Projects the centred rows of `matrix` (`n_samples × dim`, row-major) onto
/// `n_dirs` uniformly random unit vectors and returns the fraction of
/// projections accepted as normal at the 5% level.
pub fn ad_fraction(matrix: &[f64], n_samples: usize, dim: usize, n_dirs: usize, rng: &mut RunRng) -> Result<AdFraction> {
    crate::error::check_len("ad_fraction matrix", n_samples * dim, matrix.len())?;
    if n_samples < 8 {
        return Err(Error::InvalidArgument(format!("ad_fraction needs at least 8 samples, got {n_samples}")));
    }
    if dim == 0 || n_dirs == 0 {
        return Err(Error::InvalidArgument("ad_fraction needs dim > 0 and n_dirs > 0".into()));
    }
    let crit = ad_critical_value(AD_SIGNIFICANCE)?;
    let mut mean = vec![0.0; dim];
    for row in matrix.chunks_exact(dim) {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n_samples as f64);

    let mut dir = vec![0.0; dim];
    let mut proj = vec![0.0; n_samples];
    let (mut accepted, mut tested, mut skipped) = (0, 0, 0);
    for _ in 0..n_dirs {
        let mut norm = 0.0;
        for d in dir.iter_mut() {
            *d = rng.normal();
            norm += *d * *d;
        }
        let norm = norm.sqrt();
        dir.iter_mut().for_each(|d| *d /= norm);
        for (p, row) in proj.iter_mut().zip(matrix.chunks_exact(dim)) {
            *p = row.iter().zip(&mean).zip(&dir).map(|((x, m), u)| (x - m) * u).sum();
        }
        match anderson_darling(&proj) {
            Some(a) => {
                tested += 1;
                if a < crit {
                    accepted += 1;
                }
            }
            None => skipped += 1,
        }
    }
    let fraction = if tested == 0 { 0.0 } else { accepted as f64 / tested as f64 };
    Ok(AdFraction {
        fraction,
        accepted,
        tested,
        skipped,
    })
}
