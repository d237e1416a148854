//! Generalised advantage estimation, batch normalisation and negative-advantage
//! clipping.

use serde::{Deserialize, Serialize};

use crate::taildiag::kurtosis;
use crate::{Error, Result};

/// Standard deviations below this are treated as degenerate by [`normalize`].
pub const NORMALIZE_MIN_STD: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvantageBatch {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub returns: Vec<f64>,
    pub values: Vec<f64>,
    pub target_values: Vec<f64>,
}

impl AdvantageBatch {
    /// GAE on the trajectory, then batch normalisation. `returns` holds the
    /// discounted Monte-Carlo returns (bootstrapped at the end of the batch).
    pub fn compute(
        rewards: &[f64],
        values_with_bootstrap: &[f64],
        dones: &[bool],
        gamma: f64,
        lambda: f64,
    ) -> Result<Self> {
        let (raw, target_values) = gae(rewards, values_with_bootstrap, dones, gamma, lambda)?;
        let normalized = normalize(&raw)?;
        let returns = discounted_returns(rewards, dones, values_with_bootstrap[rewards.len()], gamma);
        Ok(Self {
            raw,
            normalized,
            returns,
            values: values_with_bootstrap[..rewards.len()].to_vec(),
            target_values,
        })
    }
}

/// Returns (advantages, value targets). `values` carries the bootstrap value
/// V(s_T) as its last element.
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let t = rewards.len();
    crate::error::check_len("gae values (T+1)", t + 1, values.len())?;
    crate::error::check_len("gae dones", t, dones.len())?;
    if !(0.0..=1.0).contains(&gamma) || !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("gamma={gamma}, lambda={lambda}")));
    }
    let mut adv = vec![0.0; t];
    let mut next = 0.0;
    for i in (0..t).rev() {
        let live = if dones[i] { 0.0 } else { 1.0 };
        let delta = rewards[i] + gamma * values[i + 1] * live - values[i];
        next = delta + gamma * lambda * live * next;
        adv[i] = next;
    }
    let targets = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, targets))
}

/// Discounted reward-to-go, cut at episode ends and bootstrapped after the
/// last step.
pub fn discounted_returns(rewards: &[f64], dones: &[bool], bootstrap: f64, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = bootstrap;
    for i in (0..rewards.len()).rev() {
        if dones[i] {
            acc = 0.0;
        }
        acc = rewards[i] + gamma * acc;
        out[i] = acc;
    }
    out
}

/// (A − mean)/std with the population standard deviation; zeros when the
/// spread is degenerate.
pub fn normalize(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.len() < 2 {
        return Err(Error::InvalidArgument("normalize needs at least two values".into()));
    }
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let var = raw.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std >= NORMALIZE_MIN_STD) {
        return Ok(vec![0.0; raw.len()]);
    }
    Ok(raw.iter().map(|a| (a - mean) / std).collect())
}

/// Floors advantages at `lower_threshold`; positive advantages are untouched.
pub fn clip_advantages(adv: &[f64], lower_threshold: f64) -> Result<Vec<f64>> {
    if !(lower_threshold < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "advantage clip threshold must be negative, got {lower_threshold}"
        )));
    }
    Ok(adv.iter().map(|&a| a.max(lower_threshold)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHistogram {
    /// Bin edges over log|A|, shared by both sign groups.
    pub edges: Vec<f64>,
    pub negative: Vec<usize>,
    pub positive: Vec<usize>,
}

/// Tail statistics of advantages split by sign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupedTailStats {
    pub negative_count: usize,
    pub positive_count: usize,
    /// κ^{1/4} of the negative advantages; `None` when the group is absent or
    /// too small.
    pub negative_kurtosis: Option<f64>,
    pub positive_kurtosis: Option<f64>,
    pub histogram: LogHistogram,
}

pub const HISTOGRAM_BINS: usize = 20;

pub fn grouped_tail_stats(raw: &[f64]) -> GroupedTailStats {
    let neg: Vec<f64> = raw.iter().copied().filter(|a| *a < 0.0).collect();
    let pos: Vec<f64> = raw.iter().copied().filter(|a| *a > 0.0).collect();
    let logs: Vec<f64> = raw.iter().filter(|a| **a != 0.0).map(|a| a.abs().ln()).collect();
    let (lo, hi) = logs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    let edges: Vec<f64> = if logs.is_empty() {
        Vec::new()
    } else {
        let width = if hi > lo { (hi - lo) / HISTOGRAM_BINS as f64 } else { 1.0 };
        (0..=HISTOGRAM_BINS).map(|k| lo + width * k as f64).collect()
    };
    let bin = |x: f64| -> usize {
        let width = edges[1] - edges[0];
        (((x.abs().ln() - lo) / width) as usize).min(HISTOGRAM_BINS - 1)
    };
    let mut negative = vec![0; if edges.is_empty() { 0 } else { HISTOGRAM_BINS }];
    let mut positive = negative.clone();
    if !edges.is_empty() {
        neg.iter().for_each(|&a| negative[bin(a)] += 1);
        pos.iter().for_each(|&a| positive[bin(a)] += 1);
    }
    GroupedTailStats {
        negative_count: neg.len(),
        positive_count: pos.len(),
        negative_kurtosis: kurtosis(&neg).ok(),
        positive_kurtosis: kurtosis(&pos).ok(),
        histogram: LogHistogram { edges, negative, positive },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RunRng;
    use proptest::prelude::*;

    /// Forward-sum oracle: A_t = Σ_k (γλ)^k δ_{t+k} with no terminals.
    fn forward_sum_gae(r: &[f64], v: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
        let deltas: Vec<f64> = (0..r.len()).map(|t| r[t] + gamma * v[t + 1] - v[t]).collect();
        (0..r.len())
            .map(|t| (t..r.len()).map(|k| (gamma * lambda).powi((k - t) as i32) * deltas[k]).sum())
            .collect()
    }

    #[test]
    fn lambda_zero_is_td_residual() {
        let r = [1.0, -0.5, 2.0];
        let v = [0.3, 0.1, -0.2, 0.7];
        let (a, _) = gae(&r, &v, &[false; 3], 0.9, 0.0).unwrap();
        for t in 0..3 {
            assert!((a[t] - (r[t] + 0.9 * v[t + 1] - v[t])).abs() < 1e-15);
        }
    }

    #[test]
    fn single_terminal_step() {
        let (a, trg) = gae(&[2.5], &[0.75, 100.0], &[true], 0.99, 0.95).unwrap();
        assert_eq!(a, vec![1.75]);
        assert_eq!(trg, vec![2.5]);
    }

    #[test]
    fn two_step_example_against_forward_sum() {
        let r = [1.0, 1.0];
        let v = [0.5, 0.5, 0.5];
        let (a, trg) = gae(&r, &v, &[false, false], 0.99, 0.95).unwrap();
        let oracle = forward_sum_gae(&r, &v, 0.99, 0.95);
        // δ = 1 + 0.99·0.5 − 0.5 = 0.995 for both steps
        assert!((oracle[1] - 0.995).abs() < 1e-15);
        assert!((oracle[0] - (0.995 + 0.9405 * 0.995)).abs() < 1e-15);
        for t in 0..2 {
            assert!((a[t] - oracle[t]).abs() < 1e-12);
            assert!((trg[t] - (a[t] + 0.5)).abs() < 1e-15);
        }
    }

    #[test]
    fn length_mismatch() {
        assert!(gae(&[1.0, 2.0], &[0.0, 0.0], &[false, false], 0.9, 0.9).is_err());
        assert!(gae(&[1.0], &[0.0, 0.0], &[false, false], 0.9, 0.9).is_err());
    }

    #[test]
    fn lambda_one_equals_discounted_return_minus_value() {
        let mut rng = RunRng::new(3);
        let n = 300;
        let r: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let v: Vec<f64> = (0..=n).map(|_| rng.normal()).collect();
        let dones = vec![false; n];
        let (a, _) = gae(&r, &v, &dones, 0.97, 1.0).unwrap();
        let ret = discounted_returns(&r, &dones, v[n], 0.97);
        for t in 0..n {
            assert!((a[t] - (ret[t] - v[t])).abs() < 1e-10 * ret[t].abs().max(1.0));
        }
    }

    #[test]
    fn episode_isolation() {
        let r1 = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r2 = [1.0, 2.0, 3.0, -40.0, 9.0];
        let v1 = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let v2 = [0.1, 0.2, 0.3, 7.0, -3.0, 2.0];
        let d = [false, false, true, false, false];
        let (a1, _) = gae(&r1, &v1, &d, 0.99, 0.95).unwrap();
        let (a2, _) = gae(&r2, &v2, &d, 0.99, 0.95).unwrap();
        assert_eq!(&a1[..3], &a2[..3]);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&[1.0, -1.0]).unwrap(), vec![1.0, -1.0]);
        assert_eq!(normalize(&[4.2; 5]).unwrap(), vec![0.0; 5]);
        assert!(normalize(&[1.0]).is_err());
        let mut rng = RunRng::new(8);
        let x: Vec<f64> = (0..1000).map(|_| 3.0 + 7.0 * rng.normal()).collect();
        let z = normalize(&x).unwrap();
        let m = z.iter().sum::<f64>() / 1000.0;
        let s = (z.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 1000.0).sqrt();
        assert!(m.abs() < 1e-6 && (s - 1.0).abs() < 1e-6);
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clip_advantages(&[-5.0, 0.3], -2.0).unwrap(), vec![-2.0, 0.3]);
        assert_eq!(clip_advantages(&[0.1, 2.0, 9.0], -2.0).unwrap(), vec![0.1, 2.0, 9.0]);
        assert!(clip_advantages(&[1.0], 0.5).is_err());
    }

    #[test]
    fn clipping_outliers_lowers_kurtosis() {
        let mut rng = RunRng::new(12);
        let mut a: Vec<f64> = (0..2000).map(|_| rng.normal()).collect();
        for k in (0..2000).step_by(100) {
            a[k] = -10.0;
        }
        let clipped = clip_advantages(&a, -3.0).unwrap();
        let abs = |v: &[f64]| v.iter().map(|x| x.abs()).collect::<Vec<_>>();
        assert!(kurtosis(&abs(&clipped)).unwrap() < kurtosis(&abs(&a)).unwrap());
    }

    #[test]
    fn grouped_stats_symmetric_and_degenerate() {
        let mut rng = RunRng::new(2);
        let a: Vec<f64> = (0..20_000).map(|_| rng.normal()).collect();
        let g = grouped_tail_stats(&a);
        let (n, p) = (g.negative_kurtosis.unwrap(), g.positive_kurtosis.unwrap());
        assert!((n - p).abs() < 0.05, "{n} vs {p}");
        assert_eq!(g.histogram.negative.iter().sum::<usize>(), g.negative_count);

        let pos = [0.5, 1.0, 2.0, 3.0, 4.0];
        let g = grouped_tail_stats(&pos);
        assert_eq!(g.negative_count, 0);
        assert!(g.negative_kurtosis.is_none());
        assert!(g.positive_kurtosis.is_some());
    }

    #[test]
    fn heavy_negative_group_has_larger_kurtosis() {
        let mut rng = RunRng::new(5);
        let mut a = Vec::new();
        for _ in 0..5000 {
            a.push(-rng.pareto(2.0));
            a.push(rng.normal().abs());
        }
        let g = grouped_tail_stats(&a);
        assert!(g.negative_kurtosis.unwrap() > g.positive_kurtosis.unwrap());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(x in proptest::collection::vec(-1e3f64..1e3, 2..200)) {
            let once = normalize(&x).unwrap();
            let twice = normalize(&once).unwrap();
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
