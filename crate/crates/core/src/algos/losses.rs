//! Scalar loss functions over per-sample ratios, advantages and values.

use crate::error::check_len;
use crate::nn::{GaussianPolicy, MlpSpec};
use crate::{Error, Result};

/// ρ = exp(log π_θ(a|s) − log π₀(a|s)).
pub fn ratio(log_prob: f64, behavior_log_prob: f64) -> Result<f64> {
    let r = (log_prob - behavior_log_prob).exp();
    if !r.is_finite() || r.is_nan() {
        return Err(Error::NonFinite(format!(
            "likelihood ratio from log-probs {log_prob} and {behavior_log_prob}"
        )));
    }
    Ok(r)
}

pub fn ratios(log_probs: &[f64], behavior_log_probs: &[f64]) -> Result<Vec<f64>> {
    check_len("behaviour log-probs", log_probs.len(), behavior_log_probs.len())?;
    log_probs.iter().zip(behavior_log_probs).map(|(&a, &b)| ratio(a, b)).collect()
}

fn check_pair(context: &'static str, a: &[f64], b: &[f64]) -> Result<()> {
    check_len(context, a.len(), b.len())?;
    if a.is_empty() {
        return Err(Error::Empty(context));
    }
    Ok(())
}

/// −mean(ρ·Â)
pub fn surrogate_noclip_loss(ratios: &[f64], advantages: &[f64]) -> Result<f64> {
    check_pair("surrogate loss", ratios, advantages)?;
    Ok(-ratios.iter().zip(advantages).map(|(r, a)| r * a).sum::<f64>() / ratios.len() as f64)
}

/// min(ρÂ, clip(ρ, 1−ε, 1+ε)Â), the pessimistic per-sample objective.
pub fn ppo_clip_objective(ratio: f64, advantage: f64, eps: f64) -> f64 {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * advantage;
    unclipped.min(clipped)
}

/// Whether the gradient of [`ppo_clip_objective`] flows through ρ (the
/// unclipped term is the active minimum).
pub fn ppo_clip_active(ratio: f64, advantage: f64, eps: f64) -> bool {
    ratio * advantage <= ratio.clamp(1.0 - eps, 1.0 + eps) * advantage
}

pub fn check_clip_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("clip epsilon must lie in (0, 1), got {eps}")));
    }
    Ok(())
}

/// −mean(min(ρÂ, clip(ρ, 1−ε, 1+ε)Â))
pub fn ppo_clip_loss(ratios: &[f64], advantages: &[f64], eps: f64) -> Result<f64> {
    check_pair("ppo clip loss", ratios, advantages)?;
    check_clip_eps(eps)?;
    let total: f64 = ratios.iter().zip(advantages).map(|(&r, &a)| ppo_clip_objective(r, a, eps)).sum();
    Ok(-total / ratios.len() as f64)
}

/// Per-sample value regression term. The clipped form is
/// max{(V − V_trg)², (clip(V, V_old − ε, V_old + ε) − V_trg)²}.
pub fn value_loss_term(value: f64, target: f64, old_value: f64, eps: f64, clipped: bool) -> f64 {
    let unclipped = (value - target).powi(2);
    if !clipped {
        return unclipped;
    }
    let v_clip = value.clamp(old_value - eps, old_value + eps);
    unclipped.max((v_clip - target).powi(2))
}

/// d/dV of [`value_loss_term`].
pub fn value_loss_term_grad(value: f64, target: f64, old_value: f64, eps: f64, clipped: bool) -> f64 {
    let unclipped = (value - target).powi(2);
    if !clipped {
        return 2.0 * (value - target);
    }
    let v_clip = value.clamp(old_value - eps, old_value + eps);
    let inside = v_clip == value;
    if unclipped >= (v_clip - target).powi(2) || inside {
        2.0 * (value - target)
    } else {
        0.0
    }
}

pub fn value_loss(values: &[f64], targets: &[f64], old_values: &[f64], eps: f64, clipped: bool) -> Result<f64> {
    check_pair("value loss", values, targets)?;
    check_len("value loss old values", values.len(), old_values.len())?;
    let total: f64 = values
        .iter()
        .zip(targets)
        .zip(old_values)
        .map(|((&v, &t), &o)| value_loss_term(v, t, o, eps, clipped))
        .sum();
    Ok(total / values.len() as f64)
}

/// −mean(Â·log π), with Â held constant.
pub fn a2c_loss(log_probs: &[f64], advantages: &[f64]) -> Result<f64> {
    check_pair("a2c loss", log_probs, advantages)?;
    Ok(-log_probs.iter().zip(advantages).map(|(l, a)| l * a).sum::<f64>() / log_probs.len() as f64)
}

/// KL(p ‖ q) between diagonal Gaussians given means and log standard deviations.
pub fn gaussian_kl(mean_p: &[f64], log_std_p: &[f64], mean_q: &[f64], log_std_q: &[f64]) -> f64 {
    let mut kl = 0.0;
    for d in 0..mean_p.len() {
        let var_p = (2.0 * log_std_p[d]).exp();
        let var_q = (2.0 * log_std_q[d]).exp();
        let diff = mean_p[d] - mean_q[d];
        kl += log_std_q[d] - log_std_p[d] + (var_p + diff * diff) / (2.0 * var_q) - 0.5;
    }
    kl
}

/// Average over `states` (row-major, `net.input_dim` columns) of
/// KL(π_old(·|s) ‖ π_new(·|s)).
pub fn mean_kl(net: &MlpSpec, old_params: &[f64], new_params: &[f64], states: &[f64]) -> Result<f64> {
    let dim = net.input_dim;
    if states.is_empty() {
        return Err(Error::Empty("mean_kl states"));
    }
    if !states.len().is_multiple_of(dim) {
        return Err(Error::DimensionMismatch {
            context: "mean_kl states",
            expected: dim * (states.len() / dim + 1),
            actual: states.len(),
        });
    }
    let ls_old = GaussianPolicy::log_std_of(net, old_params);
    let ls_new = GaussianPolicy::log_std_of(net, new_params);
    let mut c_old = net.new_cache();
    let mut c_new = net.new_cache();
    let mut total = 0.0;
    let n = states.len() / dim;
    for s in states.chunks_exact(dim) {
        let m_old = net.forward_cached(old_params, s, &mut c_old)?;
        let m_new = net.forward_cached(new_params, s, &mut c_new)?;
        total += gaussian_kl(m_old, ls_old, m_new, ls_new);
    }
    let kl = total / n as f64;
    if !kl.is_finite() {
        return Err(Error::NonFinite("mean KL".into()));
    }
    Ok(kl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ratio_identities() {
        assert_eq!(ratio(-1.3, -1.3).unwrap(), 1.0);
        assert!((ratio(2f64.ln() - 0.5, -0.5).unwrap() - 2.0).abs() < 1e-12);
        assert!(ratio(800.0, 0.0).is_err());
    }

    #[test]
    fn surrogate_examples() {
        assert_eq!(surrogate_noclip_loss(&[2.0], &[3.0]).unwrap(), -6.0);
        assert_eq!(surrogate_noclip_loss(&[1.0, 1.0], &[1.0, -1.0]).unwrap(), 0.0);
        assert!(surrogate_noclip_loss(&[1.0], &[1.0, 2.0]).is_err());
        assert!(surrogate_noclip_loss(&[], &[]).is_err());
    }

    #[test]
    fn clip_objective_examples() {
        assert!((ppo_clip_objective(1.5, 1.0, 0.2) - 1.2).abs() < 1e-15);
        assert_eq!(ppo_clip_objective(1.5, -1.0, 0.2), -1.5);
        let a = [0.3, -1.2, 2.0];
        assert_eq!(
            ppo_clip_loss(&[1.0; 3], &a, 0.2).unwrap(),
            surrogate_noclip_loss(&[1.0; 3], &a).unwrap()
        );
        assert!(ppo_clip_loss(&[1.0], &[1.0], 1.0).is_err());
    }

    #[test]
    fn value_loss_examples() {
        assert_eq!(value_loss(&[0.3], &[0.3], &[0.1], 0.2, true).unwrap(), 0.0);
        assert_eq!(value_loss(&[0.3], &[0.3], &[0.1], 0.2, false).unwrap(), 0.0);
        assert_eq!(value_loss_term(1.0, 0.0, 0.5, 0.2, true), 1.0);
        let inside = value_loss_term(0.4, 1.0, 0.5, 0.2, true);
        assert!((inside - 0.36).abs() < 1e-12);
        assert_eq!(inside, value_loss_term(0.4, 1.0, 0.5, 0.2, false));
    }

    #[test]
    fn a2c_examples() {
        assert_eq!(a2c_loss(&[-1.0], &[2.0]).unwrap(), 2.0);
        assert_eq!(a2c_loss(&[-1.0, -3.0], &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn kl_closed_forms() {
        assert_eq!(gaussian_kl(&[0.3], &[0.1], &[0.3], &[0.1]), 0.0);
        assert!((gaussian_kl(&[0.0], &[0.0], &[1.0], &[0.0]) - 0.5).abs() < 1e-15);
        let expected = 2f64.ln() + 0.125 - 0.5;
        assert!((gaussian_kl(&[0.0], &[0.0], &[0.0], &[2f64.ln()]) - expected).abs() < 1e-15);
        assert!((expected - 0.31815).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn clip_equals_surrogate_inside_band(
            r in prop::collection::vec(0.8f64..=1.2, 1..20),
            seed in prop::collection::vec(-3.0f64..3.0, 20),
        ) {
            let a = &seed[..r.len()];
            prop_assert_eq!(ppo_clip_loss(&r, a, 0.2).unwrap(), surrogate_noclip_loss(&r, a).unwrap());
        }

        #[test]
        fn clip_is_pessimistic(r in 0.0f64..5.0, a in -5.0f64..5.0, eps in 0.01f64..0.99) {
            prop_assert!(ppo_clip_objective(r, a, eps) <= r * a);
        }

        #[test]
        fn value_clip_bounds(v in -3.0f64..3.0, t in -3.0f64..3.0, o in -3.0f64..3.0, eps in 0.01f64..1.0) {
            let c = value_loss_term(v, t, o, eps, true);
            let u = value_loss_term(v, t, o, eps, false);
            let v_clip = v.clamp(o - eps, o + eps);
            prop_assert!(c >= u.min((v_clip - t).powi(2)));
            if (v - o).abs() <= eps {
                prop_assert_eq!(c, u);
            }
        }

        #[test]
        fn value_grad_matches_finite_difference(v in -3.0f64..3.0, t in -3.0f64..3.0, o in -3.0f64..3.0, clipped: bool) {
            let eps = 0.2;
            let h = 1e-6;
            // Skip kinks of the max/clamp.
            let near_kink = ((v - (o - eps)).abs() < 1e-4) || ((v - (o + eps)).abs() < 1e-4)
                || ((v - t).abs() - (v.clamp(o - eps, o + eps) - t).abs()).abs() < 1e-4;
            prop_assume!(!near_kink);
            let fd = (value_loss_term(v + h, t, o, eps, clipped) - value_loss_term(v - h, t, o, eps, clipped)) / (2.0 * h);
            let g = value_loss_term_grad(v, t, o, eps, clipped);
            prop_assert!((fd - g).abs() < 1e-5 * (1.0 + g.abs()), "{} {}", fd, g);
        }
    }
}
