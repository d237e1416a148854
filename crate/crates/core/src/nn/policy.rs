use serde::{Deserialize, Serialize};

use super::mlp::{MlpCache, MlpSpec};
use super::param::{LayerDesc, ParamVector};
use crate::error::check_len;
use crate::rng::RunRng;
use crate::{Error, Result};

/// ½·ln(2π)
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Log density of a diagonal Gaussian, summed over dimensions.
pub fn gaussian_log_density(mean: &[f64], log_std: &[f64], x: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(x)
        .map(|((m, ls), x)| {
            let z = (x - m) * (-ls).exp();
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

/// Diagonal Gaussian policy: an MLP produces the mean, a state-independent
/// learned vector holds log σ. The parameter vector is the MLP's parameters
/// followed by a `log_std` block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub net: MlpSpec,
    pub params: ParamVector,
}

impl GaussianPolicy {
    pub fn layout(net: &MlpSpec) -> Vec<LayerDesc> {
        let mut layout = net.layout("mean.");
        layout.push(LayerDesc::new("log_std", vec![net.output_dim]));
        layout
    }

    pub fn new(net: MlpSpec, params: ParamVector) -> Result<Self> {
        net.validate()?;
        check_len("GaussianPolicy params", net.num_params() + net.output_dim, params.len())?;
        params.validate()?;
        Ok(Self { net, params })
    }

    /// Mean head initialised with a small gain, log σ = `log_std_init`.
    pub fn init(net: MlpSpec, rng: &mut RunRng, head_gain: f64, log_std_init: f64) -> Result<Self> {
        net.validate()?;
        let mut values = net.init_params(rng, head_gain);
        values.extend(std::iter::repeat_n(log_std_init, net.output_dim));
        let params = ParamVector::new(Self::layout(&net), values)?;
        Ok(Self { net, params })
    }

    pub fn action_dim(&self) -> usize {
        self.net.output_dim
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn log_std(&self) -> &[f64] {
        Self::log_std_of(&self.net, &self.params.values)
    }

    pub fn log_std_of<'p>(net: &MlpSpec, params: &'p [f64]) -> &'p [f64] {
        let o = net.num_params();
        &params[o..o + net.output_dim]
    }

    pub fn new_cache(&self) -> MlpCache {
        self.net.new_cache()
    }

    pub fn mean(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.net.forward(&self.params.values, state)
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std().iter().map(|l| l.exp()).collect()
    }

    pub fn log_prob(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        let mut cache = self.new_cache();
        Self::log_prob_at(&self.net, &self.params.values, state, action, &mut cache)
    }

    /// log π(a|s) evaluated at an arbitrary parameter vector.
    pub fn log_prob_at(
        net: &MlpSpec,
        params: &[f64],
        state: &[f64],
        action: &[f64],
        cache: &mut MlpCache,
    ) -> Result<f64> {
        check_len("action", net.output_dim, action.len())?;
        let log_std = Self::log_std_of(net, params);
        check_std(log_std)?;
        let mean = net.forward_cached(params, state, cache)?;
        Ok(gaussian_log_density(mean, log_std, action))
    }

    /// Returns log π(a|s) and overwrites `grad` with ∇θ log π(a|s).
    pub fn log_prob_grad(
        net: &MlpSpec,
        params: &[f64],
        state: &[f64],
        action: &[f64],
        cache: &mut MlpCache,
        grad: &mut [f64],
    ) -> Result<f64> {
        check_len("action", net.output_dim, action.len())?;
        let n_net = net.num_params();
        let log_std = Self::log_std_of(net, params);
        check_std(log_std)?;
        let mean = net.forward_cached(params, state, cache)?.to_vec();
        let logp = gaussian_log_density(&mean, log_std, action);
        let mut d_mean = vec![0.0; mean.len()];
        for d in 0..mean.len() {
            let inv_var = (-2.0 * log_std[d]).exp();
            let diff = action[d] - mean[d];
            d_mean[d] = diff * inv_var;
            // d/d log σ of (-½ (x-μ)²/σ² - log σ)
            grad[n_net + d] = diff * diff * inv_var - 1.0;
        }
        net.backward(params, cache, &d_mean, &mut grad[..n_net]);
        Ok(logp)
    }

    /// Differential entropy Σ (log σ + ½ ln(2πe)).
    pub fn entropy_of(net: &MlpSpec, params: &[f64]) -> f64 {
        Self::log_std_of(net, params)
            .iter()
            .map(|ls| ls + HALF_LN_2PI + 0.5)
            .sum()
    }

    /// Draws an action with the Box–Muller normal source.
    pub fn sample(&self, state: &[f64], rng: &mut RunRng, cache: &mut MlpCache) -> Result<(Vec<f64>, f64)> {
        let log_std = self.log_std();
        check_std(log_std)?;
        let mean = self.net.forward_cached(&self.params.values, state, cache)?;
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("policy mean".into()));
        }
        let action: Vec<f64> = mean
            .iter()
            .zip(log_std)
            .map(|(m, ls)| m + ls.exp() * rng.normal())
            .collect();
        let logp = gaussian_log_density(mean, log_std, &action);
        Ok((action, logp))
    }
}

fn check_std(log_std: &[f64]) -> Result<()> {
    if log_std.iter().any(|l| !l.exp().is_finite() || l.exp() <= 0.0) {
        return Err(Error::NonFinite("policy std".into()));
    }
    Ok(())
}
