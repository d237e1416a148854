//! Loss configuration, the frozen per-iteration batch, and per-sample actor and
//! critic objectives that plug into the gradient machinery.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use super::losses::{check_clip_eps, ppo_clip_active, ppo_clip_objective, ratio, value_loss_term, value_loss_term_grad};
use crate::advantage::{clip_advantages, AdvantageBatch};
use crate::env::Trajectory;
use crate::error::check_len;
use crate::nn::{GaussianPolicy, MlpCache, MlpSpec, SampleLoss};
use crate::robust::GmomConfig;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyObjective {
    /// −ρÂ, optionally with ratio clipping.
    ImportanceWeighted,
    /// −Â·log π
    LogLikelihood,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Aggregation {
    Mean,
    BlockGmom(GmomConfig),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub policy_objective: PolicyObjective,
    pub ratio_clip_eps: Option<f64>,
    pub value_clip_eps: Option<f64>,
    pub value_coeff: f64,
    pub entropy_coeff: f64,
    /// Global L2 norm bound over the joint actor/critic gradient.
    pub grad_clip_max: Option<f64>,
    pub aggregation: Aggregation,
}

impl LossConfig {
    pub fn ppo(eps: f64, value_coeff: f64, entropy_coeff: f64, grad_clip: f64) -> Self {
        Self {
            policy_objective: PolicyObjective::ImportanceWeighted,
            ratio_clip_eps: Some(eps),
            value_clip_eps: Some(eps),
            value_coeff,
            entropy_coeff,
            grad_clip_max: Some(grad_clip),
            aggregation: Aggregation::Mean,
        }
    }

    pub fn ppo_noclip(value_coeff: f64, entropy_coeff: f64) -> Self {
        Self {
            policy_objective: PolicyObjective::ImportanceWeighted,
            ratio_clip_eps: None,
            value_clip_eps: None,
            value_coeff,
            entropy_coeff,
            grad_clip_max: None,
            aggregation: Aggregation::Mean,
        }
    }

    pub fn robust_ppo_noclip(value_coeff: f64, entropy_coeff: f64, gmom: GmomConfig) -> Self {
        Self {
            aggregation: Aggregation::BlockGmom(gmom),
            ..Self::ppo_noclip(value_coeff, entropy_coeff)
        }
    }

    pub fn a2c(value_coeff: f64, entropy_coeff: f64) -> Self {
        Self {
            policy_objective: PolicyObjective::LogLikelihood,
            ..Self::ppo_noclip(value_coeff, entropy_coeff)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(eps) = self.ratio_clip_eps {
            check_clip_eps(eps)?;
        }
        if let Some(eps) = self.value_clip_eps {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::Config(format!("value clip epsilon must be positive, got {eps}")));
            }
        }
        if !(self.value_coeff > 0.0 && self.value_coeff.is_finite()) {
            return Err(Error::Config(format!("value coefficient must be positive, got {}", self.value_coeff)));
        }
        if !self.entropy_coeff.is_finite() {
            return Err(Error::Config("entropy coefficient must be finite".into()));
        }
        if let Some(g) = self.grad_clip_max {
            if !(g > 0.0) {
                return Err(Error::Config(format!("gradient clip norm must be positive, got {g}")));
            }
        }
        if let Aggregation::BlockGmom(g) = &self.aggregation {
            g.validate()?;
            if self.grad_clip_max.is_some() {
                return Err(Error::Config("gradient clipping is not supported with block-gmom aggregation".into()));
            }
        }
        Ok(())
    }
}

/// Everything the update epochs need from one rollout, frozen for the whole
/// iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainBatch {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub behavior_log_probs: Vec<f64>,
    /// Advantages fed to the policy loss (normalised, possibly clipped).
    pub advantages: Vec<f64>,
    pub raw_advantages: Vec<f64>,
    pub target_values: Vec<f64>,
    pub old_values: Vec<f64>,
    pub returns: Vec<f64>,
}

impl TrainBatch {
    pub fn from_trajectory(traj: &Trajectory, adv: &AdvantageBatch, advantage_clip: Option<f64>) -> Result<Self> {
        let n = traj.len();
        if n == 0 {
            return Err(Error::Empty("trajectory"));
        }
        check_len("advantages", n, adv.normalized.len())?;
        let obs_dim = traj.records[0].state.len();
        let act_dim = traj.records[0].action.len();
        let advantages = match advantage_clip {
            Some(t) => clip_advantages(&adv.normalized, t)?,
            None => adv.normalized.clone(),
        };
        Ok(Self {
            obs_dim,
            act_dim,
            states: traj.records.iter().flat_map(|r| r.state.iter().copied()).collect(),
            actions: traj.records.iter().flat_map(|r| r.action.iter().copied()).collect(),
            behavior_log_probs: traj.records.iter().map(|r| r.log_prob).collect(),
            advantages,
            raw_advantages: adv.raw.clone(),
            target_values: adv.target_values.clone(),
            old_values: adv.values.clone(),
            returns: adv.returns.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.behavior_log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.behavior_log_probs.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn action(&self, i: usize) -> &[f64] {
        &self.actions[i * self.act_dim..(i + 1) * self.act_dim]
    }
}

/// Per-sample policy loss over a subset of the batch. Ratios seen during the
/// last gradient evaluation of each sample are kept for reporting.
pub struct ActorObjective<'a> {
    net: &'a MlpSpec,
    batch: &'a TrainBatch,
    indices: &'a [usize],
    cfg: &'a LossConfig,
    cache: RefCell<MlpCache>,
    seen_ratios: RefCell<Vec<f64>>,
}

impl<'a> ActorObjective<'a> {
    pub fn new(net: &'a MlpSpec, batch: &'a TrainBatch, indices: &'a [usize], cfg: &'a LossConfig) -> Self {
        Self {
            net,
            batch,
            indices,
            cfg,
            cache: RefCell::new(net.new_cache()),
            seen_ratios: RefCell::new(vec![f64::NAN; indices.len()]),
        }
    }

    /// Ratios recorded by the most recent gradient pass (NaN for unvisited samples).
    pub fn seen_ratios(&self) -> Vec<f64> {
        self.seen_ratios.borrow().clone()
    }

    /// (log π(a|s), ρ) of sample `i` at `params`.
    pub fn log_prob_and_ratio(&self, params: &[f64], i: usize) -> Result<(f64, f64)> {
        let j = self.indices[i];
        let lp = GaussianPolicy::log_prob_at(
            self.net,
            params,
            self.batch.state(j),
            self.batch.action(j),
            &mut self.cache.borrow_mut(),
        )?;
        Ok((lp, ratio(lp, self.batch.behavior_log_probs[j])?))
    }
}

impl SampleLoss for ActorObjective<'_> {
    fn num_samples(&self) -> usize {
        self.indices.len()
    }

    fn num_params(&self) -> usize {
        self.net.num_params() + self.net.output_dim
    }

    fn sample_loss_grad(&self, params: &[f64], i: usize, grad: &mut [f64]) -> Result<f64> {
        let j = self.indices[i];
        let logp = GaussianPolicy::log_prob_grad(
            self.net,
            params,
            self.batch.state(j),
            self.batch.action(j),
            &mut self.cache.borrow_mut(),
            grad,
        )?;
        let adv = self.batch.advantages[j];
        let (loss, coef) = match self.cfg.policy_objective {
            PolicyObjective::ImportanceWeighted => {
                let rho = ratio(logp, self.batch.behavior_log_probs[j])?;
                self.seen_ratios.borrow_mut()[i] = rho;
                match self.cfg.ratio_clip_eps {
                    Some(eps) => {
                        let coef = if ppo_clip_active(rho, adv, eps) { -rho * adv } else { 0.0 };
                        (-ppo_clip_objective(rho, adv, eps), coef)
                    }
                    None => (-rho * adv, -rho * adv),
                }
            }
            PolicyObjective::LogLikelihood => {
                self.seen_ratios.borrow_mut()[i] = ratio(logp, self.batch.behavior_log_probs[j])?;
                (-adv * logp, -adv)
            }
        };
        grad.iter_mut().for_each(|g| *g *= coef);
        let mut loss = loss;
        if self.cfg.entropy_coeff != 0.0 {
            loss -= self.cfg.entropy_coeff * GaussianPolicy::entropy_of(self.net, params);
            let n_net = self.net.num_params();
            grad[n_net..].iter_mut().for_each(|g| *g -= self.cfg.entropy_coeff);
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("actor loss of sample {j}")));
        }
        Ok(loss)
    }
}

/// Per-sample value regression loss scaled by the value coefficient.
pub struct CriticObjective<'a> {
    net: &'a MlpSpec,
    batch: &'a TrainBatch,
    indices: &'a [usize],
    cfg: &'a LossConfig,
    cache: RefCell<MlpCache>,
}

impl<'a> CriticObjective<'a> {
    pub fn new(net: &'a MlpSpec, batch: &'a TrainBatch, indices: &'a [usize], cfg: &'a LossConfig) -> Self {
        Self {
            net,
            batch,
            indices,
            cfg,
            cache: RefCell::new(net.new_cache()),
        }
    }

    pub fn value(&self, params: &[f64], i: usize) -> Result<f64> {
        let j = self.indices[i];
        Ok(self.net.forward_cached(params, self.batch.state(j), &mut self.cache.borrow_mut())?[0])
    }
}

impl SampleLoss for CriticObjective<'_> {
    fn num_samples(&self) -> usize {
        self.indices.len()
    }

    fn num_params(&self) -> usize {
        self.net.num_params()
    }

    fn sample_loss_grad(&self, params: &[f64], i: usize, grad: &mut [f64]) -> Result<f64> {
        let j = self.indices[i];
        let mut cache = self.cache.borrow_mut();
        let v = self.net.forward_cached(params, self.batch.state(j), &mut cache)?[0];
        let (target, old) = (self.batch.target_values[j], self.batch.old_values[j]);
        let (eps, clipped) = match self.cfg.value_clip_eps {
            Some(e) => (e, true),
            None => (0.0, false),
        };
        let c = self.cfg.value_coeff;
        let loss = c * value_loss_term(v, target, old, eps, clipped);
        let d_out = [c * value_loss_term_grad(v, target, old, eps, clipped)];
        self.net.backward(params, &mut cache, &d_out, grad);
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("critic loss of sample {j}")));
        }
        Ok(loss)
    }
}
