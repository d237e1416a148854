//! The iteration loop: rollout, advantages, K epochs of minibatch updates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::losses::mean_kl;
use super::objective::{ActorObjective, Aggregation, CriticObjective, LossConfig, TrainBatch};
use crate::advantage::AdvantageBatch;
use crate::env::{collect_rollout, ActionSource, Env, EnvKind, RewardNoise};
use crate::nn::{mean_loss_grad, GaussianPolicy, Mlp, MlpSpec, OptimizerState, SampleLoss};
use crate::rng::RunRng;
use crate::robust::block_gmom_step;
use crate::taildiag::kurtosis;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ppo,
    PpoNoclip,
    RobustPpoNoclip,
    A2c,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Ppo, Algorithm::PpoNoclip, Algorithm::RobustPpoNoclip, Algorithm::A2c];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ppo => "ppo",
            Algorithm::PpoNoclip => "ppo_noclip",
            Algorithm::RobustPpoNoclip => "robust_ppo_noclip",
            Algorithm::A2c => "a2c",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub env: EnvKind,
    pub steps_per_iter: usize,
    pub minibatches: usize,
    pub epochs: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub learning_rate: f64,
    pub loss: LossConfig,
    pub hidden: Vec<usize>,
    pub log_std_init: f64,
    pub actor_head_gain: f64,
    pub critic_head_gain: f64,
    /// Lower bound applied to normalised advantages.
    pub advantage_clip: Option<f64>,
    pub reward_noise: Option<RewardNoise>,
}

impl TrainConfig {
    pub fn minibatch_size(&self) -> usize {
        self.steps_per_iter / self.minibatches
    }

    pub fn steps_per_update_round(&self) -> usize {
        self.epochs * self.minibatches
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps_per_iter == 0 || self.minibatches == 0 || self.epochs == 0 {
            return Err(Error::Config("steps, minibatches and epochs must be positive".into()));
        }
        if !self.steps_per_iter.is_multiple_of(self.minibatches) {
            return Err(Error::Config(format!(
                "{} steps do not split into {} equal minibatches",
                self.steps_per_iter, self.minibatches
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config("gamma and lambda must lie in [0, 1]".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if let Some(t) = self.advantage_clip {
            if !(t < 0.0) {
                return Err(Error::Config(format!("advantage clip threshold must be negative, got {t}")));
            }
        }
        if let Aggregation::BlockGmom(g) = &self.loss.aggregation {
            if g.blocks > self.minibatch_size() {
                return Err(Error::Config(format!(
                    "{} gmom blocks exceed the minibatch size {}",
                    g.blocks,
                    self.minibatch_size()
                )));
            }
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive and non-empty".into()));
        }
        self.loss.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub policy: GaussianPolicy,
    pub critic: Mlp,
    pub actor_opt: OptimizerState,
    pub critic_opt: OptimizerState,
}

impl Agent {
    /// Actor first, then critic, both drawn from `rng`.
    pub fn init(config: &TrainConfig, rng: &mut RunRng) -> Result<Self> {
        let (obs, act) = (config.env.obs_dim(), config.env.action_dim());
        let actor_net = MlpSpec::new(obs, config.hidden.clone(), act)?;
        let critic_net = MlpSpec::new(obs, config.hidden.clone(), 1)?;
        let policy = GaussianPolicy::init(actor_net, rng, config.actor_head_gain, config.log_std_init)?;
        let critic = Mlp::init(critic_net, rng, config.critic_head_gain)?;
        let actor_opt = OptimizerState::adam(config.learning_rate, policy.num_params())?;
        let critic_opt = OptimizerState::adam(config.learning_rate, critic.params.len())?;
        Ok(Self {
            policy,
            critic,
            actor_opt,
            critic_opt,
        })
    }
}

/// What an observer sees immediately before an update step.
pub struct StepContext<'a> {
    pub iteration: u64,
    /// 0-based index among the iteration's `epochs × minibatches` steps.
    pub step: usize,
    pub epoch: usize,
    pub minibatch: usize,
    pub batch: &'a TrainBatch,
    pub indices: &'a [usize],
    pub actor_net: &'a MlpSpec,
    pub actor_params: &'a [f64],
    pub critic_net: &'a MlpSpec,
    pub critic_params: &'a [f64],
    pub loss: &'a LossConfig,
}

/// Read-only hook into the update loop.
pub trait StepObserver {
    /// Whether any step of `iteration` is of interest; skipped iterations cost
    /// nothing.
    fn wants_iteration(&self, _iteration: u64) -> bool {
        true
    }

    fn on_step(&mut self, ctx: &StepContext<'_>) -> Result<()>;
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RatioStats {
    /// Mean ρ over the first minibatch (the on-policy step).
    pub first_step_mean: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Fraction of evaluated samples with ρ outside [1−ε, 1+ε] (ε = 0.2 when
    /// ratio clipping is off).
    pub outside_band: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: u64,
    /// Mean task return of episodes completed during this iteration's rollout.
    pub mean_return: Option<f64>,
    pub episodes: usize,
    /// Mean learning reward per step (includes injected noise).
    pub mean_reward: f64,
    pub mean_kl: f64,
    pub gradient_steps: usize,
    pub ratio: RatioStats,
    pub actor_loss: f64,
    pub critic_loss: f64,
    /// κ^{1/4} of the advantages used by the policy loss.
    pub advantage_kurtosis: Option<f64>,
    pub raw_advantage_kurtosis: Option<f64>,
    pub policy_std: Vec<f64>,
}

/// Complete training state: everything needed to resume bit-identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trainer {
    pub config: TrainConfig,
    pub agent: Agent,
    pub env: Env,
    pub rng: RunRng,
    pub iteration: u64,
}

const REPORT_BAND: f64 = 0.2;

impl Trainer {
    pub fn new(config: TrainConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = RunRng::new(seed);
        let agent = Agent::init(&config, &mut rng)?;
        let env = Env::new(config.env, &mut rng);
        Ok(Self {
            config,
            agent,
            env,
            rng,
            iteration: 0,
        })
    }

    pub fn train_iteration(&mut self, observer: Option<&mut dyn StepObserver>) -> Result<IterationReport> {
        let iteration = self.iteration;
        let diverged = |step: usize, e: Error| match e {
            Error::NonFinite(detail) => Error::Diverged { iteration, step, detail },
            other => other,
        };
        let cfg = self.config.clone();
        let old_actor = self.agent.policy.params.values.clone();
        let traj = collect_rollout(
            &self.agent.policy,
            &self.agent.critic,
            &mut self.env,
            cfg.steps_per_iter,
            &mut self.rng,
            &ActionSource::Sample,
            cfg.reward_noise.as_ref(),
        )
        .map_err(|e| diverged(0, e))?;
        let adv = AdvantageBatch::compute(
            &traj.rewards(),
            &traj.values_with_bootstrap(),
            &traj.dones(),
            cfg.gamma,
            cfg.lambda,
        )
        .map_err(|e| diverged(0, e))?;
        let batch = TrainBatch::from_trajectory(&traj, &adv, cfg.advantage_clip)?;

        let mut observer = observer.filter(|o| o.wants_iteration(iteration));
        let mb = cfg.minibatch_size();
        let band = cfg.loss.ratio_clip_eps.unwrap_or(REPORT_BAND);
        let mut ratio_sum = 0.0;
        let mut ratio_count = 0usize;
        let mut outside = 0usize;
        let (mut rmin, mut rmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut first_step_mean = f64::NAN;
        let (mut actor_loss_sum, mut critic_loss_sum) = (0.0, 0.0);
        let mut step = 0;
        for epoch in 0..cfg.epochs {
            let perm = self.rng.permutation(batch.len());
            for minibatch in 0..cfg.minibatches {
                let indices = &perm[minibatch * mb..(minibatch + 1) * mb];
                if let Some(obs) = observer.as_deref_mut() {
                    obs.on_step(&StepContext {
                        iteration,
                        step,
                        epoch,
                        minibatch,
                        batch: &batch,
                        indices,
                        actor_net: &self.agent.policy.net,
                        actor_params: &self.agent.policy.params.values,
                        critic_net: &self.agent.critic.spec,
                        critic_params: &self.agent.critic.params.values,
                        loss: &cfg.loss,
                    })?;
                }
                let (la, lc, ratios) = update_step(&mut self.agent, &batch, indices, &cfg.loss).map_err(|e| diverged(step, e))?;
                actor_loss_sum += la;
                critic_loss_sum += lc;
                let mut mb_sum = 0.0;
                for &r in ratios.iter().filter(|r| !r.is_nan()) {
                    mb_sum += r;
                    ratio_count += 1;
                    rmin = rmin.min(r);
                    rmax = rmax.max(r);
                    if (r - 1.0).abs() > band {
                        outside += 1;
                    }
                }
                ratio_sum += mb_sum;
                if step == 0 {
                    first_step_mean = mb_sum / ratios.len() as f64;
                }
                step += 1;
            }
        }
        let kl = mean_kl(&self.agent.policy.net, &old_actor, &self.agent.policy.params.values, &batch.states)
            .map_err(|e| diverged(step, e))?;
        self.iteration += 1;
        let episodes = traj.episode_returns.len();
        let mean_return = (episodes > 0).then(|| traj.episode_returns.iter().sum::<f64>() / episodes as f64);
        Ok(IterationReport {
            iteration,
            mean_return,
            episodes,
            mean_reward: traj.rewards().iter().sum::<f64>() / traj.len() as f64,
            mean_kl: kl,
            gradient_steps: step,
            ratio: RatioStats {
                first_step_mean,
                mean: ratio_sum / ratio_count.max(1) as f64,
                min: rmin,
                max: rmax,
                outside_band: outside as f64 / ratio_count.max(1) as f64,
            },
            actor_loss: actor_loss_sum / step as f64,
            critic_loss: critic_loss_sum / step as f64,
            advantage_kurtosis: kurtosis(&batch.advantages).ok(),
            raw_advantage_kurtosis: kurtosis(&batch.raw_advantages).ok(),
            policy_std: self.agent.policy.std(),
        })
    }
}

/// One minibatch update of both networks. Returns (actor loss, critic loss,
/// per-sample ratios seen).
fn update_step(agent: &mut Agent, batch: &TrainBatch, indices: &[usize], loss: &LossConfig) -> Result<(f64, f64, Vec<f64>)> {
    let actor_net = agent.policy.net.clone();
    let critic_net = agent.critic.spec.clone();
    let actor = ActorObjective::new(&actor_net, batch, indices, loss);
    let critic = CriticObjective::new(&critic_net, batch, indices, loss);
    let (la, lc) = match &loss.aggregation {
        Aggregation::Mean => {
            let (la, mut ga) = mean_loss_grad(&actor, &agent.policy.params.values, 0..actor.num_samples())?;
            let (lc, mut gc) = mean_loss_grad(&critic, &agent.critic.params.values, 0..critic.num_samples())?;
            if let Some(max) = loss.grad_clip_max {
                let norm = (ga.iter().chain(&gc).map(|g| g * g).sum::<f64>()).sqrt();
                if norm > max {
                    let s = max / norm;
                    ga.iter_mut().chain(gc.iter_mut()).for_each(|g| *g *= s);
                }
            }
            agent.actor_opt.step(&mut agent.policy.params, &ga)?;
            agent.critic_opt.step(&mut agent.critic.params, &gc)?;
            (la, lc)
        }
        Aggregation::BlockGmom(g) => {
            let a = block_gmom_step(&actor, &mut agent.policy.params.values, g, &mut agent.actor_opt)?;
            let c = block_gmom_step(&critic, &mut agent.critic.params.values, g, &mut agent.critic_opt)?;
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            (mean(&a.block_losses), mean(&c.block_losses))
        }
    };
    if !la.is_finite() || !lc.is_finite() {
        return Err(Error::NonFinite(format!("losses actor={la} critic={lc}")));
    }
    if !agent.policy.params.is_finite() || !agent.critic.params.is_finite() {
        return Err(Error::NonFinite("parameters after update".into()));
    }
    Ok((la, lc, actor.seen_ratios()))
}
