use serde::{Deserialize, Serialize};

use super::{Env, EnvKind};
use crate::nn::{GaussianPolicy, Mlp};
use crate::rng::RunRng;
use crate::{Error, Result};

/// One environment step as seen by the learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    /// Reward used for learning (may include injected noise).
    pub reward: f64,
    /// Task reward without injected noise.
    pub clean_reward: f64,
    pub done: bool,
    /// log π₀(a|s) under the sampling policy.
    pub log_prob: f64,
    /// V(s) from the critic at sampling time.
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<Transition>,
    /// V of the state following the last record.
    pub bootstrap_value: f64,
    /// Clean returns of the episodes that finished during this rollout.
    pub episode_returns: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.reward).collect()
    }

    pub fn dones(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.done).collect()
    }

    /// V(s_0..s_{T-1}) followed by the bootstrap value.
    pub fn values_with_bootstrap(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.records.iter().map(|r| r.value).collect();
        v.push(self.bootstrap_value);
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ActionSource {
    /// a ~ π(·|s)
    Sample,
    /// a = μ(s)
    Mean,
    /// The same action at every step (test mode).
    Fixed(Vec<f64>),
}

/// Occasional heavy-tailed negative reward shocks: with probability `prob` a step
/// receives −scale·(P − 1) with P ~ Pareto(tail_index).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardNoise {
    pub scale: f64,
    pub tail_index: f64,
    pub prob: f64,
}

impl RewardNoise {
    fn draw(&self, rng: &mut RunRng) -> f64 {
        if rng.uniform() < self.prob {
            -self.scale * (rng.pareto(self.tail_index) - 1.0)
        } else {
            0.0
        }
    }
}

/// Runs `steps` environment steps, auto-resetting on `done`. The log-prob of the
/// action actually taken is recorded under `policy`.
pub fn collect_rollout(
    policy: &GaussianPolicy,
    critic: &Mlp,
    env: &mut Env,
    steps: usize,
    rng: &mut RunRng,
    source: &ActionSource,
    noise: Option<&RewardNoise>,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::InvalidArgument("rollout length must be positive".into()));
    }
    let mut records = Vec::with_capacity(steps);
    let mut episode_returns = Vec::new();
    let mut pcache = policy.new_cache();
    let mut vcache = critic.spec.new_cache();
    for _ in 0..steps {
        let state = env.observation().to_vec();
        let (action, log_prob) = match source {
            ActionSource::Sample => policy.sample(&state, rng, &mut pcache)?,
            ActionSource::Mean => {
                let m = policy.mean(&state)?;
                let lp = policy.log_prob(&state, &m)?;
                (m, lp)
            }
            ActionSource::Fixed(a) => (a.clone(), policy.log_prob(&state, a)?),
        };
        if action.iter().any(|a| !a.is_finite()) || !log_prob.is_finite() {
            return Err(Error::NonFinite("policy output during rollout".into()));
        }
        let value = critic.scalar(&state, &mut vcache)?;
        let res = env.step(&action);
        let reward = match noise {
            Some(n) => res.reward + n.draw(rng),
            None => res.reward,
        };
        env.episode_return += res.reward;
        records.push(Transition {
            state,
            action,
            reward,
            clean_reward: res.reward,
            done: res.done,
            log_prob,
            value,
        });
        if res.done {
            episode_returns.push(env.episode_return);
            env.reset(rng);
        }
    }
    let bootstrap_value = critic.scalar(env.observation(), &mut vcache)?;
    Ok(Trajectory {
        records,
        bootstrap_value,
        episode_returns,
    })
}

/// Fresh environment and RNG from `seed`, then [`collect_rollout`] with sampled
/// actions.
pub fn collect_rollout_seeded(
    policy: &GaussianPolicy,
    critic: &Mlp,
    kind: EnvKind,
    steps: usize,
    seed: u64,
) -> Result<Trajectory> {
    let mut rng = RunRng::new(seed);
    let mut env = Env::new(kind, &mut rng);
    collect_rollout(policy, critic, &mut env, steps, &mut rng, &ActionSource::Sample, None)
}

/// Mean episode return of a uniformly random agent.
pub fn random_agent_return(kind: EnvKind, episodes: usize, seed: u64) -> f64 {
    let mut rng = RunRng::with_stream(seed, 99);
    let bound = kind.action_bound();
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut env = Env::new(kind, &mut rng);
        loop {
            let a: Vec<f64> = (0..kind.action_dim()).map(|_| rng.uniform_range(-bound, bound)).collect();
            let r = env.step(&a);
            total += r.reward;
            if r.done {
                break;
            }
        }
    }
    total / episodes as f64
}
