//! Built-in continuous-control environments and seeded rollout collection.

mod pendulum;
mod pointmass;
mod rollout;

use serde::{Deserialize, Serialize};

pub use pendulum::{pendulum_step, wrap_angle, PENDULUM_MAX_SPEED, PENDULUM_MAX_TORQUE};
pub use pointmass::pointmass_step;
pub use rollout::{
    collect_rollout, collect_rollout_seeded, random_agent_return, ActionSource, RewardNoise, Trajectory, Transition,
};

use crate::rng::RunRng;

/// Steps before an episode is truncated.
pub const EPISODE_LIMIT: usize = 200;
pub const DT: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Pendulum,
    Pointmass,
}

impl EnvKind {
    pub fn obs_dim(self) -> usize {
        match self {
            EnvKind::Pendulum => 3,
            EnvKind::Pointmass => 4,
        }
    }

    pub fn action_dim(self) -> usize {
        match self {
            EnvKind::Pendulum => 1,
            EnvKind::Pointmass => 2,
        }
    }

    /// Symmetric action bound applied by the environment.
    pub fn action_bound(self) -> f64 {
        match self {
            EnvKind::Pendulum => PENDULUM_MAX_TORQUE,
            EnvKind::Pointmass => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Pendulum => "pendulum",
            EnvKind::Pointmass => "pointmass",
        }
    }

    pub fn step(self, state: &EnvState, action: &[f64]) -> StepResult {
        match self {
            EnvKind::Pendulum => pendulum_step(state, action),
            EnvKind::Pointmass => pointmass_step(state, action),
        }
    }

    /// Samples an initial state.
    pub fn reset(self, rng: &mut RunRng) -> EnvState {
        match self {
            EnvKind::Pendulum => {
                let theta = rng.uniform_range(-std::f64::consts::PI, std::f64::consts::PI);
                let theta_dot = rng.uniform_range(-1.0, 1.0);
                pendulum::state(theta, theta_dot, 0)
            }
            EnvKind::Pointmass => {
                let pos = [rng.uniform_range(-1.0, 1.0), rng.uniform_range(-1.0, 1.0)];
                pointmass::state(pos, [0.0, 0.0], 0)
            }
        }
    }
}

impl std::fmt::Display for EnvKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EnvKind {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "pendulum" => Ok(EnvKind::Pendulum),
            "pointmass" => Ok(EnvKind::Pointmass),
            _ => Err(crate::Error::InvalidArgument(format!("unknown env {s}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub observation: Vec<f64>,
    pub internal: Vec<f64>,
    pub t: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub next_state: EnvState,
    pub reward: f64,
    pub done: bool,
}

/// A live environment instance: kind, current state and the running return of
/// the current episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Env {
    pub kind: EnvKind,
    pub state: EnvState,
    pub episode_return: f64,
}

impl Env {
    pub fn new(kind: EnvKind, rng: &mut RunRng) -> Self {
        Self {
            kind,
            state: kind.reset(rng),
            episode_return: 0.0,
        }
    }

    pub fn from_state(kind: EnvKind, state: EnvState) -> Self {
        Self {
            kind,
            state,
            episode_return: 0.0,
        }
    }

    pub fn observation(&self) -> &[f64] {
        &self.state.observation
    }

    pub fn step(&mut self, action: &[f64]) -> StepResult {
        let res = self.kind.step(&self.state, action);
        self.state = res.next_state.clone();
        res
    }

    pub fn reset(&mut self, rng: &mut RunRng) {
        self.state = self.kind.reset(rng);
        self.episode_return = 0.0;
    }
}

pub(crate) fn clip(x: f64, bound: f64) -> f64 {
    x.clamp(-bound, bound)
}
