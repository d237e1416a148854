//! Harness configuration: TOML file, `key=value` overrides, resolution into a
//! training configuration, and the config hash.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algos::{Algorithm, LossConfig, TrainConfig};
use crate::env::{EnvKind, RewardNoise};
use crate::robust::{BlockOptimizer, GmomConfig, DEFAULT_GMOM_BLOCKS, DEFAULT_WEISZFELD_ITERS};
use crate::nn::OptimizerKind;
use crate::{Error, Result};

pub const PPO_LEARNING_RATE: f64 = 3e-4;
pub const NOCLIP_LEARNING_RATE: f64 = 8e-5;
pub const A2C_LEARNING_RATE: f64 = 7e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaptureSettings {
    pub on_policy_every: u64,
    pub ad_directions: usize,
    pub clip_eps: f64,
    pub grad_clip: f64,
}

impl Default for CaptureSettings {
    fn default() -> Self {
        Self {
            on_policy_every: 10,
            ad_directions: 1000,
            clip_eps: 0.2,
            grad_clip: 0.5,
        }
    }
}

/// User-facing configuration. Fields left unset take algorithm- or
/// environment-specific defaults during [`HarnessConfig::resolve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub algorithm: Algorithm,
    pub env: EnvKind,
    pub seed: u64,
    pub iterations: Option<usize>,
    pub steps_per_iter: usize,
    pub minibatches: Option<usize>,
    pub epochs: Option<usize>,
    /// Replaces `epochs` for the offline-epoch ablation.
    pub offline_epochs: Option<usize>,
    pub gamma: f64,
    pub lambda: f64,
    pub clip_eps: f64,
    pub value_coeff: f64,
    pub entropy_coeff: f64,
    pub grad_clip: f64,
    pub learning_rate: Option<f64>,
    pub gmom_blocks: usize,
    pub weiszfeld_iters: usize,
    pub advantage_clip: Option<f64>,
    pub target_return: Option<f64>,
    pub hidden: Vec<usize>,
    pub log_std_init: f64,
    pub actor_head_gain: f64,
    pub critic_head_gain: f64,
    pub reward_noise: Option<RewardNoise>,
    /// Write a checkpoint every this many iterations (0 disables).
    pub checkpoint_every: usize,
    pub capture: CaptureSettings,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Ppo,
            env: EnvKind::Pendulum,
            seed: 0,
            iterations: None,
            steps_per_iter: 2048,
            minibatches: None,
            epochs: None,
            offline_epochs: None,
            gamma: 0.99,
            lambda: 0.95,
            clip_eps: 0.2,
            value_coeff: 2.0,
            entropy_coeff: 0.0,
            grad_clip: 0.5,
            learning_rate: None,
            gmom_blocks: DEFAULT_GMOM_BLOCKS,
            weiszfeld_iters: DEFAULT_WEISZFELD_ITERS,
            advantage_clip: None,
            target_return: None,
            hidden: vec![64, 64],
            log_std_init: 0.0,
            actor_head_gain: 0.01,
            critic_head_gain: 1.0,
            reward_noise: None,
            checkpoint_every: 50,
            capture: CaptureSettings::default(),
        }
    }
}

pub fn default_iterations(env: EnvKind) -> usize {
    match env {
        EnvKind::Pendulum => 300,
        EnvKind::Pointmass => 150,
    }
}

/// Return regarded as "solved" for locating the half-way training stage.
pub fn default_target_return(env: EnvKind) -> f64 {
    match env {
        EnvKind::Pendulum => -200.0,
        EnvKind::Pointmass => -20.0,
    }
}

/// Fully resolved configuration: what actually runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub train: TrainConfig,
    pub iterations: usize,
    pub target_return: f64,
    pub checkpoint_every: usize,
    pub capture: CaptureSettings,
}

impl ResolvedConfig {
    /// SHA-256 over the canonical JSON of everything except the seed.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }
}

impl HarnessConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Applies `key=value` overrides (dotted keys reach nested tables; values
    /// are TOML literals, bare words are taken as strings).
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut doc = toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for ov in overrides {
            let (key, raw) = ov
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{ov}` is not key=value")))?;
            let value = parse_literal(raw.trim());
            set_dotted(&mut doc, key.trim(), value)?;
        }
        doc.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn learning_rate_for(&self) -> f64 {
        self.learning_rate.unwrap_or(match self.algorithm {
            Algorithm::Ppo => PPO_LEARNING_RATE,
            Algorithm::PpoNoclip | Algorithm::RobustPpoNoclip => NOCLIP_LEARNING_RATE,
            Algorithm::A2c => A2C_LEARNING_RATE,
        })
    }

    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let a2c = self.algorithm == Algorithm::A2c;
        let epochs = self.offline_epochs.or(self.epochs).unwrap_or(if a2c { 1 } else { 10 });
        let minibatches = self.minibatches.unwrap_or(if a2c { 1 } else { 32 });
        let gmom = GmomConfig {
            blocks: self.gmom_blocks,
            weiszfeld_iters: self.weiszfeld_iters,
            block_optimizer: BlockOptimizer::Sgd,
            outer_optimizer: OptimizerKind::Adam,
        };
        let loss = match self.algorithm {
            Algorithm::Ppo => LossConfig::ppo(self.clip_eps, self.value_coeff, self.entropy_coeff, self.grad_clip),
            Algorithm::PpoNoclip => LossConfig::ppo_noclip(self.value_coeff, self.entropy_coeff),
            Algorithm::RobustPpoNoclip => LossConfig::robust_ppo_noclip(self.value_coeff, self.entropy_coeff, gmom),
            Algorithm::A2c => LossConfig::a2c(self.value_coeff, self.entropy_coeff),
        };
        let train = TrainConfig {
            algorithm: self.algorithm,
            env: self.env,
            steps_per_iter: self.steps_per_iter,
            minibatches,
            epochs,
            gamma: self.gamma,
            lambda: self.lambda,
            learning_rate: self.learning_rate_for(),
            loss,
            hidden: self.hidden.clone(),
            log_std_init: self.log_std_init,
            actor_head_gain: self.actor_head_gain,
            critic_head_gain: self.critic_head_gain,
            advantage_clip: self.advantage_clip,
            reward_noise: self.reward_noise,
        };
        train.validate()?;
        if let Some(n) = &self.reward_noise {
            if !(n.scale >= 0.0 && n.tail_index > 0.0 && (0.0..=1.0).contains(&n.prob)) {
                return Err(Error::Config("reward noise needs scale ≥ 0, tail index > 0, prob in [0, 1]".into()));
            }
        }
        let iterations = self.iterations.unwrap_or_else(|| default_iterations(self.env));
        if iterations == 0 {
            return Err(Error::Config("iterations must be positive".into()));
        }
        Ok(ResolvedConfig {
            train,
            iterations,
            target_return: self.target_return.unwrap_or_else(|| default_target_return(self.env)),
            checkpoint_every: self.checkpoint_every,
            capture: self.capture.clone(),
        })
    }
}

/// A TOML literal, or the raw text as a string when it does not parse.
pub(crate) fn parse_literal(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_dotted(doc: &mut toml::Value, key: &str, value: toml::Value) -> Result<()> {
    let mut parts = key.split('.').peekable();
    let mut cur = doc;
    while let Some(part) = parts.next() {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}` descends into a non-table")))?;
        if parts.peek().is_none() {
            table.insert(part.to_string(), value);
            return Ok(());
        }
        cur = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    Err(Error::Config(format!("empty override key `{key}`")))
}
