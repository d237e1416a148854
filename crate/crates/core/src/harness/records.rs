//! One-fact-per-line JSONL records and run summaries.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algos::IterationReport;
use crate::taildiag::TailReport;
use crate::{Error, Result};

/// One observed number. Optional fields are omitted from the JSON when absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub run_id: String,
    pub seed: u64,
    pub env: String,
    pub algorithm: String,
    pub iteration: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    pub quantity: String,
    pub estimator: String,
    pub value: Option<f64>,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
}

/// Identity shared by every fact of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunIdentity {
    pub run_id: String,
    pub seed: u64,
    pub env: String,
    pub algorithm: String,
    pub config_hash: String,
}

impl RunIdentity {
    fn fact(&self, iteration: u64, quantity: &str, estimator: &str, value: Option<f64>) -> Fact {
        Fact {
            run_id: self.run_id.clone(),
            seed: self.seed,
            env: self.env.clone(),
            algorithm: self.algorithm.clone(),
            iteration,
            step: None,
            quantity: quantity.to_string(),
            estimator: estimator.to_string(),
            value,
            config_hash: self.config_hash.clone(),
            stage: None,
            variant: None,
        }
    }

    /// Facts derived from one training iteration.
    pub fn iteration_facts(&self, r: &IterationReport) -> Vec<Fact> {
        let it = r.iteration;
        let mut out = vec![
            self.fact(it, "return", "mean", r.mean_return),
            self.fact(it, "episodes", "count", Some(r.episodes as f64)),
            self.fact(it, "reward", "mean", Some(r.mean_reward)),
            self.fact(it, "kl", "mean", Some(r.mean_kl)),
            self.fact(it, "ratio", "first_step_mean", Some(r.ratio.first_step_mean)),
            self.fact(it, "ratio", "mean", Some(r.ratio.mean)),
            self.fact(it, "ratio", "min", Some(r.ratio.min)),
            self.fact(it, "ratio", "max", Some(r.ratio.max)),
            self.fact(it, "ratio", "outside_band", Some(r.ratio.outside_band)),
            self.fact(it, "actor_loss", "mean", Some(r.actor_loss)),
            self.fact(it, "critic_loss", "mean", Some(r.critic_loss)),
            self.fact(it, "advantage", "kurtosis", r.advantage_kurtosis),
            self.fact(it, "raw_advantage", "kurtosis", r.raw_advantage_kurtosis),
        ];
        for (d, s) in r.policy_std.iter().enumerate() {
            out.push(self.fact(it, &format!("policy_std_{d}"), "value", Some(*s)));
        }
        out
    }

    pub fn tail_fact(&self, t: &TailReport) -> Fact {
        Fact {
            step: Some(t.step),
            stage: Some(t.stage.label().to_string()),
            variant: t.variant.map(|v| v.label().to_string()),
            ..self.fact(t.iteration, t.quantity.label(), t.estimator.label(), t.value)
        }
    }

    pub fn status_fact(&self, iteration: u64, status: RunStatus) -> Fact {
        self.fact(iteration, "status", status.label(), None)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged,
}

impl RunStatus {
    pub fn label(self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::Diverged => "diverged",
        }
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut f, item)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Schema(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}
