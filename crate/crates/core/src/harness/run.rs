//! Running training jobs: in-memory runs, checkpoints, per-run output
//! directories and the worker pool.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::ResolvedConfig;
use super::records::{write_jsonl, Fact, RunIdentity, RunStatus};
use crate::algos::{IterationReport, StepObserver, Trainer};
use crate::taildiag::TailReport;
use crate::{Error, Result};

/// Everything a run produced, free of wall-clock data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: ResolvedConfig,
    pub status: RunStatus,
    /// Last iteration that finished with finite parameters.
    pub last_finite_iteration: Option<u64>,
    pub failure: Option<String>,
    pub reports: Vec<IterationReport>,
    pub tail_reports: Vec<TailReport>,
}

impl RunRecord {
    pub fn identity(&self) -> RunIdentity {
        RunIdentity {
            run_id: self.run_id.clone(),
            seed: self.seed,
            env: self.config.train.env.name().to_string(),
            algorithm: self.config.train.algorithm.name().to_string(),
            config_hash: self.config_hash.clone(),
        }
    }

    pub fn facts(&self) -> Vec<Fact> {
        let id = self.identity();
        let mut out: Vec<Fact> = self.reports.iter().flat_map(|r| id.iteration_facts(r)).collect();
        out.extend(self.tail_reports.iter().map(|t| id.tail_fact(t)));
        let last = self.reports.last().map_or(0, |r| r.iteration);
        out.push(id.status_fact(last, self.status));
        out
    }

    /// Mean return over the last `window` iterations that completed episodes.
    pub fn final_return(&self, window: usize) -> Option<f64> {
        let vals: Vec<f64> = self.reports.iter().rev().filter_map(|r| r.mean_return).take(window).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

pub fn run_id(config: &ResolvedConfig, seed: u64) -> String {
    let t = &config.train;
    format!("{}-{}-e{}-{}-s{}", t.algorithm, t.env, t.epochs, config.hash(), seed)
}

/// Resumable state: the trainer plus the iteration reports produced so far.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub seed: u64,
    pub trainer: Trainer,
    pub reports: Vec<IterationReport>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Config(format!("missing checkpoint {}", path.display())),
            _ => Error::Io(e),
        })?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn checkpoint_name(iteration: u64) -> String {
    format!("iter_{iteration:06}.json")
}

/// Drives a trainer until it has completed `until` iterations.
pub struct RunDriver<'a> {
    pub config: ResolvedConfig,
    pub seed: u64,
    pub trainer: Trainer,
    pub reports: Vec<IterationReport>,
    pub checkpoint_dir: Option<&'a Path>,
}

impl<'a> RunDriver<'a> {
    pub fn new(config: &ResolvedConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            config: config.clone(),
            seed,
            trainer: Trainer::new(config.train.clone(), seed)?,
            reports: Vec::new(),
            checkpoint_dir: None,
        })
    }

    pub fn from_checkpoint(config: &ResolvedConfig, cp: Checkpoint) -> Result<Self> {
        if cp.trainer.config != config.train {
            return Err(Error::Config("checkpoint was written by a different configuration".into()));
        }
        Ok(Self {
            config: config.clone(),
            seed: cp.seed,
            trainer: cp.trainer,
            reports: cp.reports,
            checkpoint_dir: None,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            seed: self.seed,
            trainer: self.trainer.clone(),
            reports: self.reports.clone(),
        }
    }

    /// Runs one iteration; returns its report.
    pub fn step(&mut self, observer: Option<&mut dyn StepObserver>) -> Result<&IterationReport> {
        let report = self.trainer.train_iteration(observer)?;
        self.reports.push(report);
        let every = self.config.checkpoint_every as u64;
        if let Some(dir) = self.checkpoint_dir {
            if every > 0 && self.trainer.iteration.is_multiple_of(every) {
                self.checkpoint().save(&dir.join(checkpoint_name(self.trainer.iteration)))?;
            }
        }
        Ok(self.reports.last().expect("just pushed"))
    }

    /// Trains until `until` iterations are done or the run diverges, and
    /// returns the record.
    pub fn run_until(mut self, until: u64, mut observer: Option<&mut dyn StepObserver>) -> Result<RunRecord> {
        let mut status = RunStatus::Completed;
        let mut failure = None;
        while self.trainer.iteration < until {
            let obs: Option<&mut dyn StepObserver> = match observer {
                Some(ref mut o) => Some(&mut **o),
                None => None,
            };
            match self.step(obs) {
                Ok(_) => {}
                Err(Error::Diverged { iteration, step, detail }) => {
                    status = RunStatus::Diverged;
                    failure = Some(format!("iteration {iteration} step {step}: {detail}"));
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        let config_hash = self.config.hash();
        Ok(RunRecord {
            run_id: run_id(&self.config, self.seed),
            seed: self.seed,
            config_hash,
            last_finite_iteration: self.reports.last().map(|r| r.iteration),
            config: self.config,
            status,
            failure,
            reports: self.reports,
            tail_reports: Vec::new(),
        })
    }
}

/// Trains a fresh run for the configured number of iterations, in memory.
pub fn train_run(config: &ResolvedConfig, seed: u64, observer: Option<&mut dyn StepObserver>) -> Result<RunRecord> {
    RunDriver::new(config, seed)?.run_until(config.iterations as u64, observer)
}

/// Wall-clock data kept apart from the reproducible outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMeta {
    pub run_id: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub overrides: Vec<String>,
    pub config: ResolvedConfig,
    pub config_hash: String,
    pub kl_direction: String,
    pub version: String,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Per-run staging directory; the run becomes visible under `runs/` only
/// once every file is written.
pub struct RunDir {
    pub staging: PathBuf,
    pub target: PathBuf,
}

impl RunDir {
    pub fn create(out: &Path, section: &str, run_id: &str) -> Result<Self> {
        let staging = out.join(".staging").join(format!("{section}-{run_id}"));
        if staging.exists() {
            std::fs::remove_dir_all(&staging)?;
        }
        std::fs::create_dir_all(staging.join("checkpoints"))?;
        let target = out.join(section).join(run_id);
        Ok(Self { staging, target })
    }

    pub fn checkpoints(&self) -> PathBuf {
        self.staging.join("checkpoints")
    }

    pub fn write_record(&self, record: &RunRecord, meta: &RunMeta) -> Result<()> {
        write_jsonl(&self.staging.join("facts.jsonl"), &record.facts())?;
        std::fs::write(self.staging.join("run.json"), serde_json::to_string_pretty(record)?)?;
        std::fs::write(self.staging.join("meta.json"), serde_json::to_string_pretty(meta)?)?;
        Ok(())
    }

    /// Moves the staged directory into place, replacing an older copy.
    pub fn publish(self) -> Result<PathBuf> {
        if let Some(parent) = self.target.parent() {
            std::fs::create_dir_all(parent)?;
        }
        if self.target.exists() {
            std::fs::remove_dir_all(&self.target)?;
        }
        std::fs::rename(&self.staging, &self.target)?;
        Ok(self.target)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub run_id: String,
    pub path: String,
    pub seed: u64,
    pub algorithm: String,
    pub env: String,
    pub config_hash: String,
    pub status: RunStatus,
}

pub fn append_index(out: &Path, entry: &IndexEntry) -> Result<()> {
    use std::io::Write;
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(out.join("index.jsonl"))?;
    writeln!(f, "{}", serde_json::to_string(entry)?)?;
    Ok(())
}

/// Runs `job` over `items` on up to `workers` threads; results come back in
/// input order.
pub fn run_pool<T, R, F>(items: Vec<T>, workers: usize, job: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let n = items.len();
    let workers = workers.clamp(1, n.max(1));
    let queue: Vec<Mutex<Option<T>>> = items.into_iter().map(|t| Mutex::new(Some(t))).collect();
    let results: Vec<Mutex<Option<R>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let item = queue[i].lock().expect("queue lock").take().expect("each item taken once");
                let r = job(item);
                *results[i].lock().expect("result lock") = Some(r);
            });
        }
    });
    results
        .into_iter()
        .map(|m| m.into_inner().expect("result lock").expect("every job ran"))
        .collect()
}
