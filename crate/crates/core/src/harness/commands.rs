//! The four batch commands: train, diagnose, synth and report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{parse_literal, HarnessConfig, ResolvedConfig};
use super::records::{read_jsonl, write_jsonl, Fact, RunStatus};
use super::run::{
    append_index, checkpoint_name, run_id, run_pool, unix_now, Checkpoint, IndexEntry, RunDir, RunDriver, RunMeta,
    RunRecord,
};
use super::stages::{locate_stages, normalized_return, running_mean_returns, StageIterations};
use super::svg::{LineChart, Series};
use crate::env::random_agent_return;
use crate::robust::{blocks_for_delta, gmom_bench};
use crate::taildiag::{
    ratio_tail_demo, synth_pareto_study, CaptureConfig, CaptureMode, CapturedStep, CoordinateLaw, GradientCapture,
    Quantity, RatioTailSpec, Stage,
};
use crate::{Error, Result};

pub const KL_DIRECTION: &str = "KL(old || new), averaged over the iteration's visited states";
pub const RANDOM_AGENT_EPISODES: usize = 20;

fn meta(record: &RunRecord, overrides: &[String], started: u64) -> RunMeta {
    RunMeta {
        run_id: record.run_id.clone(),
        started_unix: started,
        finished_unix: unix_now(),
        overrides: overrides.to_vec(),
        config: record.config.clone(),
        config_hash: record.config_hash.clone(),
        kl_direction: KL_DIRECTION.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

/// Shared options of commands that fan out over seeds.
#[derive(Clone, Debug)]
pub struct BatchOptions {
    pub seeds: Vec<u64>,
    pub overrides: Vec<String>,
    pub out: PathBuf,
    pub workers: usize,
}

fn publish(out: &Path, dir: RunDir, record: &RunRecord, overrides: &[String], started: u64, section: &str) -> Result<PathBuf> {
    dir.write_record(record, &meta(record, overrides, started))?;
    let path = dir.publish()?;
    append_index(
        out,
        &IndexEntry {
            run_id: record.run_id.clone(),
            path: format!("{section}/{}", record.run_id),
            seed: record.seed,
            algorithm: record.config.train.algorithm.to_string(),
            env: record.config.train.env.to_string(),
            config_hash: record.config_hash.clone(),
            status: record.status,
        },
    )?;
    Ok(path)
}

fn resolve_for_seed(config: &HarnessConfig, overrides: &[String], seed: u64) -> Result<ResolvedConfig> {
    let mut c = config.with_overrides(overrides)?;
    c.seed = seed;
    c.resolve()
}

/// Trains one run per seed, writing `runs/<run_id>/` with facts, summary,
/// metadata and periodic checkpoints.
pub fn cmd_train(config: &HarnessConfig, opts: &BatchOptions) -> Result<Vec<RunRecord>> {
    std::fs::create_dir_all(&opts.out)?;
    let resolved: Vec<(u64, ResolvedConfig)> = opts
        .seeds
        .iter()
        .map(|&s| resolve_for_seed(config, &opts.overrides, s).map(|r| (s, r)))
        .collect::<Result<_>>()?;
    let results = run_pool(resolved, opts.workers, |(seed, cfg)| -> Result<(RunRecord, RunDir, u64)> {
        let started = unix_now();
        let dir = RunDir::create(&opts.out, "runs", &run_id(&cfg, seed))?;
        let cp_dir = dir.checkpoints();
        let mut driver = RunDriver::new(&cfg, seed)?;
        driver.checkpoint_dir = Some(&cp_dir);
        let record = driver.run_until(cfg.iterations as u64, None)?;
        Ok((record, dir, started))
    });
    let mut records = Vec::new();
    for r in results {
        let (record, dir, started) = r?;
        publish(&opts.out, dir, &record, &opts.overrides, started, "runs")?;
        records.push(record);
    }
    Ok(records)
}

#[derive(Clone, Debug, PartialEq)]
pub enum DiagnoseMode {
    OnPolicy,
    OffPolicy(Vec<Stage>),
}

#[derive(Clone, Debug)]
pub struct DiagnoseOptions {
    pub mode: DiagnoseMode,
    /// Existing run directory whose history and checkpoints are reused.
    pub from: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseOutcome {
    pub record: RunRecord,
    pub stages: Option<StageIterations>,
    pub absent_stages: Vec<Stage>,
    pub steps: Vec<CapturedStep>,
}

fn load_record(dir: &Path) -> Result<RunRecord> {
    let path = dir.join("run.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|_| Error::Config(format!("no run record at {}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Latest checkpoint in `dir/checkpoints` written at or before `iteration`.
fn checkpoint_at_or_before(dir: &Path, iteration: u64) -> Result<Option<Checkpoint>> {
    let cp_dir = dir.join("checkpoints");
    if !cp_dir.is_dir() {
        return Err(Error::Config(format!("missing checkpoint directory {}", cp_dir.display())));
    }
    let mut best: Option<u64> = None;
    for entry in std::fs::read_dir(&cp_dir)? {
        let name = entry?.file_name().to_string_lossy().to_string();
        if let Some(n) = name.strip_prefix("iter_").and_then(|s| s.strip_suffix(".json")).and_then(|s| s.parse::<u64>().ok()) {
            if n <= iteration && best.is_none_or(|b| n > b) {
                best = Some(n);
            }
        }
    }
    best.map(|n| Checkpoint::load(&cp_dir.join(checkpoint_name(n)))).transpose()
}

/// Captures per-sample gradients and tail statistics for one seed.
pub fn diagnose_run(cfg: &ResolvedConfig, seed: u64, opts: &DiagnoseOptions) -> Result<DiagnoseOutcome> {
    let capture_base = |mode| CaptureConfig {
        mode,
        ad_directions: cfg.capture.ad_directions,
        progressive: matches!(mode, CaptureMode::OffPolicy { .. }),
        clip_eps: cfg.capture.clip_eps,
        grad_clip: cfg.capture.grad_clip,
        keep_samples: true,
        seed,
    };
    match &opts.mode {
        DiagnoseMode::OnPolicy => {
            let mut cap = GradientCapture::new(capture_base(CaptureMode::OnPolicy {
                every: cfg.capture.on_policy_every,
            }));
            let mut record = RunDriver::new(cfg, seed)?.run_until(cfg.iterations as u64, Some(&mut cap))?;
            record.tail_reports = cap.reports;
            Ok(DiagnoseOutcome {
                record,
                stages: None,
                absent_stages: Vec::new(),
                steps: cap.steps,
            })
        }
        DiagnoseMode::OffPolicy(stages) => {
            let needs_history = stages.iter().any(|s| matches!(s, Stage::HalfMax | Stage::Max));
            let history = match (&opts.from, needs_history) {
                (Some(dir), _) => Some(load_record(dir)?),
                (None, true) => Some(RunDriver::new(cfg, seed)?.run_until(cfg.iterations as u64, None)?),
                (None, false) => None,
            };
            let located = history.as_ref().map(|h| {
                let random = random_agent_return(cfg.train.env, RANDOM_AGENT_EPISODES, 0);
                locate_stages(&h.reports, random, cfg.target_return)
            });
            let mut targets: Vec<(Stage, u64)> = Vec::new();
            let mut absent = Vec::new();
            for &stage in stages {
                let it = match stage {
                    Stage::Init => Some(0),
                    Stage::HalfMax => located.and_then(|l| l.half_max),
                    Stage::Max => located.and_then(|l| l.max),
                    Stage::Iteration => {
                        return Err(Error::Config("off-policy capture needs init, 50%-max or max stages".into()))
                    }
                };
                match it {
                    Some(i) => targets.push((stage, i)),
                    None => absent.push(stage),
                }
            }
            let mut reports = Vec::new();
            let mut steps = Vec::new();
            let mut last_record = None;
            for (stage, it) in targets {
                let driver = match &opts.from {
                    Some(dir) => match checkpoint_at_or_before(dir, it)? {
                        Some(cp) => RunDriver::from_checkpoint(cfg, cp)?,
                        None => RunDriver::new(cfg, seed)?,
                    },
                    None => RunDriver::new(cfg, seed)?,
                };
                let mut cap = GradientCapture::new(capture_base(CaptureMode::OffPolicy { iteration: it, stage }));
                let record = driver.run_until(it + 1, Some(&mut cap))?;
                reports.extend(cap.reports);
                steps.extend(cap.steps);
                last_record = Some(record);
            }
            let mut record = match (last_record, history) {
                (_, Some(h)) => h,
                (Some(r), None) => r,
                (None, None) => RunDriver::new(cfg, seed)?.run_until(1, None)?,
            };
            record.tail_reports = reports;
            Ok(DiagnoseOutcome {
                record,
                stages: located,
                absent_stages: absent,
                steps,
            })
        }
    }
}

/// CSV with one row per captured sample.
pub fn samples_csv(steps: &[CapturedStep]) -> String {
    let mut out = String::from("stage,iteration,step,variant,sample");
    for q in Quantity::PER_SAMPLE {
        let _ = write!(out, ",{}", q.label());
    }
    out.push('\n');
    for s in steps {
        let cols: Vec<Vec<f64>> = Quantity::PER_SAMPLE
            .iter()
            .map(|&q| match q {
                // Keep row alignment: divisions by zero become NaN instead of being dropped.
                Quantity::ActorOverAdvantage => s
                    .samples
                    .actor_norms
                    .iter()
                    .zip(&s.samples.advantages)
                    .map(|(n, a)| if *a == 0.0 { f64::NAN } else { n / a.abs() })
                    .collect(),
                _ => s.samples.quantity(q),
            })
            .collect();
        for i in 0..s.samples.actor_norms.len() {
            let _ = write!(
                out,
                "{},{},{},{},{}",
                s.stage.label(),
                s.iteration,
                s.step,
                s.variant.map_or("run", |v| v.label()),
                i
            );
            for c in &cols {
                let _ = write!(out, ",{}", c[i]);
            }
            out.push('\n');
        }
    }
    out
}

pub fn cmd_diagnose(config: &HarnessConfig, opts: &BatchOptions, diag: &DiagnoseOptions) -> Result<Vec<DiagnoseOutcome>> {
    std::fs::create_dir_all(&opts.out)?;
    if diag.from.is_some() && opts.seeds.len() > 1 {
        return Err(Error::Config("--from reuses one run; pass a single seed".into()));
    }
    let resolved: Vec<(u64, ResolvedConfig)> = opts
        .seeds
        .iter()
        .map(|&s| resolve_for_seed(config, &opts.overrides, s).map(|r| (s, r)))
        .collect::<Result<_>>()?;
    let section = match diag.mode {
        DiagnoseMode::OnPolicy => "diagnose-on-policy",
        DiagnoseMode::OffPolicy(_) => "diagnose-off-policy",
    };
    let results = run_pool(resolved, opts.workers, |(seed, cfg)| {
        let started = unix_now();
        diagnose_run(&cfg, seed, diag).map(|o| (o, started))
    });
    let mut outcomes = Vec::new();
    for r in results {
        let (outcome, started) = r?;
        let dir = RunDir::create(&opts.out, section, &outcome.record.run_id)?;
        std::fs::write(dir.staging.join("samples.csv"), samples_csv(&outcome.steps))?;
        let id = outcome.record.identity();
        let absent: Vec<Fact> = outcome
            .absent_stages
            .iter()
            .map(|s| Fact {
                stage: Some(s.label().to_string()),
                ..id.status_fact(0, RunStatus::Completed)
            })
            .map(|f| Fact {
                quantity: "stage".into(),
                estimator: "absent".into(),
                ..f
            })
            .collect();
        write_jsonl(&dir.staging.join("absent_stages.jsonl"), &absent)?;
        std::fs::remove_dir_all(dir.checkpoints())?;
        publish(&opts.out, dir, &outcome.record, &opts.overrides, started, section)?;
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SynthStudy {
    KurtosisStudy,
    RatioTail,
    GmomBench,
}

impl std::str::FromStr for SynthStudy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kurtosis_study" => Ok(SynthStudy::KurtosisStudy),
            "ratio_tail" => Ok(SynthStudy::RatioTail),
            "gmom_bench" => Ok(SynthStudy::GmomBench),
            _ => Err(Error::Config(format!("unknown study `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct KurtosisParams {
    law: CoordinateLaw,
    shapes: Vec<f64>,
    dim: usize,
    sizes: Vec<usize>,
    seeds: u64,
    seed: u64,
}

impl Default for KurtosisParams {
    fn default() -> Self {
        Self {
            law: CoordinateLaw::Pareto,
            shapes: vec![2.0],
            dim: 100,
            sizes: vec![100, 1000, 10_000],
            seeds: 10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RatioTailParams {
    sigma1_sq: f64,
    sigma2_sq: f64,
    n: usize,
    seed: u64,
}

impl Default for RatioTailParams {
    fn default() -> Self {
        Self {
            sigma1_sq: 2.0,
            sigma2_sq: 1.0,
            n: 1_000_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GmomParams {
    shape: f64,
    n: usize,
    delta: f64,
    blocks: Option<usize>,
    trials: usize,
    weiszfeld_iters: usize,
    seed: u64,
}

impl Default for GmomParams {
    fn default() -> Self {
        Self {
            shape: 2.1,
            n: 10_000,
            delta: 0.05,
            blocks: None,
            trials: 200,
            weiszfeld_iters: 100,
            seed: 0,
        }
    }
}

fn parse_params<T: for<'de> Deserialize<'de>>(params: &[String]) -> Result<T> {
    let mut table = toml::Table::new();
    for p in params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("parameter `{p}` is not key=value")))?;
        let parsed = parse_literal(v.trim());
        table.insert(k.trim().to_string(), parsed);
    }
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
}

/// Runs a synthetic study and returns its CSV text.
pub fn synth_csv(study: SynthStudy, params: &[String]) -> Result<String> {
    let mut out = String::new();
    match study {
        SynthStudy::KurtosisStudy => {
            let p: KurtosisParams = parse_params(params)?;
            let seeds: Vec<u64> = (p.seed..p.seed + p.seeds).collect();
            out.push_str("law,shape,dim,size,seed,kurtosis_root\n");
            for &shape in &p.shapes {
                for row in synth_pareto_study(p.law, shape, p.dim, &p.sizes, &seeds)? {
                    for (s, k) in seeds.iter().zip(&row.per_seed) {
                        let law = serde_json::to_value(row.law)?;
                        let _ = writeln!(out, "{},{},{},{},{},{}", law.as_str().unwrap_or("?"), shape, p.dim, row.size, s, k);
                    }
                }
            }
        }
        SynthStudy::RatioTail => {
            let p: RatioTailParams = parse_params(params)?;
            let spec = RatioTailSpec::new(p.sigma1_sq.sqrt(), p.sigma2_sq.sqrt())?;
            let r = ratio_tail_demo(spec, p.n, p.seed)?;
            out.push_str("sigma1_sq,sigma2_sq,n,seed,predicted_alpha,empirical_alpha,max_ratio,bound_violations\n");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                p.sigma1_sq,
                p.sigma2_sq,
                p.n,
                p.seed,
                r.predicted_alpha,
                r.empirical_alpha.map_or(String::new(), |a| a.to_string()),
                r.max_ratio,
                r.bound_violations
            );
        }
        SynthStudy::GmomBench => {
            let p: GmomParams = parse_params(params)?;
            let blocks = match p.blocks {
                Some(b) => b,
                None => blocks_for_delta(p.delta)?,
            };
            let r = gmom_bench(p.shape, p.n, blocks, p.trials, p.weiszfeld_iters, p.seed)?;
            out.push_str("shape,n,delta,blocks,trials,mean_p95,gmom_p95,gmom_wins,non_monotone_trials\n");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                p.shape, p.n, p.delta, blocks, p.trials, r.mean_p95, r.gmom_p95, r.gmom_wins, r.non_monotone_trials
            );
        }
    }
    Ok(out)
}

pub fn cmd_synth(study: SynthStudy, params: &[String], out: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    let name = match study {
        SynthStudy::KurtosisStudy => "kurtosis_study.csv",
        SynthStudy::RatioTail => "ratio_tail.csv",
        SynthStudy::GmomBench => "gmom_bench.csv",
    };
    let path = out.join(name);
    std::fs::write(&path, synth_csv(study, params)?)?;
    Ok(path)
}

#[derive(Clone, Debug)]
pub struct ReportOptions {
    pub inputs: Vec<PathBuf>,
    pub out: PathBuf,
    /// Aggregate runs with differing config hashes inside one series.
    pub force: bool,
}

/// Aggregated per-iteration curve of one series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesCurve {
    pub label: String,
    pub env: String,
    pub algorithm: String,
    pub runs: usize,
    pub iterations: Vec<u64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Series name: algorithm/env/epochs, plus a marker when advantages are clipped.
pub fn series_label(cfg: &ResolvedConfig) -> String {
    let t = &cfg.train;
    let mut label = format!("{}/{}/e{}", t.algorithm, t.env, t.epochs);
    if t.advantage_clip.is_some() {
        label.push_str("/advclip");
    }
    label
}

fn collect_run_dirs(inputs: &[PathBuf]) -> Result<(Vec<PathBuf>, Vec<PathBuf>)> {
    let mut runs = Vec::new();
    let mut csvs = Vec::new();
    for p in inputs {
        if p.is_file() && p.extension().is_some_and(|e| e == "csv") {
            csvs.push(p.clone());
        } else if p.join("facts.jsonl").is_file() {
            runs.push(p.clone());
        } else if p.is_dir() {
            let mut found = false;
            let mut entries: Vec<PathBuf> = Vec::new();
            for section in std::fs::read_dir(p)? {
                let section = section?.path();
                if section.is_dir() && !section.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')) {
                    for e in std::fs::read_dir(&section)? {
                        let e = e?.path();
                        if e.join("facts.jsonl").is_file() {
                            entries.push(e);
                            found = true;
                        }
                    }
                }
            }
            entries.sort();
            runs.extend(entries);
            if !found {
                return Err(Error::Schema(format!("no run records under {}", p.display())));
            }
        } else {
            return Err(Error::Schema(format!("unrecognised report input {}", p.display())));
        }
    }
    Ok((runs, csvs))
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let v = values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Aggregates per-iteration values of `pick` across the runs of each series.
fn aggregate<F>(records: &[RunRecord], pick: F) -> Vec<SeriesCurve>
where
    F: Fn(&RunRecord) -> Vec<(u64, f64)>,
{
    let mut groups: BTreeMap<String, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(series_label(&r.config)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(label, runs)| {
            let mut by_iter: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
            for r in &runs {
                for (i, v) in pick(r) {
                    if v.is_finite() {
                        by_iter.entry(i).or_default().push(v);
                    }
                }
            }
            let (iterations, stats): (Vec<u64>, Vec<(f64, f64)>) =
                by_iter.into_iter().map(|(i, v)| (i, mean_std(&v))).unzip();
            SeriesCurve {
                env: runs[0].config.train.env.to_string(),
                algorithm: runs[0].config.train.algorithm.to_string(),
                runs: runs.len(),
                label,
                iterations,
                mean: stats.iter().map(|s| s.0).collect(),
                std: stats.iter().map(|s| s.1).collect(),
            }
        })
        .collect()
}

fn chart(title: &str, y: &str, curves: &[SeriesCurve]) -> LineChart {
    LineChart {
        title: title.to_string(),
        x_label: "iteration".to_string(),
        y_label: y.to_string(),
        series: curves
            .iter()
            .map(|c| Series {
                label: c.label.clone(),
                points: c.iterations.iter().zip(&c.mean).map(|(&i, &m)| (i as f64, m)).collect(),
                spread: (c.runs > 1).then(|| c.std.clone()),
            })
            .collect(),
    }
}

fn curves_csv(curves: &[SeriesCurve]) -> String {
    let mut out = String::from("series,env,algorithm,runs,iteration,mean,std\n");
    for c in curves {
        for ((i, m), s) in c.iterations.iter().zip(&c.mean).zip(&c.std) {
            let _ = writeln!(out, "{},{},{},{},{},{},{}", c.label, c.env, c.algorithm, c.runs, i, m, s);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub returns: Vec<SeriesCurve>,
    pub normalized: Vec<SeriesCurve>,
    pub files: Vec<PathBuf>,
}

/// Aggregates run directories (and kurtosis-study CSVs) into CSV tables and
/// SVG charts.
pub fn cmd_report(opts: &ReportOptions) -> Result<ReportSummary> {
    let (run_dirs, csvs) = collect_run_dirs(&opts.inputs)?;
    if run_dirs.is_empty() && csvs.is_empty() {
        return Err(Error::Empty("report inputs"));
    }
    std::fs::create_dir_all(&opts.out)?;
    // A diagnose directory can carry the same run as its training directory;
    // count each run id once.
    let mut seen = std::collections::BTreeSet::new();
    let mut records = Vec::new();
    let mut kept_dirs = Vec::new();
    for d in &run_dirs {
        let r = load_record(d)?;
        if seen.insert(r.run_id.clone()) {
            records.push(r);
            kept_dirs.push(d.clone());
        }
    }
    let run_dirs = kept_dirs;
    for (d, r) in run_dirs.iter().zip(&records) {
        let facts: Vec<Fact> = read_jsonl(&d.join("facts.jsonl"))?;
        if let Some(f) = facts.iter().find(|f| f.config_hash != r.config_hash || f.run_id != r.run_id) {
            return Err(Error::Schema(format!("{}: fact for {} does not match run record", d.display(), f.run_id)));
        }
    }
    let mut hashes: BTreeMap<String, std::collections::BTreeSet<String>> = BTreeMap::new();
    for r in &records {
        hashes.entry(series_label(&r.config)).or_default().insert(r.config_hash.clone());
    }
    if !opts.force {
        if let Some((label, set)) = hashes.iter().find(|(_, s)| s.len() > 1) {
            return Err(Error::Schema(format!(
                "series {label} mixes config hashes {set:?}; pass --force to aggregate anyway"
            )));
        }
    }
    let mut files = Vec::new();
    let mut write = |name: &str, text: String| -> Result<()> {
        let p = opts.out.join(name);
        std::fs::write(&p, text)?;
        files.push(p);
        Ok(())
    };

    let returns = aggregate(&records, |r| {
        running_mean_returns(&r.reports, 1)
            .iter()
            .zip(&r.reports)
            .filter_map(|(m, rep)| m.map(|m| (rep.iteration, m)))
            .collect()
    });
    let kl = aggregate(&records, |r| r.reports.iter().map(|rep| (rep.iteration, rep.mean_kl)).collect());
    let mut normalized = Vec::new();
    if !records.is_empty() {
        write("returns.csv", curves_csv(&returns))?;
        write("returns.svg", chart("Mean episode return", "return", &returns).render())?;
        write("kl.csv", curves_csv(&kl))?;
        write("kl.svg", chart("Mean KL(old || new) per iteration", "KL", &kl).render())?;

        // Normalise every environment against the best PPO mean curve value.
        let mut rows = String::from("series,env,random_return,best_ppo_return,final_mean_return,final_normalized\n");
        let envs: std::collections::BTreeSet<String> = returns.iter().map(|c| c.env.clone()).collect();
        for env in envs {
            let Some(best) = returns
                .iter()
                .filter(|c| c.env == env && c.algorithm == "ppo")
                .flat_map(|c| c.mean.iter().copied())
                .fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.max(v))))
            else {
                continue;
            };
            let kind: crate::env::EnvKind = env.parse()?;
            let random = random_agent_return(kind, RANDOM_AGENT_EPISODES, 0);
            for c in returns.iter().filter(|c| c.env == env) {
                let norm = SeriesCurve {
                    mean: c.mean.iter().map(|&m| normalized_return(m, random, best)).collect(),
                    std: c.std.iter().map(|&s| s / (best - random).abs()).collect(),
                    ..c.clone()
                };
                let last = norm.mean.last().copied().unwrap_or(f64::NAN);
                let _ = writeln!(
                    rows,
                    "{},{},{},{},{},{}",
                    c.label,
                    env,
                    random,
                    best,
                    c.mean.last().copied().unwrap_or(f64::NAN),
                    last
                );
                normalized.push(norm);
            }
        }
        if !normalized.is_empty() {
            write("normalized.csv", rows)?;
            write(
                "normalized.svg",
                chart("Normalized return (random = 0, best PPO = 1)", "normalized return", &normalized).render(),
            )?;
        }

        let kurt = aggregate(&records, |r| {
            r.tail_reports
                .iter()
                .filter(|t| {
                    t.quantity == Quantity::ActorGradNorm
                        && t.estimator == crate::taildiag::Estimator::Kurtosis
                        && t.variant.is_none()
                        && t.stage == Stage::Iteration
                })
                .filter_map(|t| t.value.map(|v| (t.iteration, v)))
                .collect()
        });
        if kurt.iter().any(|c| !c.iterations.is_empty()) {
            write("kurtosis.csv", curves_csv(&kurt))?;
            write("kurtosis.svg", chart("Actor gradient-norm kurtosis (on-policy)", "kurtosis^(1/4)", &kurt).render())?;
        }
    }

    for (k, csv) in csvs.iter().enumerate() {
        let text = std::fs::read_to_string(csv)?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header != "law,shape,dim,size,seed,kurtosis_root" {
            return Err(Error::Schema(format!("{}: unsupported CSV schema `{header}`", csv.display())));
        }
        let mut by: BTreeMap<String, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
        for (ln, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split(',').collect();
            let bad = || Error::Schema(format!("{}:{}: malformed row", csv.display(), ln + 2));
            if cols.len() != 6 {
                return Err(bad());
            }
            let size: u64 = cols[3].parse().map_err(|_| bad())?;
            let k: f64 = cols[5].parse().map_err(|_| bad())?;
            by.entry(format!("{} shape {}", cols[0], cols[1])).or_default().entry(size).or_default().push(k);
        }
        let series = by
            .into_iter()
            .map(|(label, sizes)| {
                let stats: Vec<(f64, f64, f64)> = sizes
                    .into_iter()
                    .map(|(s, v)| {
                        let (m, sd) = mean_std(&v);
                        ((s as f64).log10(), m, sd)
                    })
                    .collect();
                Series {
                    label,
                    points: stats.iter().map(|s| (s.0, s.1)).collect(),
                    spread: Some(stats.iter().map(|s| s.2).collect()),
                }
            })
            .collect();
        let c = LineChart {
            title: "Norm kurtosis vs sample size".into(),
            x_label: "log10(sample size)".into(),
            y_label: "kurtosis^(1/4)".into(),
            series,
        };
        write(&format!("kurtosis_study_{k}.svg"), c.render())?;
    }
    Ok(ReportSummary {
        returns,
        normalized,
        files,
    })
}
