use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use pgtail::harness::{
    cmd_diagnose, cmd_report, cmd_synth, cmd_train, BatchOptions, DiagnoseMode, DiagnoseOptions, HarnessConfig,
    ReportOptions, RunStatus, SynthStudy,
};
use pgtail::taildiag::Stage;

#[derive(Parser)]
#[command(name = "pgtail", version, about = "Heavy-tailed policy-gradient experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run per seed.
    Train(RunArgs),
    /// Capture per-sample gradient statistics during training.
    Diagnose {
        #[command(flatten)]
        run: RunArgs,
        /// on-policy (every Nth iteration) or off-policy (all steps of chosen iterations)
        #[arg(long, default_value = "on")]
        mode: String,
        /// Comma-separated off-policy stages: init, 50%-max, max.
        #[arg(long, value_delimiter = ',', default_value = "init,50%-max,max")]
        stages: Vec<String>,
        /// Reuse the history and checkpoints of an existing run directory.
        #[arg(long)]
        from: Option<PathBuf>,
    },
    /// Run a synthetic study and write a CSV.
    Synth {
        /// kurtosis_study, ratio_tail or gmom_bench
        study: String,
        /// Study parameter as key=value (repeatable).
        #[arg(long = "param")]
        params: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Aggregate run directories or study CSVs into tables and SVG charts.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
        /// Aggregate runs whose config hashes differ.
        #[arg(long)]
        force: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Half-open seed range A..B.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// key=value applied on top of the config file (repeatable).
    #[arg(long = "override")]
    overrides: Vec<String>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

fn parse_seeds(spec: &str) -> anyhow::Result<Vec<u64>> {
    let (a, b) = spec.split_once("..").context("--seeds expects A..B")?;
    let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
    if b <= a {
        bail!("--seeds range {spec} is empty");
    }
    Ok((a..b).collect())
}

impl RunArgs {
    fn load(&self) -> anyhow::Result<(HarnessConfig, BatchOptions)> {
        let config = match &self.config {
            Some(p) => HarnessConfig::load(p)?,
            None => HarnessConfig::default(),
        };
        let seeds = match (&self.seeds, self.seed) {
            (Some(s), _) => parse_seeds(s)?,
            (None, Some(s)) => vec![s],
            (None, None) => vec![config.with_overrides(&self.overrides)?.seed],
        };
        if self.workers == 0 {
            bail!("--workers must be at least 1");
        }
        let opts = BatchOptions {
            seeds,
            overrides: self.overrides.clone(),
            out: self.out.clone(),
            workers: self.workers,
        };
        Ok((config, opts))
    }
}

/// Outcome mapped to the process exit code.
enum Outcome {
    Done,
    Diverged,
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Train(args) => {
            let (config, opts) = args.load()?;
            let records = cmd_train(&config, &opts)?;
            let mut diverged = false;
            for r in &records {
                println!(
                    "{} {:?} final_return={}",
                    r.run_id,
                    r.status,
                    r.final_return(10).map_or("n/a".to_string(), |v| format!("{v:.2}"))
                );
                diverged |= r.status == RunStatus::Diverged;
            }
            Ok(if diverged { Outcome::Diverged } else { Outcome::Done })
        }
        Command::Diagnose { run, mode, stages, from } => {
            let (config, opts) = run.load()?;
            let mode = match mode.as_str() {
                "on" | "on-policy" => DiagnoseMode::OnPolicy,
                "off" | "off-policy" => DiagnoseMode::OffPolicy(
                    stages.iter().map(|s| s.parse::<Stage>()).collect::<Result<_, _>>()?,
                ),
                other => bail!("unknown --mode `{other}` (expected on or off)"),
            };
            let outcomes = cmd_diagnose(&config, &opts, &DiagnoseOptions { mode, from })?;
            let mut diverged = false;
            for o in &outcomes {
                println!("{} {} tail reports", o.record.run_id, o.record.tail_reports.len());
                for s in &o.absent_stages {
                    println!("{} stage {} not reached", o.record.run_id, s.label());
                }
                diverged |= o.record.status == RunStatus::Diverged;
            }
            Ok(if diverged { Outcome::Diverged } else { Outcome::Done })
        }
        Command::Synth { study, params, out } => {
            let study: SynthStudy = study.parse()?;
            let path = cmd_synth(study, &params, &out)?;
            println!("{}", path.display());
            Ok(Outcome::Done)
        }
        Command::Report { inputs, out, force } => {
            let summary = cmd_report(&ReportOptions { inputs, out, force })?;
            for f in &summary.files {
                println!("{}", f.display());
            }
            Ok(Outcome::Done)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Diverged) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
