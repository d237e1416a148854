//! Experiment orchestration: configuration, runs, persistence and reports.

mod commands;
mod config;
mod records;
mod run;
mod stages;
mod svg;

pub use commands::{
    cmd_diagnose, cmd_report, cmd_synth, cmd_train, diagnose_run, samples_csv, series_label, synth_csv, BatchOptions,
    DiagnoseMode, DiagnoseOptions, DiagnoseOutcome, ReportOptions, ReportSummary, SeriesCurve, SynthStudy,
    KL_DIRECTION, RANDOM_AGENT_EPISODES,
};
pub use config::{
    default_iterations, default_target_return, CaptureSettings, HarnessConfig, ResolvedConfig, A2C_LEARNING_RATE,
    NOCLIP_LEARNING_RATE, PPO_LEARNING_RATE,
};
pub use records::{read_jsonl, write_jsonl, Fact, RunIdentity, RunStatus};
pub use run::{
    append_index, checkpoint_name, run_id, run_pool, train_run, Checkpoint, IndexEntry, RunDir, RunDriver, RunMeta,
    RunRecord,
};
pub use stages::{locate_stages, normalized_return, running_mean_returns, StageIterations, RUNNING_WINDOW};
pub use svg::{LineChart, Series};
