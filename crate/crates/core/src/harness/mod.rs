//! Run configuration, reproducible execution and result files.
//!
//! A run is described by a TOML file with a `[model]` table and optional
//! `[offspring]`, `[importance]` and `[options]` tables. Records are streamed
//! to `results.jsonl` as they are produced and summarized in `summary.csv`.
//! The numbers depend only on the study part of the configuration: the
//! thread count (`batches`) and the output directory never change them.

mod config;
mod output;
mod run;

pub use config::{
    parse_config, ConfigError, Experiment, Options, RunConfig, StudyConfig, DEFAULT_SAMPLES, DEFAULT_SEED,
};
pub use output::{write_summary, EstimateRecord, JsonlSink, OutputRecord, RunSummary};
pub use run::{run, run_with, ResultRecord, RunError};
