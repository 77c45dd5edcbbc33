//! Experiment orchestration: declarative configs, the endpoint client,
//! resumable append-only records, aggregation, report files, and the CLI.

pub mod aggregate;
pub mod cli;
pub mod client;
pub mod config;
pub mod records;
pub mod report;
pub mod runner;

pub use aggregate::{aggregate, aggregate_with, wilson_interval, GroupSummary};
pub use cli::{cli, parse_rule, parse_topology};
pub use client::{ChatOutcome, HttpChatClient};
pub use config::{
    ContextLengthMode, ExperimentConfig, ModelEndpoint, RetryPolicy, SeedTriple, ThinkingBudget,
    TopologySpec,
};
pub use records::{read_records, record_id, scan_records, EvalRecord, RecordStatus, RecordWriter};
pub use report::{emit_report, write_plot_data_csv, write_summary_csv};
pub use runner::{
    load_wordlist, replicate_bundle, replicate_provenance, replicate_seeds, run_experiment,
    RunOptions, RunSummary,
};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("output file {0} already exists; pass --resume to continue it")]
    OutputExists(PathBuf),
    #[error("corrupt record file {path}: {detail}")]
    CorruptRecords { path: PathBuf, detail: String },
    #[error("http client: {0}")]
    Http(String),
    #[error("endpoint failed after {attempts} attempts: {detail}")]
    EndpointFailure { attempts: u32, detail: String },
    #[error("{failures}/{total} replicates failed, above the {threshold} threshold")]
    FailuresAboveThreshold {
        failures: usize,
        total: usize,
        threshold: f64,
    },
    #[error(transparent)]
    TaskGen(#[from] crate::taskgen::TaskGenError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code: 1 usage, 2 config/environment, 3 failures above
    /// threshold.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 1,
            HarnessError::FailuresAboveThreshold { .. } => 3,
            _ => 2,
        }
    }
}
