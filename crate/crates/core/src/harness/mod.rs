//! Experiment configuration, builtin scenarios, parallel execution and reports.

mod config;
mod io;
mod run;
mod scenarios;

pub use config::{
    ChecksConfig, ExperimentConfig, GridSpec, PolicyConfig, SeriesConfig, Tolerances, SCHEMA_VERSION,
};
pub use io::{
    export_cf_tables, read_samples, read_weights, write_report, write_samples, DIGEST_PREFIX,
};
pub use run::{
    analyze, report_for, run_scenario, simulate, Analysis, CfTable, CheckOutcome, CheckStatus, LabelledMean,
    ReplicateRecord, RunCounts, RunOptions, RunReport, SampleSet, Verdict, MIN_CF_SAMPLES,
};
pub use scenarios::{
    builtin_scenarios, gw_heyde, infinite_points, list_scenarios, pareto_normal, scenario,
    series_alternating, CatalogEntry, GW_HEYDE, INFINITE_POINTS, INFINITE_POINTS_SPACING,
    PARETO_NORMAL, SERIES_ALTERNATING,
};

use crate::engine::EngineError;
use crate::models::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("law fails the required conditions: {0:?} (use the override flag to run anyway)")]
    Conditions(Vec<String>),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed sample file: {0}")]
    Format(String),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}
