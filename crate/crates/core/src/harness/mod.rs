//! Experiment configuration, result logging, the command line and the
//! acceptance suite.

mod cli;
mod config;
mod records;
mod suite;

pub use cli::{run, Cli, CliError, Command};
pub use config::{content_hash, ConfigError, CostSpec, ExperimentConfig, MollifierSpec, OutputSpec, SamplingSpec};
pub use records::{append_record, read_records, write_csv, ResultRecord};
pub use suite::{
    acceptance_suite, acceptance_suite_with, derivative_ladder, law_run, run_criterion, CriterionOutcome, LawRun,
    LawScale, SuiteReport, Tier, CRITERIA, DYNAMICS_QUAD_STEP, LAW_SEEDS,
};
