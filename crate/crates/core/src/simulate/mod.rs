//! Synthetic multi-study trial programs with a known truth, a naive
//! univariate subgroup finder, and end-to-end simulated challenges.

mod challenge;
mod config;
mod generate;
mod search;

use std::path::PathBuf;

pub use challenge::{replication_data, run_challenge_simulation, run_replication, ReplicationResult, SimulationReport, SimulationSummary};
pub use config::{CovariateGenerator, Distribution, GeneratorConfig, OutcomeModel, SearchConfig, StudyConfig, MAX_ABS_ETA};
pub use generate::{generate_trial, study_config};
pub use search::{candidate_subgroups, naive_cutpoint_search, CandidateSubgroup, SearchOutcome};

use crate::expr::ExprError;
use crate::inference::FitError;
use crate::trial_data::DataError;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("study index {0} out of range ({1} studies)")]
    StudyIndex(usize, usize),
    #[error("replications must be at least 1")]
    Replications,
    #[error("subgroup search: {0}")]
    Search(String),
    #[error("no candidate subgroup meets the size rule")]
    NoValidSubgroup,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Fit(#[from] FitError),
}
