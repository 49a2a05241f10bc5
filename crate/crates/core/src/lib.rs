//! Scoring harness for subgroup-identification challenges on randomized trials.
//!
//! The pipeline: load a holdout trial ([`trial_data`]), evaluate each
//! submitted subgroup expression ([`expr`]), fit a Firth-penalized logistic
//! interaction model ([`inference`]), turn the fits into per-team scores and a
//! ranking ([`scoring`]), then compare teams against each other
//! ([`analysis`]). [`simulate`] generates synthetic trial programs with a known
//! truth and runs whole challenges end to end.

pub mod analysis;
pub mod expr;
pub mod inference;
pub mod rng;
pub mod scoring;
pub mod simulate;
pub mod stats;
pub mod trial_data;

pub use expr::{parse, Expr, ExprError, MembershipVector, Tri};
pub use trial_data::{Arm, CovariateSchema, CovariateValue, DataError, SubjectRecord, TrialDataset};
pub use inference::{FitConfig, FitError, FittedModel, ModelSpec};
pub use scoring::{ScoreBoard, ScoreError, Submission, TeamScore};
pub use simulate::{GeneratorConfig, SimError, SimulationReport};
