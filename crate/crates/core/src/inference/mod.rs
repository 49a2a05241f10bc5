//! The logistic interaction model
//! `logit p = b0 + b_trt t + b_s s + b_int t s + x'b`,
//! fitted with Firth's penalty, and model-based standardization to the
//! risk-difference scale.

mod bootstrap;
mod design;
mod firth;
mod standardize;

use serde::{Deserialize, Serialize};

pub use bootstrap::{bootstrap_replicates, bootstrap_sd, MAX_REDRAWS};
pub use design::{build_design_matrix, build_overall_design, Column, ColumnRole, DesignLayout, DesignMatrix};
pub(crate) use firth::sigmoid;
pub use firth::{fit_firth_logistic, penalized_loglik, FitDiagnostics, FittedModel};
pub use standardize::{interaction_statistic, standardized_risk_difference, Target};

use crate::expr::ExprError;

/// Default adjustment set: body weight and prior TNF-inhibitor naivety.
pub const DEFAULT_ADJUSTMENT: [&str; 2] = ["WEIGHT", "NAVTNF"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default = "default_adjustment")]
    pub adjustment_covariates: Vec<String>,
    #[serde(default = "default_true")]
    pub include_interaction: bool,
}

fn default_adjustment() -> Vec<String> {
    DEFAULT_ADJUSTMENT.iter().map(|s| s.to_string()).collect()
}

fn default_true() -> bool {
    true
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self { adjustment_covariates: default_adjustment(), include_interaction: true }
    }
}

impl ModelSpec {
    /// Intercept, treatment, subgroup and interaction only.
    pub fn unadjusted() -> Self {
        Self { adjustment_covariates: Vec::new(), include_interaction: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Convergence threshold on the largest modified-score component.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 50, max_halvings: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("subject `{0}` has no outcome; apply the composite non-response rule first")]
    MissingOutcome(String),
    #[error("adjustment covariate `{0}` is not in the schema")]
    UnknownCovariate(String),
    #[error("membership vector does not match the dataset")]
    SubjectMismatch,
    #[error("singular Fisher information: column `{column}` is linearly dependent")]
    Singular { column: String },
    #[error("model has no treatment-by-subgroup interaction column")]
    NoInteraction,
    #[error("no subjects in the {0:?} target population")]
    EmptyTarget(Target),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("bootstrap needs at least 2 replicates, got {0}")]
    Replicates(usize),
    #[error("bootstrap replicate {replicate}: no usable resample after {} draws", MAX_REDRAWS)]
    BootstrapExhausted { replicate: usize },
    #[error(transparent)]
    Expr(#[from] ExprError),
}
