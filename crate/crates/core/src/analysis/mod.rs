//! Comparisons across teams: which covariates were used, how much the
//! submitted subgroups overlap, and how well teams predicted their effects.

mod embedding;
mod report;
mod summaries;

use std::path::{Path, PathBuf};

pub use embedding::{classical_mds, pairwise_jaccard_matrix, DistanceMatrix, Embedding2D};
pub use report::{analyze_round, emit_report, emit_scoreboard, read_report, scatter_svg, ReportBundle, RoundAnalysis};
pub use summaries::{prediction_error_report, spearman, variable_frequency, PredictionErrorReport, PredictionErrorRow};

use crate::expr::ExprError;

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
}

impl AnalysisError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}
