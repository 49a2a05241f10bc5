//! Submission validity, the interaction score S1, the prediction score S2,
//! robust standardization, final ranking and the alternative rankings.

mod board;
mod scores;
mod submission;
mod validity;

use std::path::PathBuf;

pub use board::{rank_teams, read_standardized_csv, score_round, score_team, AltScore, ScoreBoard, TeamScore};
pub use scores::{
    alt_score_from_fit, combine_standardized, final_scores, fit_team_model, order_descending, rank_average, ranks_from_order,
    robust_standardize, score_alt, score_s1, score_s2, AltScoreConfig, MAD_SCALE,
};
pub use submission::{load_submission, load_submissions, Submission};
pub use validity::{check_validity, CellCounts, ValidityReport, MAX_EXPRESSION_CHARS, MIN_CELL_COUNT};

use crate::expr::ExprError;
use crate::inference::FitError;

#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: malformed submission: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("team `{0}` submitted more than once")]
    DuplicateTeam(String),
    #[error("sigma_pred must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("standardization needs at least 2 valid teams, got {0}")]
    TooFewScores(usize),
    #[error("score vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("alpha must be nonnegative, got {0}")]
    NegativeAlpha(f64),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}
