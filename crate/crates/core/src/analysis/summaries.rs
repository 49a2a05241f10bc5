use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::expr::Expr;
use crate::scoring::ScoreBoard;
use crate::stats::{average_ranks, pearson};

/// Number of expressions using each covariate, most frequent first, ties by name.
pub fn variable_frequency(exprs: &[Expr]) -> Vec<(String, usize)> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for e in exprs {
        for v in e.variables_used() {
            *counts.entry(v).or_default() += 1;
        }
    }
    let mut out: Vec<(String, usize)> = counts.into_iter().collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// Spearman rank correlation; `None` when either vector is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<f64>, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::Shape(format!("vectors of length {} and {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(AnalysisError::TooFewPoints(x.len()));
    }
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionErrorRow {
    pub team_id: String,
    pub subgroup_size: usize,
    pub delta_pred: f64,
    pub sigma_pred: f64,
    pub delta_hat: f64,
    /// `delta_pred - delta_hat`.
    pub error: f64,
    pub abs_error: f64,
    pub lower: f64,
    pub upper: f64,
    pub covered: bool,
    /// Whether the team enters the percentage aggregate (requires `delta_hat > 0`).
    pub in_percentage: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionErrorReport {
    pub rows: Vec<PredictionErrorRow>,
    /// Mean of `100 (delta_pred - delta_hat) / delta_hat` over teams with `delta_hat > 0`.
    pub mean_percentage_overestimation: Option<f64>,
    pub excluded_from_percentage: usize,
    pub mean_error: Option<f64>,
    /// Fraction of teams whose 95% interval contains `delta_hat`.
    pub coverage: Option<f64>,
    pub spearman_abs_error_vs_size: Option<f64>,
}

/// Predicted versus observed subgroup effects for every scored team.
pub fn prediction_error_report(board: &ScoreBoard) -> PredictionErrorReport {
    let rows: Vec<PredictionErrorRow> = board
        .ranked()
        .filter_map(|t| {
            let (delta_pred, sigma_pred, delta_hat, size) = (t.delta_pred?, t.sigma_pred?, t.delta_hat?, t.subgroup_size?);
            let error = delta_pred - delta_hat;
            let (lower, upper) = (delta_pred - 1.96 * sigma_pred, delta_pred + 1.96 * sigma_pred);
            Some(PredictionErrorRow {
                team_id: t.team_id.clone(),
                subgroup_size: size,
                delta_pred,
                sigma_pred,
                delta_hat,
                error,
                abs_error: error.abs(),
                lower,
                upper,
                covered: (lower..=upper).contains(&delta_hat),
                in_percentage: delta_hat > 0.0,
            })
        })
        .collect();

    let pct: Vec<f64> = rows.iter().filter(|r| r.in_percentage).map(|r| 100.0 * r.error / r.delta_hat).collect();
    let n = rows.len() as f64;
    let nonempty = |v: f64| if rows.is_empty() { None } else { Some(v) };
    let abs: Vec<f64> = rows.iter().map(|r| r.abs_error).collect();
    let size: Vec<f64> = rows.iter().map(|r| r.subgroup_size as f64).collect();
    PredictionErrorReport {
        mean_percentage_overestimation: (!pct.is_empty()).then(|| pct.iter().sum::<f64>() / pct.len() as f64),
        excluded_from_percentage: rows.len() - pct.len(),
        mean_error: nonempty(rows.iter().map(|r| r.error).sum::<f64>() / n),
        coverage: nonempty(rows.iter().filter(|r| r.covered).count() as f64 / n),
        spearman_abs_error_vs_size: spearman(&abs, &size).ok().flatten(),
        rows,
    }
}
