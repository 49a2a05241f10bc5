use std::cmp::Ordering;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::ScoreError;
use crate::expr::MembershipVector;
use crate::inference::{
    build_design_matrix, fit_firth_logistic, interaction_statistic, standardized_risk_difference, DesignMatrix, FitConfig,
    FittedModel, ModelSpec, Target,
};
use crate::stats::{average_ranks, mean, median};
use crate::trial_data::TrialDataset;

/// Scale factor making the MAD consistent for a Gaussian standard deviation.
pub const MAD_SCALE: f64 = 1.4826;

/// Fits the interaction model for one subgroup on the holdout.
pub fn fit_team_model(holdout: &TrialDataset, m: &MembershipVector, spec: &ModelSpec) -> Result<(FittedModel, DesignMatrix), ScoreError> {
    let design = build_design_matrix(holdout, m, spec)?;
    let (fit, _) = fit_firth_logistic(&design, &FitConfig::default())?;
    Ok((fit, design))
}

/// Interaction z-statistic: `b_int / se(b_int)`.
pub fn score_s1(holdout: &TrialDataset, m: &MembershipVector, spec: &ModelSpec) -> Result<(f64, FittedModel), ScoreError> {
    let (fit, _) = fit_team_model(holdout, m, spec)?;
    let (beta, se) = interaction_statistic(&fit)?;
    Ok((beta / se, fit))
}

/// Gaussian log-density of `delta_hat` under the team's predictive distribution.
pub fn score_s2(delta_pred: f64, sigma_pred: f64, delta_hat: f64) -> Result<f64, ScoreError> {
    if !(sigma_pred > 0.0) {
        return Err(ScoreError::NonPositiveSigma(sigma_pred));
    }
    let r = (delta_hat - delta_pred) / sigma_pred;
    Ok(-0.5 * (2.0 * PI).ln() - sigma_pred.ln() - 0.5 * r * r)
}

/// `(S - median) / (1.4826 MAD)`.
///
/// When the MAD is zero the mean absolute deviation about the median takes
/// its place; when that is zero too every score maps to 0.
pub fn robust_standardize(scores: &[f64]) -> Result<Vec<f64>, ScoreError> {
    if scores.len() < 2 {
        return Err(ScoreError::TooFewScores(scores.len()));
    }
    let center = median(scores);
    let deviations: Vec<f64> = scores.iter().map(|s| (s - center).abs()).collect();
    let mut spread = MAD_SCALE * median(&deviations);
    if spread == 0.0 {
        spread = MAD_SCALE * mean(&deviations);
    }
    if spread == 0.0 {
        return Ok(vec![0.0; scores.len()]);
    }
    Ok(scores.iter().map(|s| (s - center) / spread).collect())
}

/// Averages two already standardized score vectors.
pub fn combine_standardized(z1: &[f64], z2: &[f64]) -> Result<Vec<f64>, ScoreError> {
    if z1.len() != z2.len() {
        return Err(ScoreError::LengthMismatch(z1.len(), z2.len()));
    }
    Ok(z1.iter().zip(z2).map(|(a, b)| (a + b) / 2.0).collect())
}

/// Final score `(Z1 + Z2) / 2` from raw S1 and S2 vectors.
pub fn final_scores(s1: &[f64], s2: &[f64]) -> Result<Vec<f64>, ScoreError> {
    if s1.len() != s2.len() {
        return Err(ScoreError::LengthMismatch(s1.len(), s2.len()));
    }
    combine_standardized(&robust_standardize(s1)?, &robust_standardize(s2)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AltScoreConfig {
    /// Exponent on the subgroup fraction.
    pub alpha: f64,
}

impl AltScoreConfig {
    pub const PRESETS: [f64; 3] = [0.0, 0.5, 1.0];
}

/// `f_sub^alpha * (d_sub - d_overall)` from an already fitted team model.
pub fn alt_score_from_fit(fit: &FittedModel, design: &DesignMatrix, m: &MembershipVector, alpha: f64) -> Result<f64, ScoreError> {
    if !(alpha >= 0.0) {
        return Err(ScoreError::NegativeAlpha(alpha));
    }
    let sub = standardized_risk_difference(fit, design, m, Target::Subgroup)?;
    let overall = standardized_risk_difference(fit, design, m, Target::Overall)?;
    let fraction = m.size() as f64 / m.len() as f64;
    Ok(fraction.powf(alpha) * (sub - overall))
}

pub fn score_alt(holdout: &TrialDataset, m: &MembershipVector, spec: &ModelSpec, cfg: &AltScoreConfig) -> Result<f64, ScoreError> {
    let (fit, design) = fit_team_model(holdout, m, spec)?;
    alt_score_from_fit(&fit, &design, m, cfg.alpha)
}

/// Orders team indices by a descending key, breaking ties by higher `secondary`
/// (missing values last) and then by team id.
pub fn order_descending(key: &[f64], secondary: &[Option<f64>], team_ids: &[String]) -> Vec<usize> {
    // -0.0 and 0.0 must tie, so total_cmp is only a fallback for NaN.
    let desc = |x: f64, y: f64| y.partial_cmp(&x).unwrap_or_else(|| y.total_cmp(&x));
    let mut order: Vec<usize> = (0..key.len()).collect();
    order.sort_by(|&a, &b| {
        desc(key[a], key[b])
            .then_with(|| match (secondary[a], secondary[b]) {
                (Some(x), Some(y)) => desc(x, y),
                (Some(_), None) => Ordering::Less,
                (None, Some(_)) => Ordering::Greater,
                (None, None) => Ordering::Equal,
            })
            .then_with(|| team_ids[a].cmp(&team_ids[b]))
    });
    order
}

/// Ranks from an ordering: `ranks[order[i]] = i + 1`.
pub fn ranks_from_order(order: &[usize]) -> Vec<usize> {
    let mut ranks = vec![0; order.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos + 1;
    }
    ranks
}

/// Rank each score vector (highest first), average the two ranks, and rank the averages.
///
/// Ties in the averaged rank go to the higher `s1`, then the smaller team id.
pub fn rank_average(s1: &[f64], s2: &[f64], team_ids: &[String]) -> Result<Vec<usize>, ScoreError> {
    if s1.len() != s2.len() || s1.len() != team_ids.len() {
        return Err(ScoreError::LengthMismatch(s1.len(), s2.len()));
    }
    let negate = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
    let (r1, r2) = (average_ranks(&negate(s1)), average_ranks(&negate(s2)));
    let avg: Vec<f64> = r1.iter().zip(&r2).map(|(a, b)| -(a + b) / 2.0).collect();
    let secondary: Vec<Option<f64>> = s1.iter().copied().map(Some).collect();
    Ok(ranks_from_order(&order_descending(&avg, &secondary, team_ids)))
}
