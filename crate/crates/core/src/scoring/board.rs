use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scores::{alt_score_from_fit, combine_standardized, fit_team_model, order_descending, rank_average, ranks_from_order};
use super::{check_validity, robust_standardize, score_s2, CellCounts, ScoreError, Submission};
use crate::expr::{membership, parse};
use crate::inference::{interaction_statistic, standardized_risk_difference, ModelSpec, Target};
use crate::stats::fmt_sig6;
use crate::trial_data::{apply_composite_nonresponse, TrialDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltScore {
    pub alpha: f64,
    pub value: f64,
    pub rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamScore {
    pub team_id: String,
    pub subgroup: String,
    pub counts: Option<CellCounts>,
    pub subgroup_size: Option<usize>,
    pub delta_pred: Option<f64>,
    pub sigma_pred: Option<f64>,
    pub delta_hat: Option<f64>,
    pub s1: Option<f64>,
    pub s2: Option<f64>,
    pub z1: Option<f64>,
    pub z2: Option<f64>,
    pub z: Option<f64>,
    pub rank: Option<usize>,
    pub rank_average: Option<usize>,
    pub alt: Vec<AltScore>,
    pub valid: bool,
    pub reasons: Vec<String>,
}

impl TeamScore {
    fn empty(team_id: &str) -> Self {
        Self {
            team_id: team_id.to_string(),
            subgroup: String::new(),
            counts: None,
            subgroup_size: None,
            delta_pred: None,
            sigma_pred: None,
            delta_hat: None,
            s1: None,
            s2: None,
            z1: None,
            z2: None,
            z: None,
            rank: None,
            rank_average: None,
            alt: Vec::new(),
            valid: true,
            reasons: Vec::new(),
        }
    }

    /// A team known only by its standardized components.
    pub fn from_standardized(team_id: &str, z1: f64, z2: f64) -> Self {
        Self { z1: Some(z1), z2: Some(z2), z: Some((z1 + z2) / 2.0), ..Self::empty(team_id) }
    }

    pub fn invalid(team_id: &str, reasons: Vec<String>) -> Self {
        Self { valid: false, reasons, ..Self::empty(team_id) }
    }
}

/// Ranked valid teams first, then invalid teams in input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBoard {
    pub teams: Vec<TeamScore>,
    /// Number of valid, ranked teams.
    pub k: usize,
    pub alphas: Vec<f64>,
}

impl ScoreBoard {
    pub fn ranked(&self) -> impl Iterator<Item = &TeamScore> {
        self.teams.iter().filter(|t| t.rank.is_some())
    }

    pub fn team(&self, team_id: &str) -> Option<&TeamScore> {
        self.teams.iter().find(|t| t.team_id == team_id)
    }

    /// Columns: team_id, N, S1, S2, Z1, Z2, Z, rank, valid, reasons.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["team_id", "N", "S1", "S2", "Z1", "Z2", "Z", "rank", "valid", "reasons"])?;
        for t in &self.teams {
            w.write_record([
                t.team_id.clone(),
                t.subgroup_size.map_or_else(|| "NA".into(), |n| n.to_string()),
                opt(t.s1),
                opt(t.s2),
                opt(t.z1),
                opt(t.z2),
                opt(t.z),
                t.rank.map_or_else(|| "NA".into(), |r| r.to_string()),
                t.valid.to_string(),
                t.reasons.join("; "),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Rank-average ranking and S_alt scores with their rankings, one column pair per alpha.
    pub fn write_alternative_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["team_id".to_string(), "rank_average".to_string()];
        for a in &self.alphas {
            header.push(format!("S_alt_{a}"));
            header.push(format!("rank_alt_{a}"));
        }
        w.write_record(&header)?;
        for t in self.ranked() {
            let mut row = vec![t.team_id.clone(), t.rank_average.map_or_else(|| "NA".into(), |r| r.to_string())];
            for a in &self.alphas {
                match t.alt.iter().find(|s| s.alpha == *a) {
                    Some(s) => {
                        row.push(fmt_sig6(s.value));
                        row.push(s.rank.map_or_else(|| "NA".into(), |r| r.to_string()));
                    }
                    None => row.extend(["NA".to_string(), "NA".to_string()]),
                }
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), fmt_sig6)
}

/// Sorts valid teams by Z (descending), then S1, then team id, and assigns ranks.
///
/// Also fills the rank-average ranking from Z1/Z2 and, per alpha, the S_alt ranking.
pub fn rank_teams(teams: Vec<TeamScore>) -> ScoreBoard {
    let (valid, invalid): (Vec<TeamScore>, Vec<TeamScore>) = teams.into_iter().partition(|t| t.valid && t.z.is_some());
    let ids: Vec<String> = valid.iter().map(|t| t.team_id.clone()).collect();
    let z: Vec<f64> = valid.iter().map(|t| t.z.unwrap_or(f64::NAN)).collect();
    let s1: Vec<Option<f64>> = valid.iter().map(|t| t.s1).collect();
    let order = order_descending(&z, &s1, &ids);

    let mut valid = valid;
    let z1: Vec<f64> = valid.iter().map(|t| t.z1.unwrap_or(f64::NAN)).collect();
    let z2: Vec<f64> = valid.iter().map(|t| t.z2.unwrap_or(f64::NAN)).collect();
    if let Ok(avg) = rank_average(&z1, &z2, &ids) {
        valid.iter_mut().zip(avg).for_each(|(t, r)| t.rank_average = Some(r));
    }
    let mut alphas: Vec<f64> = Vec::new();
    for t in &valid {
        for a in &t.alt {
            if !alphas.contains(&a.alpha) {
                alphas.push(a.alpha);
            }
        }
    }
    for (slot, alpha) in alphas.iter().enumerate() {
        if valid.iter().all(|t| t.alt.get(slot).is_some_and(|a| a.alpha == *alpha)) {
            let values: Vec<f64> = valid.iter().map(|t| t.alt[slot].value).collect();
            let ranks = ranks_from_order(&order_descending(&values, &s1, &ids));
            valid.iter_mut().zip(ranks).for_each(|(t, r)| t.alt[slot].rank = Some(r));
        }
    }

    let k = valid.len();
    let mut slots: Vec<Option<TeamScore>> = valid.into_iter().map(Some).collect();
    let mut teams = Vec::with_capacity(k + invalid.len());
    for (pos, &i) in order.iter().enumerate() {
        let mut t = slots[i].take().expect("each index appears once");
        t.rank = Some(pos + 1);
        teams.push(t);
    }
    teams.extend(invalid);
    ScoreBoard { teams, k, alphas }
}

/// Scores one submission on a holdout whose outcomes already follow the composite rule.
pub fn score_team(sub: &Submission, holdout: &TrialDataset, spec: &ModelSpec, alphas: &[f64]) -> TeamScore {
    let report = check_validity(sub, holdout);
    let mut team = TeamScore {
        subgroup: sub.subgroup.clone(),
        counts: report.counts,
        subgroup_size: report.counts.map(|c| c.subgroup_size()),
        delta_pred: Some(sub.delta_pred),
        sigma_pred: Some(sub.sigma_pred),
        ..TeamScore::empty(&sub.team_id)
    };
    if !report.valid {
        team.valid = false;
        team.reasons = report.reasons;
        return team;
    }
    let scored = (|| -> Result<_, ScoreError> {
        let m = membership(&parse(&sub.subgroup)?, holdout)?;
        let (fit, design) = fit_team_model(holdout, &m, spec)?;
        let (beta, se) = interaction_statistic(&fit)?;
        let delta_hat = standardized_risk_difference(&fit, &design, &m, Target::Subgroup)?;
        let s2 = score_s2(sub.delta_pred, sub.sigma_pred, delta_hat)?;
        let alt = alphas
            .iter()
            .map(|&alpha| Ok(AltScore { alpha, value: alt_score_from_fit(&fit, &design, &m, alpha)?, rank: None }))
            .collect::<Result<Vec<_>, ScoreError>>()?;
        let mut notes = Vec::new();
        if !fit.converged {
            notes.push(format!("model did not converge in {} iterations", fit.iterations));
        }
        Ok((beta / se, s2, delta_hat, alt, notes))
    })();
    match scored {
        Ok((s1, s2, delta_hat, alt, notes)) => {
            team.s1 = Some(s1);
            team.s2 = Some(s2);
            team.delta_hat = Some(delta_hat);
            team.alt = alt;
            team.reasons = notes;
        }
        Err(e) => {
            team.valid = false;
            team.reasons = vec![format!("scoring failed: {e}")];
        }
    }
    team
}

/// Scores a whole round: composite rule, per-team fits, standardization and ranking.
///
/// Per-team failures mark that team invalid; fewer than two valid teams is an error.
pub fn score_round(holdout: &TrialDataset, subs: &[Submission], spec: &ModelSpec, alphas: &[f64]) -> Result<ScoreBoard, ScoreError> {
    let holdout = apply_composite_nonresponse(holdout);
    let mut teams: Vec<TeamScore> = subs.par_iter().map(|s| score_team(s, &holdout, spec, alphas)).collect();

    let valid: Vec<usize> = (0..teams.len()).filter(|&i| teams[i].valid).collect();
    let s1: Vec<f64> = valid.iter().map(|&i| teams[i].s1.unwrap_or(f64::NAN)).collect();
    let s2: Vec<f64> = valid.iter().map(|&i| teams[i].s2.unwrap_or(f64::NAN)).collect();
    let (z1, z2) = (robust_standardize(&s1)?, robust_standardize(&s2)?);
    let z = combine_standardized(&z1, &z2)?;
    for (j, &i) in valid.iter().enumerate() {
        teams[i].z1 = Some(z1[j]);
        teams[i].z2 = Some(z2[j]);
        teams[i].z = Some(z[j]);
    }
    let mut board = rank_teams(teams);
    board.alphas = alphas.to_vec();
    Ok(board)
}

#[derive(Debug, Deserialize)]
struct StandardizedRow {
    team_id: String,
    #[serde(rename = "Z1")]
    z1: f64,
    #[serde(rename = "Z2")]
    z2: f64,
}

/// Reads `team_id,Z1,Z2` rows for ranking without refitting.
pub fn read_standardized_csv<R: Read>(reader: R) -> Result<Vec<TeamScore>, ScoreError> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize::<StandardizedRow>()
        .map(|row| row.map(|row| TeamScore::from_standardized(&row.team_id, row.z1, row.z2)).map_err(ScoreError::from))
        .collect()
}
