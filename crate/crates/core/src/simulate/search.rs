use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::expr::{membership, parse, Expr};
use crate::inference::{fit_firth_logistic, standardized_risk_difference, FitConfig, ModelSpec, Target};
use crate::inference::build_design_matrix;
use crate::scoring::{CellCounts, MIN_CELL_COUNT};
use crate::stats::quantile_sorted;
use crate::trial_data::{CovariateKind, CovariateValue, TrialDataset};

/// One single-variable subgroup considered by the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSubgroup {
    pub covariate: String,
    /// Cut point for numeric covariates; `None` for boolean levels.
    pub threshold: Option<f64>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub selected: CandidateSubgroup,
    /// Training standardized risk difference in the selected subgroup.
    pub delta_hat: f64,
    pub subgroup_size: usize,
    /// Candidates meeting the size rule on the training data.
    pub admissible: usize,
    pub considered: usize,
}

impl SearchOutcome {
    pub fn expr(&self) -> Expr {
        parse(&self.selected.text).expect("search emits parseable expressions")
    }
}

/// Enumerates `x > q` and `x <= q` at the `k / (grid + 1)` training quantiles
/// (`k = 1..=grid`, duplicates dropped) for numeric candidates, and both
/// levels for boolean ones. Ordered by covariate name, then threshold.
pub fn candidate_subgroups(training: &TrialDataset, candidates: &[String], grid: usize) -> Result<Vec<CandidateSubgroup>, SimError> {
    let mut names = candidates.to_vec();
    names.sort();
    names.dedup();
    let mut out = Vec::new();
    for name in names {
        let def = training.schema().get(&name).ok_or_else(|| SimError::Search(format!("unknown covariate `{name}`")))?;
        match def.kind {
            CovariateKind::Boolean => {
                for level in ["TRUE", "FALSE"] {
                    out.push(CandidateSubgroup { covariate: name.clone(), threshold: None, text: format!("{name} == {level}") });
                }
            }
            CovariateKind::Numeric => {
                let mut values: Vec<f64> = (0..training.len())
                    .filter_map(|i| match training.value(i, &name) {
                        Some(CovariateValue::Numeric(x)) => Some(*x),
                        _ => None,
                    })
                    .collect();
                values.sort_by(f64::total_cmp);
                if values.is_empty() {
                    continue;
                }
                let mut cuts: Vec<f64> = (1..=grid).map(|k| quantile_sorted(&values, k as f64 / (grid + 1) as f64)).collect();
                cuts.dedup();
                for q in cuts {
                    for op in [">", "<="] {
                        out.push(CandidateSubgroup { covariate: name.clone(), threshold: Some(q), text: format!("{name} {op} {q}") });
                    }
                }
            }
            CovariateKind::Categorical => {
                return Err(SimError::Search(format!("`{name}` is categorical; only numeric and boolean covariates can be searched")))
            }
        }
    }
    Ok(out)
}

/// Exhaustive univariate search for the subgroup with the largest training
/// standardized risk difference among those meeting the size rule.
///
/// `training` must already follow the composite non-response rule. Ties keep
/// the earliest candidate in [`candidate_subgroups`] order.
pub fn naive_cutpoint_search(training: &TrialDataset, candidates: &[String], grid: usize, spec: &ModelSpec) -> Result<SearchOutcome, SimError> {
    if grid < 2 {
        return Err(SimError::Search("grid must be at least 2".into()));
    }
    let options = candidate_subgroups(training, candidates, grid)?;
    let cfg = FitConfig::default();
    let evaluated: Vec<Option<(f64, usize)>> = options
        .par_iter()
        .map(|c| {
            let m = membership(&parse(&c.text).ok()?, training).ok()?;
            let counts = CellCounts::from_membership(training, &m);
            if counts.cells().iter().any(|&(_, n)| n < MIN_CELL_COUNT) {
                return None;
            }
            let design = build_design_matrix(training, &m, spec).ok()?;
            let (fit, _) = fit_firth_logistic(&design, &cfg).ok()?;
            let d = standardized_risk_difference(&fit, &design, &m, Target::Subgroup).ok()?;
            Some((d, counts.subgroup_size()))
        })
        .collect();

    let mut best: Option<(usize, f64, usize)> = None;
    for (i, e) in evaluated.iter().enumerate() {
        if let Some((d, size)) = *e {
            if best.is_none_or(|(_, b, _)| d > b) {
                best = Some((i, d, size));
            }
        }
    }
    let (i, delta_hat, subgroup_size) = best.ok_or(SimError::NoValidSubgroup)?;
    Ok(SearchOutcome {
        selected: options[i].clone(),
        delta_hat,
        subgroup_size,
        admissible: evaluated.iter().filter(|e| e.is_some()).count(),
        considered: options.len(),
    })
}
