use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use super::{build_design_matrix, build_overall_design, fit_firth_logistic, standardized_risk_difference};
use super::{FitConfig, FitError, ModelSpec, Target};
use crate::expr::{membership, Expr, MembershipVector};
use crate::rng::rng_for;
use crate::trial_data::{Arm, TrialDataset};

/// Resamples drawn per replicate before giving up on an unusable stratum layout.
pub const MAX_REDRAWS: usize = 100;

/// Subgroup risk differences over `replicates` stratified bootstrap resamples.
///
/// Subjects are resampled with replacement within each (study, arm) stratum.
/// Replicate `b` uses its own generator seeded from `(seed, b)`, so the result
/// does not depend on thread scheduling.
pub fn bootstrap_replicates(
    ds: &TrialDataset,
    expr: &Expr,
    spec: &ModelSpec,
    replicates: usize,
    seed: u64,
) -> Result<Vec<f64>, FitError> {
    if replicates < 2 {
        return Err(FitError::Replicates(replicates));
    }
    let m = membership(expr, ds)?;
    let subgroup_terms = m.flags.iter().any(|&f| f) && m.flags.iter().any(|&f| !f);
    let design = if subgroup_terms { build_design_matrix(ds, &m, spec)? } else { build_overall_design(ds, spec)? };

    let mut strata: BTreeMap<(&str, Arm), Vec<usize>> = BTreeMap::new();
    for (i, s) in ds.subjects().iter().enumerate() {
        strata.entry((s.study_id.as_str(), s.arm)).or_default().push(i);
    }
    let strata: Vec<Vec<usize>> = strata.into_values().collect();
    let cfg = FitConfig::default();

    (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_for(seed, b as u64);
            for _ in 0..MAX_REDRAWS {
                let rows: Vec<usize> = strata
                    .iter()
                    .flat_map(|stratum| (0..stratum.len()).map(|_| stratum[rng.random_range(0..stratum.len())]).collect::<Vec<_>>())
                    .collect();
                let flags: Vec<bool> = rows.iter().map(|&i| m.flags[i]).collect();
                if subgroup_terms && !all_cells_populated(&rows, &flags, ds) {
                    continue;
                }
                let resample = design.select_rows(&rows);
                let Ok((fit, _)) = fit_firth_logistic(&resample, &cfg) else { continue };
                let sub = MembershipVector::from_flags(vec![String::new(); rows.len()], flags);
                if let Ok(d) = standardized_risk_difference(&fit, &resample, &sub, Target::Subgroup) {
                    return Ok(d);
                }
            }
            Err(FitError::BootstrapExhausted { replicate: b })
        })
        .collect()
}

fn all_cells_populated(rows: &[usize], flags: &[bool], ds: &TrialDataset) -> bool {
    let mut cells = [[0usize; 2]; 2];
    for (&i, &f) in rows.iter().zip(flags) {
        cells[usize::from(f)][ds.subjects()[i].arm.index()] += 1;
    }
    cells.iter().flatten().all(|&c| c > 0)
}

/// Sample standard deviation of the bootstrap subgroup risk differences.
pub fn bootstrap_sd(ds: &TrialDataset, expr: &Expr, spec: &ModelSpec, replicates: usize, seed: u64) -> Result<f64, FitError> {
    let values = bootstrap_replicates(ds, expr, spec, replicates, seed)?;
    Ok(crate::stats::sample_sd(&values))
}
