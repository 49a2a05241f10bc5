use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{generate_trial, naive_cutpoint_search, GeneratorConfig, SimError};
use crate::inference::{bootstrap_sd, build_overall_design, fit_firth_logistic, standardized_risk_difference, FitConfig, Target};
use crate::rng::derive_seed;
use crate::scoring::{score_team, Submission};
use crate::stats::{average_ranks, fmt_sig6, mean, pearson, sample_sd};
use crate::trial_data::{apply_composite_nonresponse, pool_studies, TrialDataset};
use crate::expr::MembershipVector;

/// Seed offset for the bootstrap inside a replication, kept clear of study indices.
const BOOTSTRAP_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub replication: usize,
    pub subgroup: Option<String>,
    pub training_delta_overall: Option<f64>,
    /// Training subgroup estimate, used as the prediction.
    pub delta_pred: Option<f64>,
    pub sigma_pred: Option<f64>,
    pub holdout_size: Option<usize>,
    pub delta_hat: Option<f64>,
    pub s1: Option<f64>,
    pub s2: Option<f64>,
    /// Whether `delta_hat` lies within `delta_pred ± 1.96 sigma_pred`.
    pub covered: Option<bool>,
    /// Why the replication produced no holdout score.
    pub skipped: Option<String>,
}

impl ReplicationResult {
    fn new(replication: usize) -> Self {
        Self {
            replication,
            subgroup: None,
            training_delta_overall: None,
            delta_pred: None,
            sigma_pred: None,
            holdout_size: None,
            delta_hat: None,
            s1: None,
            s2: None,
            covered: None,
            skipped: None,
        }
    }

    pub fn error(&self) -> Option<f64> {
        Some(self.delta_pred? - self.delta_hat?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub replications: usize,
    pub completed: usize,
    pub skipped: usize,
    /// Mean of `delta_pred - delta_hat` over completed replications.
    pub mean_overestimation: Option<f64>,
    pub sd_overestimation: Option<f64>,
    pub t_statistic: Option<f64>,
    /// One-sided p-value for a positive mean overestimation.
    pub p_value_one_sided: Option<f64>,
    /// Mean of `100 (delta_pred - delta_hat) / delta_hat` over replications with `delta_hat > 0`.
    pub mean_percentage_overestimation: Option<f64>,
    pub coverage: Option<f64>,
    pub mean_s1: Option<f64>,
    pub mean_training_delta_selected: Option<f64>,
    pub mean_training_delta_overall: Option<f64>,
    pub spearman_abs_error_vs_size: Option<f64>,
    /// Two-sided p-value of the rank correlation (t approximation).
    pub spearman_p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub config: GeneratorConfig,
    pub summary: SimulationSummary,
    pub replications: Vec<ReplicationResult>,
}

impl SimulationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per replication.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "replication",
            "subgroup",
            "training_delta_overall",
            "delta_pred",
            "sigma_pred",
            "holdout_size",
            "delta_hat",
            "S1",
            "S2",
            "covered",
            "skipped",
        ])?;
        let num = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), fmt_sig6);
        for r in &self.replications {
            w.write_record([
                r.replication.to_string(),
                r.subgroup.clone().unwrap_or_default(),
                num(r.training_delta_overall),
                num(r.delta_pred),
                num(r.sigma_pred),
                r.holdout_size.map_or_else(|| "NA".to_string(), |n| n.to_string()),
                num(r.delta_hat),
                num(r.s1),
                num(r.s2),
                r.covered.map_or_else(|| "NA".to_string(), |c| c.to_string()),
                r.skipped.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Training studies (pooled, composite rule applied) and holdout for one replication.
pub fn replication_data(cfg: &GeneratorConfig, rep_seed: u64) -> Result<(TrialDataset, TrialDataset), SimError> {
    let studies = (0..cfg.training.len())
        .map(|i| generate_trial(cfg, i, derive_seed(rep_seed, i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let training = apply_composite_nonresponse(&pool_studies(&studies)?);
    let n = cfg.training.len();
    let holdout = apply_composite_nonresponse(&generate_trial(cfg, n, derive_seed(rep_seed, n as u64))?);
    Ok((training, holdout))
}

fn overall_delta(ds: &TrialDataset, cfg: &GeneratorConfig) -> Option<f64> {
    let design = build_overall_design(ds, &cfg.model).ok()?;
    let (fit, _) = fit_firth_logistic(&design, &FitConfig::default()).ok()?;
    let everyone = MembershipVector::from_flags(ds.subject_ids(), vec![true; ds.len()]);
    standardized_risk_difference(&fit, &design, &everyone, Target::Overall).ok()
}

/// One simulated challenge: search on training, predict, score on the holdout.
pub fn run_replication(cfg: &GeneratorConfig, replication: usize, seed: u64) -> Result<ReplicationResult, SimError> {
    let rep_seed = derive_seed(seed, replication as u64);
    let (training, holdout) = replication_data(cfg, rep_seed)?;
    let mut out = ReplicationResult::new(replication);
    out.training_delta_overall = overall_delta(&training, cfg);

    let found = match naive_cutpoint_search(&training, &cfg.search_candidates(), cfg.search.grid, &cfg.model) {
        Ok(found) => found,
        Err(SimError::NoValidSubgroup) => {
            out.skipped = Some("no candidate subgroup meets the size rule on training".into());
            return Ok(out);
        }
        Err(e) => return Err(e),
    };
    out.subgroup = Some(found.selected.text.clone());
    out.delta_pred = Some(found.delta_hat);
    let sigma = match bootstrap_sd(&training, &found.expr(), &cfg.model, cfg.bootstrap_replicates, derive_seed(rep_seed, BOOTSTRAP_STREAM)) {
        Ok(s) if s > 0.0 => s,
        Ok(_) => {
            out.skipped = Some("bootstrap standard deviation is zero".into());
            return Ok(out);
        }
        Err(e) => {
            out.skipped = Some(format!("bootstrap failed: {e}"));
            return Ok(out);
        }
    };
    out.sigma_pred = Some(sigma);

    let sub = Submission::new("baseline", &found.selected.text, found.delta_hat.clamp(-1.0, 1.0), sigma);
    let team = score_team(&sub, &holdout, &cfg.model, &[]);
    out.holdout_size = team.subgroup_size;
    if !team.valid {
        out.skipped = Some(team.reasons.join("; "));
        return Ok(out);
    }
    out.delta_hat = team.delta_hat;
    out.s1 = team.s1;
    out.s2 = team.s2;
    out.covered = team.delta_hat.map(|d| (d - found.delta_hat).abs() <= 1.96 * sigma);
    Ok(out)
}

fn summarize(results: &[ReplicationResult]) -> SimulationSummary {
    let done: Vec<&ReplicationResult> = results.iter().filter(|r| r.skipped.is_none() && r.delta_hat.is_some()).collect();
    let some = |v: Vec<f64>| if v.is_empty() { None } else { Some(mean(&v)) };
    let errors: Vec<f64> = done.iter().filter_map(|r| r.error()).collect();
    let n = errors.len();
    let (sd, t, p) = if n >= 2 {
        let sd = sample_sd(&errors);
        let t = mean(&errors) / (sd / (n as f64).sqrt());
        let p = StudentsT::new(0.0, 1.0, (n - 1) as f64).ok().map(|d| 1.0 - d.cdf(t));
        (Some(sd), t.is_finite().then_some(t), p.filter(|p| p.is_finite()))
    } else {
        (None, None, None)
    };
    let pct: Vec<f64> = done
        .iter()
        .filter(|r| r.delta_hat.is_some_and(|d| d > 0.0))
        .filter_map(|r| Some(100.0 * r.error()? / r.delta_hat?))
        .collect();

    let abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    let sizes: Vec<f64> = done.iter().map(|r| r.holdout_size.unwrap_or(0) as f64).collect();
    let rho = if n >= 3 { pearson(&average_ranks(&abs), &average_ranks(&sizes)) } else { None };
    let rho_p = rho.and_then(|r| {
        let df = (n - 2) as f64;
        let t = r * (df / (1.0 - r * r).max(f64::MIN_POSITIVE)).sqrt();
        StudentsT::new(0.0, 1.0, df).ok().map(|d| 2.0 * (1.0 - d.cdf(t.abs())))
    });

    SimulationSummary {
        replications: results.len(),
        completed: done.len(),
        skipped: results.len() - done.len(),
        mean_overestimation: some(errors.clone()),
        sd_overestimation: sd,
        t_statistic: t,
        p_value_one_sided: p,
        mean_percentage_overestimation: some(pct),
        coverage: some(done.iter().map(|r| f64::from(u8::from(r.covered == Some(true)))).collect()),
        mean_s1: some(done.iter().filter_map(|r| r.s1).collect()),
        mean_training_delta_selected: some(done.iter().filter_map(|r| r.delta_pred).collect()),
        mean_training_delta_overall: some(done.iter().filter_map(|r| r.training_delta_overall).collect()),
        spearman_abs_error_vs_size: rho,
        spearman_p_value: rho_p,
    }
}

/// Runs `replications` independent simulated challenges. Replication `r`
/// draws all its randomness from `(seed, r)`, so results do not depend on
/// thread scheduling.
pub fn run_challenge_simulation(cfg: &GeneratorConfig, replications: usize, seed: u64) -> Result<SimulationReport, SimError> {
    if replications == 0 {
        return Err(SimError::Replications);
    }
    cfg.validate()?;
    let results = (0..replications)
        .into_par_iter()
        .map(|r| run_replication(cfg, r, seed))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SimulationReport { seed, config: cfg.clone(), summary: summarize(&results), replications: results })
}
