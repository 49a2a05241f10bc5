use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, LogNormal, Normal};

use super::{Distribution, GeneratorConfig, SimError, StudyConfig};
use crate::expr::{parse, BoundExpr, Tri};
use crate::inference::sigmoid;
use crate::trial_data::{Arm, CovariateValue, SubjectRecord, TrialDataset};

/// Study `study_index` of the program: training studies first, the holdout last.
pub fn study_config(cfg: &GeneratorConfig, study_index: usize) -> Result<&StudyConfig, SimError> {
    match study_index {
        i if i < cfg.training.len() => Ok(&cfg.training[i]),
        i if i == cfg.training.len() => Ok(&cfg.holdout),
        i => Err(SimError::StudyIndex(i, cfg.training.len() + 1)),
    }
}

fn draw(dist: &Distribution, rng: &mut ChaCha8Rng) -> CovariateValue {
    match dist {
        Distribution::Normal { mean, sd } => CovariateValue::Numeric(Normal::new(*mean, *sd).expect("validated").sample(rng)),
        Distribution::Lognormal { meanlog, sdlog } => {
            CovariateValue::Numeric(LogNormal::new(*meanlog, *sdlog).expect("validated").sample(rng))
        }
        Distribution::Uniform { min, max } => CovariateValue::Numeric(rng.random_range(*min..*max)),
        Distribution::Bernoulli { p } => CovariateValue::Boolean(rng.random_bool(*p)),
        Distribution::Categorical { levels, probs } => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = levels.len() - 1;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            CovariateValue::Categorical(levels[chosen].clone())
        }
    }
}

/// Generates one study with block-randomized arms (exact configured counts).
///
/// Outcomes come from the true model evaluated on complete covariates;
/// missingness is applied afterwards, independently per covariate.
pub fn generate_trial(cfg: &GeneratorConfig, study_index: usize, seed: u64) -> Result<TrialDataset, SimError> {
    let study = study_config(cfg, study_index)?;
    let schema = cfg.schema()?;
    let truth = match &cfg.outcome.true_subgroup {
        Some(text) => Some(BoundExpr::bind(&parse(text)?, &schema)?),
        None => None,
    };
    let effects: Vec<(usize, f64)> = cfg
        .outcome
        .effects
        .iter()
        .map(|(name, &coef)| (schema.index_of(name).expect("validated effect covariate"), coef))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arms: Vec<Arm> = std::iter::repeat_n(Arm::Control, study.n_control)
        .chain(std::iter::repeat_n(Arm::Treatment, study.n_treatment))
        .collect();
    arms.shuffle(&mut rng);

    let mut subjects = Vec::with_capacity(arms.len());
    for (i, arm) in arms.into_iter().enumerate() {
        let covariates: Vec<CovariateValue> = cfg.covariates.iter().map(|c| draw(&c.distribution, &mut rng)).collect();
        let t = arm.indicator();
        let mut eta = cfg.outcome.intercept + cfg.outcome.treatment * t;
        for &(j, coef) in &effects {
            eta += coef
                * match &covariates[j] {
                    CovariateValue::Numeric(x) => *x,
                    CovariateValue::Boolean(b) => f64::from(u8::from(*b)),
                    _ => 0.0,
                };
        }
        let mut record = SubjectRecord {
            subject_id: format!("{}-{:04}", study.id, i + 1),
            study_id: study.id.clone(),
            arm,
            outcome: None,
            discontinued: false,
            covariates,
        };
        if let Some(g) = &truth {
            if g.evaluate(&record) == Tri::In {
                eta += cfg.outcome.modifier * t;
            }
        }
        record.outcome = Some(rng.random_bool(sigmoid(eta)));
        record.discontinued = rng.random_bool(cfg.discontinuation_rate);
        for (value, gen) in record.covariates.iter_mut().zip(&cfg.covariates) {
            if rng.random_bool(gen.missing_rate) {
                *value = CovariateValue::Missing;
            }
        }
        subjects.push(record);
    }
    Ok(TrialDataset::new(study.id.clone(), schema, subjects)?)
}
