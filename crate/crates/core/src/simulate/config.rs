use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, LogNormal, Normal};

use super::SimError;
use crate::expr::{parse, BoundExpr};
use crate::inference::ModelSpec;
use crate::trial_data::{CovariateDef, CovariateKind, CovariateSchema};

/// Largest linear predictor magnitude the outcome model may reach on the probed covariate range.
pub const MAX_ABS_ETA: f64 = 30.0;
/// Tail probability used when probing continuous covariate ranges.
const PROBE_TAIL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub id: String,
    pub n_control: usize,
    pub n_treatment: usize,
}

impl StudyConfig {
    pub fn new(id: &str, n_control: usize, n_treatment: usize) -> Self {
        Self { id: id.into(), n_control, n_treatment }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Distribution {
    Normal { mean: f64, sd: f64 },
    Lognormal { meanlog: f64, sdlog: f64 },
    Uniform { min: f64, max: f64 },
    Bernoulli { p: f64 },
    Categorical { levels: Vec<String>, probs: Vec<f64> },
}

impl Distribution {
    pub fn kind(&self) -> CovariateKind {
        match self {
            Distribution::Bernoulli { .. } => CovariateKind::Boolean,
            Distribution::Categorical { .. } => CovariateKind::Categorical,
            _ => CovariateKind::Numeric,
        }
    }

    /// Quantile of a numeric or boolean distribution; `None` for categorical ones.
    pub fn quantile(&self, prob: f64) -> Option<f64> {
        match self {
            Distribution::Normal { mean, sd } => Normal::new(*mean, *sd).ok().map(|d| d.inverse_cdf(prob)),
            Distribution::Lognormal { meanlog, sdlog } => LogNormal::new(*meanlog, *sdlog).ok().map(|d| d.inverse_cdf(prob)),
            Distribution::Uniform { min, max } => Some(min + prob * (max - min)),
            Distribution::Bernoulli { p } => Some(if prob < 1.0 - p { 0.0 } else { 1.0 }),
            Distribution::Categorical { .. } => None,
        }
    }

    /// Smallest and largest values probed when bounding the linear predictor.
    fn probe_range(&self) -> Option<(f64, f64)> {
        match self {
            Distribution::Bernoulli { .. } => Some((0.0, 1.0)),
            Distribution::Uniform { min, max } => Some((*min, *max)),
            _ => Some((self.quantile(PROBE_TAIL)?, self.quantile(1.0 - PROBE_TAIL)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateGenerator {
    pub name: String,
    pub distribution: Distribution,
    #[serde(default)]
    pub missing_rate: f64,
}

impl CovariateGenerator {
    pub fn new(name: &str, distribution: Distribution, missing_rate: f64) -> Self {
        Self { name: name.into(), distribution, missing_rate }
    }
}

/// `logit p = intercept + treatment t + sum effects[x] x + modifier t g(x)`,
/// where `g` is membership in `true_subgroup`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeModel {
    pub intercept: f64,
    pub treatment: f64,
    #[serde(default)]
    pub effects: BTreeMap<String, f64>,
    #[serde(default)]
    pub modifier: f64,
    #[serde(default)]
    pub true_subgroup: Option<String>,
}

impl Default for OutcomeModel {
    fn default() -> Self {
        Self {
            intercept: 0.4,
            treatment: 1.2,
            effects: BTreeMap::from([("WEIGHT".to_string(), -0.02), ("NAVTNF".to_string(), 0.5)]),
            modifier: 0.0,
            true_subgroup: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    /// Covariates searched; empty means every numeric and boolean covariate.
    #[serde(default)]
    pub candidates: Vec<String>,
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_grid() -> usize {
    9
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { candidates: Vec::new(), grid: default_grid() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    #[serde(default = "default_training")]
    pub training: Vec<StudyConfig>,
    #[serde(default = "default_holdout")]
    pub holdout: StudyConfig,
    #[serde(default = "default_covariates")]
    pub covariates: Vec<CovariateGenerator>,
    #[serde(default)]
    pub outcome: OutcomeModel,
    #[serde(default = "default_discontinuation")]
    pub discontinuation_rate: f64,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default = "default_bootstrap")]
    pub bootstrap_replicates: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_training() -> Vec<StudyConfig> {
    vec![
        StudyConfig::new("TRAIN1", 100, 100),
        StudyConfig::new("TRAIN2", 135, 135),
        StudyConfig::new("TRAIN3", 106, 106),
        StudyConfig::new("TRAIN4", 330, 330),
    ]
}

fn default_holdout() -> StudyConfig {
    StudyConfig::new("HOLDOUT", 190, 190)
}

fn default_covariates() -> Vec<CovariateGenerator> {
    use Distribution::*;
    vec![
        CovariateGenerator::new("AGE", Normal { mean: 50.0, sd: 12.0 }, 0.0),
        CovariateGenerator::new("WEIGHT", Normal { mean: 85.0, sd: 18.0 }, 0.0),
        CovariateGenerator::new("CRPSI", Lognormal { meanlog: 2.0, sdlog: 1.0 }, 0.02),
        CovariateGenerator::new("FACITSCO", Normal { mean: 32.0, sd: 10.0 }, 0.02),
        CovariateGenerator::new("PSTSCO", Lognormal { meanlog: 1.0, sdlog: 1.0 }, 0.05),
        CovariateGenerator::new("NEUTLSI", Normal { mean: 60.0, sd: 9.0 }, 0.03),
        CovariateGenerator::new("TNJTA78", Lognormal { meanlog: 2.8, sdlog: 0.6 }, 0.0),
        CovariateGenerator::new("TIMEPSA", Lognormal { meanlog: 1.6, sdlog: 0.9 }, 0.01),
        CovariateGenerator::new("NAVTNF", Bernoulli { p: 0.7 }, 0.0),
        CovariateGenerator::new("MTXUSE", Bernoulli { p: 0.5 }, 0.0),
        CovariateGenerator::new("SEX", Categorical { levels: vec!["F".into(), "M".into()], probs: vec![0.52, 0.48] }, 0.0),
    ]
}

fn default_discontinuation() -> f64 {
    0.05
}

fn default_bootstrap() -> usize {
    50
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            training: default_training(),
            holdout: default_holdout(),
            covariates: default_covariates(),
            outcome: OutcomeModel::default(),
            discontinuation_rate: default_discontinuation(),
            search: SearchConfig::default(),
            model: ModelSpec::default(),
            bootstrap_replicates: default_bootstrap(),
            seed: 0,
        }
    }
}

const NULL_PRESET: &str = include_str!("../../configs/null.json");
const MODIFIER_PRESET: &str = include_str!("../../configs/modifier.json");

fn invalid(path: impl Into<String>, message: impl Into<String>) -> SimError {
    SimError::Config { path: path.into(), message: message.into() }
}

impl GeneratorConfig {
    /// Bundled configurations: `null` (no effect modification) and `modifier`.
    pub fn preset(name: &str) -> Result<Self, SimError> {
        let text = match name {
            "null" => NULL_PRESET,
            "modifier" => MODIFIER_PRESET,
            other => return Err(invalid("preset", format!("unknown preset `{other}` (expected `null` or `modifier`)"))),
        };
        Self::from_json_str(text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, SimError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let cfg: Self = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a `.toml` file as TOML and anything else as JSON.
    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io { path: path.to_path_buf(), source: e })?;
        let parsed = if path.extension().is_some_and(|e| e == "toml") { Self::from_toml_str(&text) } else { Self::from_json_str(&text) };
        parsed.map_err(|e| match e {
            SimError::Parse(msg) => SimError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn schema(&self) -> Result<CovariateSchema, SimError> {
        let defs = self
            .covariates
            .iter()
            .map(|c| match &c.distribution {
                Distribution::Bernoulli { .. } => CovariateDef::boolean(&c.name),
                Distribution::Categorical { levels, .. } => {
                    CovariateDef::categorical(&c.name, &levels.iter().map(String::as_str).collect::<Vec<_>>())
                }
                _ => CovariateDef::numeric(&c.name),
            })
            .collect();
        CovariateSchema::new(defs).map_err(|e| invalid("covariates", e.to_string()))
    }

    /// Numeric and boolean covariates searched by the baseline finder.
    pub fn search_candidates(&self) -> Vec<String> {
        if !self.search.candidates.is_empty() {
            return self.search.candidates.clone();
        }
        self.covariates.iter().filter(|c| c.distribution.kind() != CovariateKind::Categorical).map(|c| c.name.clone()).collect()
    }

    fn generator(&self, name: &str) -> Option<&CovariateGenerator> {
        self.covariates.iter().find(|c| c.name == name)
    }

    /// Checks every field, reporting the offending key path.
    pub fn validate(&self) -> Result<(), SimError> {
        if self.training.is_empty() {
            return Err(invalid("training", "at least one training study is required"));
        }
        let studies = self.training.iter().enumerate().map(|(i, s)| (format!("training[{i}]"), s));
        let mut ids = std::collections::BTreeSet::new();
        for (path, s) in studies.chain(std::iter::once(("holdout".to_string(), &self.holdout))) {
            if s.id.is_empty() || s.id.contains(':') {
                return Err(invalid(format!("{path}.id"), "study id must be non-empty and must not contain ':'"));
            }
            if !ids.insert(s.id.as_str()) {
                return Err(invalid(format!("{path}.id"), format!("duplicate study id `{}`", s.id)));
            }
            if s.n_control == 0 {
                return Err(invalid(format!("{path}.n_control"), "must be positive"));
            }
            if s.n_treatment == 0 {
                return Err(invalid(format!("{path}.n_treatment"), "must be positive"));
            }
        }

        for (i, c) in self.covariates.iter().enumerate() {
            let path = format!("covariates[{i}]");
            if !(0.0..1.0).contains(&c.missing_rate) {
                return Err(invalid(format!("{path}.missing_rate"), "must lie in [0, 1)"));
            }
            let dist = format!("{path}.distribution");
            let positive = |v: f64, key: &str| if v > 0.0 && v.is_finite() { Ok(()) } else { Err(invalid(format!("{dist}.{key}"), "must be positive")) };
            let finite = |v: f64, key: &str| if v.is_finite() { Ok(()) } else { Err(invalid(format!("{dist}.{key}"), "must be finite")) };
            match &c.distribution {
                Distribution::Normal { mean, sd } => {
                    finite(*mean, "mean")?;
                    positive(*sd, "sd")?;
                }
                Distribution::Lognormal { meanlog, sdlog } => {
                    finite(*meanlog, "meanlog")?;
                    positive(*sdlog, "sdlog")?;
                }
                Distribution::Uniform { min, max } => {
                    finite(*min, "min")?;
                    finite(*max, "max")?;
                    if min >= max {
                        return Err(invalid(format!("{dist}.max"), "must exceed min"));
                    }
                }
                Distribution::Bernoulli { p } => {
                    if !(0.0..=1.0).contains(p) {
                        return Err(invalid(format!("{dist}.p"), "must lie in [0, 1]"));
                    }
                }
                Distribution::Categorical { levels, probs } => {
                    if levels.is_empty() || levels.len() != probs.len() {
                        return Err(invalid(format!("{dist}.probs"), "need one probability per level"));
                    }
                    if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                        return Err(invalid(format!("{dist}.probs"), "must be nonnegative and sum to 1"));
                    }
                }
            }
        }
        let schema = self.schema()?;

        let o = &self.outcome;
        for (key, v) in [("intercept", o.intercept), ("treatment", o.treatment), ("modifier", o.modifier)] {
            if !v.is_finite() {
                return Err(invalid(format!("outcome.{key}"), "must be finite"));
            }
        }
        let mut eta_bound = o.intercept.abs() + o.treatment.abs() + o.modifier.abs();
        for (name, &coef) in &o.effects {
            let path = format!("outcome.effects.{name}");
            let gen = self.generator(name).ok_or_else(|| invalid(&path, format!("unknown covariate `{name}`")))?;
            let (lo, hi) = gen
                .distribution
                .probe_range()
                .ok_or_else(|| invalid(&path, "categorical covariates cannot carry an outcome effect"))?;
            if !coef.is_finite() {
                return Err(invalid(&path, "must be finite"));
            }
            eta_bound += (coef * lo).abs().max((coef * hi).abs());
        }
        if !(eta_bound <= MAX_ABS_ETA) {
            return Err(invalid(
                "outcome",
                format!("linear predictor reaches |eta| = {eta_bound:.3} at extreme covariate quantiles (limit {MAX_ABS_ETA}); probabilities would leave (0, 1)"),
            ));
        }
        if let Some(text) = &o.true_subgroup {
            let expr = parse(text).map_err(|e| invalid("outcome.true_subgroup", e.to_string()))?;
            BoundExpr::bind(&expr, &schema).map_err(|e| invalid("outcome.true_subgroup", e.to_string()))?;
        } else if o.modifier != 0.0 {
            return Err(invalid("outcome.true_subgroup", "required when modifier is nonzero"));
        }

        if !(0.0..=1.0).contains(&self.discontinuation_rate) {
            return Err(invalid("discontinuation_rate", "must lie in [0, 1]"));
        }
        for (i, name) in self.search.candidates.iter().enumerate() {
            match schema.get(name) {
                None => return Err(invalid(format!("search.candidates[{i}]"), format!("unknown covariate `{name}`"))),
                Some(def) if def.kind == CovariateKind::Categorical => {
                    return Err(invalid(format!("search.candidates[{i}]"), format!("`{name}` is categorical; only numeric and boolean covariates can be searched")))
                }
                Some(_) => {}
            }
        }
        if self.search_candidates().is_empty() {
            return Err(invalid("search.candidates", "no numeric or boolean covariate to search"));
        }
        if self.search.grid < 2 {
            return Err(invalid("search.grid", "must be at least 2"));
        }
        for (i, name) in self.model.adjustment_covariates.iter().enumerate() {
            if schema.get(name).is_none() {
                return Err(invalid(format!("model.adjustment_covariates[{i}]"), format!("unknown covariate `{name}`")));
            }
        }
        if self.bootstrap_replicates < 2 {
            return Err(invalid("bootstrap_replicates", "must be at least 2"));
        }
        Ok(())
    }
}
