//! Trial data model: subjects, covariate schema, CSV/JSON ingestion and the
//! composite intercurrent-event rule.
//!
//! A dataset is a single wide CSV per study plus a JSON schema describing the
//! baseline covariates. Required columns are `subject_id`, `study_id`, `arm`,
//! `outcome` and `discontinued`; every schema covariate has its own column.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::expr::is_identifier;

pub const REQUIRED_COLUMNS: [&str; 5] = ["subject_id", "study_id", "arm", "outcome", "discontinued"];

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("failed to read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed CSV {}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("invalid schema file {}: {source}", path.display())]
    SchemaJson { path: PathBuf, source: serde_json::Error },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("duplicate subject_id `{0}`")]
    DuplicateSubject(String),
    #[error("line {line}: arm outside {{0,1}}: `{value}`")]
    ArmOutOfRange { line: usize, value: String },
    #[error("line {line}: outcome must be 0, 1 or missing, got `{value}`")]
    InvalidOutcome { line: usize, value: String },
    #[error("line {line}: invalid boolean `{value}` in column `{column}`")]
    InvalidBoolean { line: usize, column: String, value: String },
    #[error("categorical value `{value}` is not a declared level of `{column}` (subject `{subject}`)")]
    UnknownLevel { subject: String, column: String, value: String },
    #[error("subject `{subject}` has {found} covariate values, schema declares {expected}")]
    Conformance { subject: String, found: usize, expected: usize },
    #[error("subject `{subject}`: covariate `{column}` does not match its declared kind")]
    KindMismatch { subject: String, column: String },
    #[error("dataset `{0}` has no subjects on the {1} arm")]
    EmptyArm(String, Arm),
    #[error("schema mismatch between `{0}` and `{1}`")]
    SchemaMismatch(String, String),
    #[error("cannot pool an empty list of datasets")]
    EmptyPool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    Control,
    Treatment,
}

impl Arm {
    pub fn indicator(self) -> f64 {
        match self {
            Arm::Control => 0.0,
            Arm::Treatment => 1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Arm::Control => 0,
            Arm::Treatment => 1,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::Control => "control",
            Arm::Treatment => "treatment",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateKind {
    Numeric,
    Categorical,
    Boolean,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CovariateValue {
    Numeric(f64),
    Categorical(String),
    Boolean(bool),
    Missing,
}

impl CovariateValue {
    /// Numeric constructor mapping non-finite input to `Missing`.
    pub fn numeric(x: f64) -> Self {
        if x.is_finite() {
            CovariateValue::Numeric(x)
        } else {
            CovariateValue::Missing
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, CovariateValue::Missing)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateDef {
    pub name: String,
    pub kind: CovariateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

impl CovariateDef {
    pub fn numeric(name: &str) -> Self {
        Self { name: name.to_string(), kind: CovariateKind::Numeric, levels: None, unit: None }
    }

    pub fn boolean(name: &str) -> Self {
        Self { name: name.to_string(), kind: CovariateKind::Boolean, levels: None, unit: None }
    }

    pub fn categorical(name: &str, levels: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            kind: CovariateKind::Categorical,
            levels: Some(levels.iter().map(|s| s.to_string()).collect()),
            unit: None,
        }
    }

    pub fn has_level(&self, value: &str) -> bool {
        self.levels.as_ref().map_or(true, |levels| levels.iter().any(|l| l == value))
    }
}

/// Ordered covariate declarations. Names are unique DSL identifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSchema {
    covariates: Vec<CovariateDef>,
}

impl CovariateSchema {
    pub fn new(covariates: Vec<CovariateDef>) -> Result<Self, DataError> {
        let mut seen = HashSet::new();
        for def in &covariates {
            if !is_identifier(&def.name) {
                return Err(DataError::Schema(format!("`{}` is not a valid covariate identifier", def.name)));
            }
            if REQUIRED_COLUMNS.contains(&def.name.as_str()) {
                return Err(DataError::Schema(format!("`{}` collides with a required column", def.name)));
            }
            if !seen.insert(def.name.as_str()) {
                return Err(DataError::Schema(format!("duplicate covariate `{}`", def.name)));
            }
            match (def.kind, &def.levels) {
                (CovariateKind::Categorical, Some(levels)) if levels.is_empty() => {
                    return Err(DataError::Schema(format!("categorical `{}` declares no levels", def.name)));
                }
                (CovariateKind::Numeric | CovariateKind::Boolean, Some(_)) => {
                    return Err(DataError::Schema(format!("`{}` declares levels but is not categorical", def.name)));
                }
                _ => {}
            }
        }
        Ok(Self { covariates })
    }

    pub fn empty() -> Self {
        Self { covariates: Vec::new() }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        #[derive(Deserialize)]
        struct Raw {
            covariates: Vec<CovariateDef>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        Self::new(raw.covariates).map_err(|e| serde::de::Error::custom(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text).map_err(|source| DataError::SchemaJson { path: path.to_path_buf(), source })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn covariates(&self) -> &[CovariateDef] {
        &self.covariates
    }

    pub fn len(&self) -> usize {
        self.covariates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covariates.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.covariates.iter().position(|c| c.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&CovariateDef> {
        self.covariates.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub study_id: String,
    pub arm: Arm,
    pub outcome: Option<bool>,
    pub discontinued: bool,
    /// Values aligned with the dataset schema order.
    pub covariates: Vec<CovariateValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialDataset {
    schema: CovariateSchema,
    subjects: Vec<SubjectRecord>,
    label: String,
}

impl TrialDataset {
    /// Builds a dataset, checking schema conformance, id uniqueness and that
    /// both arms are populated. Non-finite numeric values become missing.
    pub fn new(label: impl Into<String>, schema: CovariateSchema, mut subjects: Vec<SubjectRecord>) -> Result<Self, DataError> {
        let label = label.into();
        let mut ids = HashSet::with_capacity(subjects.len());
        let mut arm_seen = [false; 2];
        for s in &mut subjects {
            if !ids.insert(s.subject_id.clone()) {
                return Err(DataError::DuplicateSubject(s.subject_id.clone()));
            }
            if s.covariates.len() != schema.len() {
                return Err(DataError::Conformance {
                    subject: s.subject_id.clone(),
                    found: s.covariates.len(),
                    expected: schema.len(),
                });
            }
            for (value, def) in s.covariates.iter_mut().zip(schema.covariates()) {
                let ok = match (&*value, def.kind) {
                    (CovariateValue::Missing, _) => true,
                    (CovariateValue::Numeric(x), CovariateKind::Numeric) => {
                        if !x.is_finite() {
                            *value = CovariateValue::Missing;
                        }
                        true
                    }
                    (CovariateValue::Boolean(_), CovariateKind::Boolean) => true,
                    (CovariateValue::Categorical(level), CovariateKind::Categorical) => {
                        if !def.has_level(level) {
                            return Err(DataError::UnknownLevel {
                                subject: s.subject_id.clone(),
                                column: def.name.clone(),
                                value: level.clone(),
                            });
                        }
                        true
                    }
                    _ => false,
                };
                if !ok {
                    return Err(DataError::KindMismatch { subject: s.subject_id.clone(), column: def.name.clone() });
                }
            }
            arm_seen[s.arm.index()] = true;
        }
        for arm in [Arm::Control, Arm::Treatment] {
            if !arm_seen[arm.index()] {
                return Err(DataError::EmptyArm(label, arm));
            }
        }
        Ok(Self { schema, subjects, label })
    }

    pub fn schema(&self) -> &CovariateSchema {
        &self.schema
    }

    pub fn subjects(&self) -> &[SubjectRecord] {
        &self.subjects
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn subject_ids(&self) -> Vec<String> {
        self.subjects.iter().map(|s| s.subject_id.clone()).collect()
    }

    pub fn value(&self, subject: usize, covariate: &str) -> Option<&CovariateValue> {
        let j = self.schema.index_of(covariate)?;
        self.subjects.get(subject).map(|s| &s.covariates[j])
    }

    pub fn has_missing_outcomes(&self) -> bool {
        self.subjects.iter().any(|s| s.outcome.is_none())
    }
}

/// Whether the outcome column must be present in the CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeColumn {
    Required,
    /// Blinded holdout: the column may be absent, all outcomes are then missing.
    Optional,
}

fn is_missing_token(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
}

fn parse_bool(cell: &str) -> Option<bool> {
    match cell.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

/// Loads a wide CSV with its JSON schema; the outcome column is required.
pub fn load_dataset(data_path: &Path, schema_path: &Path) -> Result<TrialDataset, DataError> {
    load_dataset_with(data_path, schema_path, OutcomeColumn::Required)
}

pub fn load_dataset_with(data_path: &Path, schema_path: &Path, outcome: OutcomeColumn) -> Result<TrialDataset, DataError> {
    let schema = CovariateSchema::load(schema_path)?;
    let file = std::fs::File::open(data_path).map_err(|source| DataError::Io { path: data_path.to_path_buf(), source })?;
    let label = data_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    read_dataset(file, schema, label, outcome).map_err(|e| match e {
        DataError::Csv { source, .. } => DataError::Csv { path: data_path.to_path_buf(), source },
        other => other,
    })
}

/// Parses dataset CSV content from any reader.
pub fn read_dataset<R: std::io::Read>(
    reader: R,
    schema: CovariateSchema,
    label: String,
    outcome: OutcomeColumn,
) -> Result<TrialDataset, DataError> {
    let csv_err = |source| DataError::Csv { path: PathBuf::new(), source };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| column(name).ok_or_else(|| DataError::MissingColumn(name.to_string()));

    let id_col = required("subject_id")?;
    let study_col = required("study_id")?;
    let arm_col = required("arm")?;
    let outcome_col = match outcome {
        OutcomeColumn::Required => Some(required("outcome")?),
        OutcomeColumn::Optional => column("outcome"),
    };
    let disc_col = required("discontinued")?;
    let cov_cols = schema
        .covariates()
        .iter()
        .map(|c| required(&c.name))
        .collect::<Result<Vec<_>, _>>()?;

    let mut subjects = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let line = row + 2;
        let cell = |i: usize| record.get(i).unwrap_or("");

        let arm = match cell(arm_col) {
            "0" => Arm::Control,
            "1" => Arm::Treatment,
            other => return Err(DataError::ArmOutOfRange { line, value: other.to_string() }),
        };
        let outcome = match outcome_col.map(cell) {
            None => None,
            Some(v) if is_missing_token(v) => None,
            Some("0") => Some(false),
            Some("1") => Some(true),
            Some(v) => return Err(DataError::InvalidOutcome { line, value: v.to_string() }),
        };
        let discontinued = parse_bool(cell(disc_col)).ok_or_else(|| DataError::InvalidBoolean {
            line,
            column: "discontinued".into(),
            value: cell(disc_col).to_string(),
        })?;

        let mut covariates = Vec::with_capacity(schema.len());
        for (def, &col) in schema.covariates().iter().zip(&cov_cols) {
            let raw = cell(col);
            let value = if is_missing_token(raw) {
                CovariateValue::Missing
            } else {
                match def.kind {
                    CovariateKind::Numeric => raw.parse::<f64>().map_or(CovariateValue::Missing, CovariateValue::numeric),
                    CovariateKind::Boolean => CovariateValue::Boolean(parse_bool(raw).ok_or_else(|| {
                        DataError::InvalidBoolean { line, column: def.name.clone(), value: raw.to_string() }
                    })?),
                    CovariateKind::Categorical => CovariateValue::Categorical(raw.to_string()),
                }
            };
            covariates.push(value);
        }

        subjects.push(SubjectRecord {
            subject_id: cell(id_col).to_string(),
            study_id: cell(study_col).to_string(),
            arm,
            outcome,
            discontinued,
            covariates,
        });
    }
    TrialDataset::new(label, schema, subjects)
}

/// Serializes a dataset back into the CSV + schema JSON pair read by [`load_dataset`].
pub fn write_dataset(ds: &TrialDataset, data_path: &Path, schema_path: &Path) -> Result<(), DataError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| DataError::Io { path, source }
    };
    std::fs::write(schema_path, ds.schema.to_json()).map_err(io(schema_path))?;
    let mut out = Vec::new();
    write_dataset_csv(ds, &mut out).map_err(|source| DataError::Csv { path: data_path.to_path_buf(), source })?;
    std::fs::write(data_path, out).map_err(io(data_path))
}

pub fn write_dataset_csv<W: std::io::Write>(ds: &TrialDataset, writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
    header.extend(ds.schema.covariates().iter().map(|c| c.name.as_str()));
    w.write_record(&header)?;
    for s in &ds.subjects {
        let mut row = vec![
            s.subject_id.clone(),
            s.study_id.clone(),
            s.arm.index().to_string(),
            match s.outcome {
                Some(true) => "1".into(),
                Some(false) => "0".into(),
                None => "NA".into(),
            },
            s.discontinued.to_string(),
        ];
        row.extend(s.covariates.iter().map(|v| match v {
            CovariateValue::Numeric(x) => x.to_string(),
            CovariateValue::Categorical(l) => l.clone(),
            CovariateValue::Boolean(b) => b.to_string(),
            CovariateValue::Missing => "NA".into(),
        }));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Discontinued subjects and subjects without a recorded outcome count as non-responders.
pub fn apply_composite_nonresponse(ds: &TrialDataset) -> TrialDataset {
    let subjects = ds
        .subjects
        .iter()
        .map(|s| {
            let mut s = s.clone();
            s.outcome = Some(!s.discontinued && s.outcome.unwrap_or(false));
            s
        })
        .collect();
    TrialDataset { schema: ds.schema.clone(), subjects, label: ds.label.clone() }
}

/// Concatenates studies sharing one schema. Subject ids occurring in more
/// than one dataset are prefixed with `<label>:` in every dataset they occur in.
pub fn pool_studies(datasets: &[TrialDataset]) -> Result<TrialDataset, DataError> {
    let first = datasets.first().ok_or(DataError::EmptyPool)?;
    if datasets.len() == 1 {
        return Ok(first.clone());
    }
    for ds in &datasets[1..] {
        if ds.schema != first.schema {
            return Err(DataError::SchemaMismatch(first.label.clone(), ds.label.clone()));
        }
    }
    let mut occurrences: HashMap<&str, usize> = HashMap::new();
    for ds in datasets {
        for s in &ds.subjects {
            *occurrences.entry(s.subject_id.as_str()).or_insert(0) += 1;
        }
    }
    let subjects = datasets
        .iter()
        .flat_map(|ds| {
            let occurrences = &occurrences;
            ds.subjects.iter().map(move |s| {
                let mut s = s.clone();
                if occurrences[s.subject_id.as_str()] > 1 {
                    s.subject_id = format!("{}:{}", ds.label, s.subject_id);
                }
                s
            })
        })
        .collect();
    let label = datasets.iter().map(|d| d.label.as_str()).collect::<Vec<_>>().join("+");
    TrialDataset::new(label, first.schema.clone(), subjects)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub n_subjects: usize,
    pub n_control: usize,
    pub n_treatment: usize,
    /// Response rate among subjects with an observed outcome, per arm.
    pub response_rate_control: Option<f64>,
    pub response_rate_treatment: Option<f64>,
    /// Fraction of missing values per covariate, in schema order.
    pub missingness: Vec<(String, f64)>,
}

pub fn summarize(ds: &TrialDataset) -> DatasetSummary {
    let mut n = [0usize; 2];
    let mut observed = [0usize; 2];
    let mut responders = [0usize; 2];
    let mut missing = vec![0usize; ds.schema.len()];
    for s in &ds.subjects {
        let a = s.arm.index();
        n[a] += 1;
        if let Some(y) = s.outcome {
            observed[a] += 1;
            responders[a] += usize::from(y);
        }
        for (m, v) in missing.iter_mut().zip(&s.covariates) {
            *m += usize::from(v.is_missing());
        }
    }
    let rate = |a: usize| (observed[a] > 0).then(|| responders[a] as f64 / observed[a] as f64);
    DatasetSummary {
        n_subjects: ds.len(),
        n_control: n[0],
        n_treatment: n[1],
        response_rate_control: rate(0),
        response_rate_treatment: rate(1),
        missingness: ds
            .schema
            .covariates()
            .iter()
            .zip(missing)
            .map(|(c, m)| (c.name.clone(), m as f64 / ds.len().max(1) as f64))
            .collect(),
    }
}
