use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{FitError, ModelSpec};
use crate::expr::MembershipVector;
use crate::trial_data::{CovariateKind, CovariateValue, TrialDataset};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ColumnRole {
    Intercept,
    Treatment,
    Subgroup,
    Interaction,
    /// Adjustment covariate; `level` is set for one-hot categorical columns.
    Adjustment { covariate: String, level: Option<String> },
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    pub role: ColumnRole,
}

/// Column order of a design matrix: intercept, t, s, t·s, then adjustments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignLayout {
    pub columns: Vec<Column>,
}

impl DesignLayout {
    fn position(&self, role: &ColumnRole) -> Option<usize> {
        self.columns.iter().position(|c| &c.role == role)
    }

    pub fn intercept(&self) -> Option<usize> {
        self.position(&ColumnRole::Intercept)
    }

    pub fn treatment(&self) -> Option<usize> {
        self.position(&ColumnRole::Treatment)
    }

    pub fn subgroup(&self) -> Option<usize> {
        self.position(&ColumnRole::Subgroup)
    }

    pub fn interaction(&self) -> Option<usize> {
        self.position(&ColumnRole::Interaction)
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    /// Generic layout `x0, x1, ...` for raw matrices.
    pub fn generic(p: usize) -> Self {
        Self { columns: (0..p).map(|j| Column { name: format!("x{j}"), role: ColumnRole::Other }).collect() }
    }

    fn push(&mut self, name: &str, role: ColumnRole) {
        self.columns.push(Column { name: name.to_string(), role });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub layout: DesignLayout,
    /// Set when the subgroup column is constant (everyone in or everyone out);
    /// the fit will then be rank deficient.
    pub subgroup_constant: bool,
}

impl DesignMatrix {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, layout: DesignLayout) -> Result<Self, FitError> {
        if x.nrows() != y.len() || x.ncols() != layout.columns.len() {
            return Err(FitError::Dimension(format!(
                "X is {}x{}, y has {} rows, layout has {} columns",
                x.nrows(),
                x.ncols(),
                y.len(),
                layout.columns.len()
            )));
        }
        if y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(FitError::Dimension("response must be 0/1".into()));
        }
        Ok(Self { x, y, layout, subgroup_constant: false })
    }

    pub fn from_raw(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self, FitError> {
        let p = x.ncols();
        Self::new(x, y, DesignLayout::generic(p))
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    /// Rows selected by index (repeats allowed), keeping the layout.
    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        DesignMatrix {
            x: self.x.select_rows(rows),
            y: DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i])),
            layout: self.layout.clone(),
            subgroup_constant: self.subgroup_constant,
        }
    }
}

/// Design for the logistic interaction model on a dataset with complete outcomes.
///
/// Numeric adjustment covariates are mean-centered, booleans are 0/1 and
/// categoricals are one-hot against their first level. A missing adjustment
/// value is replaced by the column mean (zero after centering).
pub fn build_design_matrix(ds: &TrialDataset, m: &MembershipVector, spec: &ModelSpec) -> Result<DesignMatrix, FitError> {
    if m.subject_ids.len() != ds.len() || m.subject_ids.iter().zip(ds.subjects()).any(|(id, s)| *id != s.subject_id) {
        return Err(FitError::SubjectMismatch);
    }
    build(ds, Some(&m.flags), spec)
}

/// Design with intercept, treatment and adjustments only (no subgroup terms).
pub fn build_overall_design(ds: &TrialDataset, spec: &ModelSpec) -> Result<DesignMatrix, FitError> {
    build(ds, None, spec)
}

fn build(ds: &TrialDataset, flags: Option<&[bool]>, spec: &ModelSpec) -> Result<DesignMatrix, FitError> {
    let n = ds.len();
    let mut layout = DesignLayout { columns: Vec::new() };
    let mut cols: Vec<Vec<f64>> = Vec::new();

    let y = ds
        .subjects()
        .iter()
        .map(|s| s.outcome.map(f64::from).ok_or_else(|| FitError::MissingOutcome(s.subject_id.clone())))
        .collect::<Result<Vec<_>, _>>()?;

    let t: Vec<f64> = ds.subjects().iter().map(|s| s.arm.indicator()).collect();
    layout.push("(Intercept)", ColumnRole::Intercept);
    cols.push(vec![1.0; n]);
    layout.push("trt", ColumnRole::Treatment);
    cols.push(t.clone());

    let mut subgroup_constant = false;
    if let Some(flags) = flags {
        let s: Vec<f64> = flags.iter().map(|&f| f64::from(u8::from(f))).collect();
        subgroup_constant = flags.iter().all(|&f| f) || flags.iter().all(|&f| !f);
        layout.push("subgroup", ColumnRole::Subgroup);
        cols.push(s.clone());
        if spec.include_interaction {
            layout.push("trt:subgroup", ColumnRole::Interaction);
            cols.push(t.iter().zip(&s).map(|(a, b)| a * b).collect());
        }
    }

    for name in &spec.adjustment_covariates {
        let j = ds.schema().index_of(name).ok_or_else(|| FitError::UnknownCovariate(name.clone()))?;
        let def = &ds.schema().covariates()[j];
        let values: Vec<&CovariateValue> = ds.subjects().iter().map(|s| &s.covariates[j]).collect();
        match def.kind {
            CovariateKind::Numeric => {
                let raw: Vec<Option<f64>> = values
                    .iter()
                    .map(|v| match v {
                        CovariateValue::Numeric(x) => Some(*x),
                        _ => None,
                    })
                    .collect();
                let mean = mean_present(&raw);
                layout.push(name, ColumnRole::Adjustment { covariate: name.clone(), level: None });
                cols.push(raw.iter().map(|v| v.map_or(0.0, |x| x - mean)).collect());
            }
            CovariateKind::Boolean => {
                let raw: Vec<Option<f64>> = values
                    .iter()
                    .map(|v| match v {
                        CovariateValue::Boolean(b) => Some(f64::from(u8::from(*b))),
                        _ => None,
                    })
                    .collect();
                let mean = mean_present(&raw);
                layout.push(name, ColumnRole::Adjustment { covariate: name.clone(), level: None });
                cols.push(raw.iter().map(|v| v.unwrap_or(mean)).collect());
            }
            CovariateKind::Categorical => {
                let levels: Vec<String> = match &def.levels {
                    Some(levels) => levels.clone(),
                    None => {
                        let mut seen: Vec<String> = values
                            .iter()
                            .filter_map(|v| match v {
                                CovariateValue::Categorical(l) => Some(l.clone()),
                                _ => None,
                            })
                            .collect();
                        seen.sort();
                        seen.dedup();
                        seen
                    }
                };
                for level in levels.iter().skip(1) {
                    let raw: Vec<Option<f64>> = values
                        .iter()
                        .map(|v| match v {
                            CovariateValue::Categorical(l) => Some(f64::from(u8::from(l == level))),
                            _ => None,
                        })
                        .collect();
                    let mean = mean_present(&raw);
                    layout.push(
                        &format!("{name}[{level}]"),
                        ColumnRole::Adjustment { covariate: name.clone(), level: Some(level.clone()) },
                    );
                    cols.push(raw.iter().map(|v| v.unwrap_or(mean)).collect());
                }
            }
        }
    }

    let p = cols.len();
    let x = DMatrix::from_fn(n, p, |i, j| cols[j][i]);
    Ok(DesignMatrix { x, y: DVector::from_vec(y), layout, subgroup_constant })
}

fn mean_present(values: &[Option<f64>]) -> f64 {
    let (sum, count) = values.iter().flatten().fold((0.0, 0usize), |(s, c), &x| (s + x, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trial_data::{Arm, CovariateDef, CovariateSchema, SubjectRecord};

    fn dataset(weights: &[Option<f64>]) -> TrialDataset {
        let schema = CovariateSchema::new(vec![
            CovariateDef::numeric("WEIGHT"),
            CovariateDef::boolean("NAVTNF"),
            CovariateDef::categorical("REGION", &["EU", "US", "ASIA"]),
        ])
        .unwrap();
        let subjects = weights
            .iter()
            .enumerate()
            .map(|(i, w)| SubjectRecord {
                subject_id: format!("s{i}"),
                study_id: "S".into(),
                arm: if i % 2 == 0 { Arm::Control } else { Arm::Treatment },
                outcome: Some(i % 3 == 0),
                discontinued: false,
                covariates: vec![
                    w.map_or(CovariateValue::Missing, CovariateValue::Numeric),
                    if i == 0 { CovariateValue::Missing } else { CovariateValue::Boolean(i % 2 == 1) },
                    CovariateValue::Categorical(["EU", "US", "ASIA"][i % 3].into()),
                ],
            })
            .collect();
        TrialDataset::new("t", schema, subjects).unwrap()
    }

    fn members(ds: &TrialDataset, flags: &[bool]) -> MembershipVector {
        MembershipVector::from_flags(ds.subject_ids(), flags.to_vec())
    }

    #[test]
    fn core_columns() {
        let ds = dataset(&[Some(1.0); 4]);
        let m = members(&ds, &[false, false, true, true]);
        let d = build_design_matrix(&ds, &m, &ModelSpec::unadjusted()).unwrap();
        let expected = DMatrix::from_row_slice(4, 4, &[1., 0., 0., 0., 1., 1., 0., 0., 1., 0., 1., 0., 1., 1., 1., 1.]);
        assert_eq!(d.x, expected);
        assert_eq!(d.layout.names(), ["(Intercept)", "trt", "subgroup", "trt:subgroup"]);
        assert!(!d.subgroup_constant);
    }

    #[test]
    fn centering_and_imputation() {
        let ds = dataset(&[Some(70.0), Some(80.0), None]);
        let m = members(&ds, &[true, false, true]);
        let spec = ModelSpec { adjustment_covariates: vec!["WEIGHT".into(), "NAVTNF".into(), "REGION".into()], include_interaction: true };
        let d = build_design_matrix(&ds, &m, &spec).unwrap();
        let w = d.x.column(4);
        assert_eq!(w.as_slice(), &[-5.0, 5.0, 0.0]);
        // NAVTNF: missing for s0, observed (true, false) -> imputed 0.5
        assert_eq!(d.x.column(5).as_slice(), &[0.5, 1.0, 0.0]);
        assert_eq!(d.layout.names()[6..], ["REGION[US]".to_string(), "REGION[ASIA]".to_string()]);
        assert_eq!(d.x.column(6).as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(d.x.column(7).as_slice(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn errors_and_flags() {
        let ds = dataset(&[Some(1.0); 4]);
        let all = members(&ds, &[true; 4]);
        assert!(build_design_matrix(&ds, &all, &ModelSpec::unadjusted()).unwrap().subgroup_constant);
        let spec = ModelSpec { adjustment_covariates: vec!["BMI".into()], include_interaction: true };
        assert!(matches!(build_design_matrix(&ds, &all, &spec), Err(FitError::UnknownCovariate(_))));
        let wrong = MembershipVector::from_flags(vec!["x".into(); 4], vec![true; 4]);
        assert!(matches!(build_design_matrix(&ds, &wrong, &ModelSpec::unadjusted()), Err(FitError::SubjectMismatch)));
        let no_int = ModelSpec { include_interaction: false, ..ModelSpec::unadjusted() };
        assert_eq!(build_design_matrix(&ds, &all, &no_int).unwrap().x.ncols(), 3);
        assert_eq!(build_overall_design(&ds, &ModelSpec::unadjusted()).unwrap().x.ncols(), 2);
    }
}
