use serde::{Deserialize, Serialize};

use super::Submission;
use crate::expr::{membership, parse, ExprError, MembershipVector};
use crate::trial_data::{Arm, TrialDataset};

/// Longest accepted subgroup expression, in characters.
pub const MAX_EXPRESSION_CHARS: usize = 100;
/// Fewest subjects allowed in any subgroup-by-arm cell.
pub const MIN_CELL_COUNT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCounts {
    pub subgroup_treatment: usize,
    pub subgroup_control: usize,
    pub complement_treatment: usize,
    pub complement_control: usize,
}

impl CellCounts {
    pub fn from_membership(ds: &TrialDataset, m: &MembershipVector) -> Self {
        let mut c = [[0usize; 2]; 2];
        for (s, &member) in ds.subjects().iter().zip(&m.flags) {
            c[usize::from(member)][s.arm.index()] += 1;
        }
        Self {
            subgroup_treatment: c[1][Arm::Treatment.index()],
            subgroup_control: c[1][Arm::Control.index()],
            complement_treatment: c[0][Arm::Treatment.index()],
            complement_control: c[0][Arm::Control.index()],
        }
    }

    /// Cells in a fixed order with their display names.
    pub fn cells(&self) -> [(&'static str, usize); 4] {
        [
            ("subgroup/treatment", self.subgroup_treatment),
            ("subgroup/control", self.subgroup_control),
            ("complement/treatment", self.complement_treatment),
            ("complement/control", self.complement_control),
        ]
    }

    pub fn subgroup_size(&self) -> usize {
        self.subgroup_treatment + self.subgroup_control
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityReport {
    pub team_id: String,
    pub counts: Option<CellCounts>,
    /// Subjects whose membership could not be decided because of missing covariates.
    pub undetermined: usize,
    pub valid: bool,
    pub reasons: Vec<String>,
}

/// Checks a submission against the holdout covariates. Outcomes are never read.
pub fn check_validity(sub: &Submission, holdout: &TrialDataset) -> ValidityReport {
    let mut reasons = Vec::new();
    let length = sub.subgroup.chars().count();
    if length > MAX_EXPRESSION_CHARS {
        reasons.push(format!("expression has {length} characters (limit {MAX_EXPRESSION_CHARS})"));
    }
    if !(sub.sigma_pred > 0.0 && sub.sigma_pred.is_finite()) {
        reasons.push(format!("sigma_pred must be positive, got {}", sub.sigma_pred));
    }
    if !(-1.0..=1.0).contains(&sub.delta_pred) {
        reasons.push(format!("delta_pred must lie in [-1, 1], got {}", sub.delta_pred));
    }

    let mut counts = None;
    let mut undetermined = 0;
    match parse(&sub.subgroup).and_then(|e| membership(&e, holdout)) {
        Ok(m) => {
            let c = CellCounts::from_membership(holdout, &m);
            for (name, n) in c.cells() {
                if n < MIN_CELL_COUNT {
                    reasons.push(format!("{name} has {n} subjects (minimum {MIN_CELL_COUNT})"));
                }
            }
            undetermined = m.unknown_count;
            counts = Some(c);
        }
        Err(ExprError::UnknownCovariate(name)) => reasons.push(format!("unknown covariate `{name}`")),
        Err(e) => reasons.push(format!("invalid expression: {e}")),
    }
    ValidityReport { team_id: sub.team_id.clone(), counts, undetermined, valid: reasons.is_empty(), reasons }
}
