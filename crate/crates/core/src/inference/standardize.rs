use serde::Serialize;

use super::firth::sigmoid;
use super::{DesignMatrix, FitError, FittedModel};
use crate::expr::MembershipVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Target {
    /// Subgroup members, with the subgroup indicator fixed at 1.
    Subgroup,
    /// Non-members, with the subgroup indicator fixed at 0.
    Complement,
    /// Everyone, with their observed subgroup indicator.
    Overall,
}

/// Treatment-by-subgroup coefficient and its model-based standard error.
pub fn interaction_statistic(fm: &FittedModel) -> Result<(f64, f64), FitError> {
    let j = fm.layout.interaction().ok_or(FitError::NoInteraction)?;
    Ok((fm.coefficients[j], fm.std_error(j)))
}

/// Mean over the target population of `p(t=1) - p(t=0)` under the fitted model.
///
/// `m` supplies the subgroup membership of the design rows; it selects the
/// target subjects and, when the model has subgroup terms, the value of `s`
/// used in both counterfactual predictions.
pub fn standardized_risk_difference(
    fm: &FittedModel,
    design: &DesignMatrix,
    m: &MembershipVector,
    target: Target,
) -> Result<f64, FitError> {
    if m.len() != design.nrows() {
        return Err(FitError::SubjectMismatch);
    }
    if fm.coefficients.len() != design.x.ncols() {
        return Err(FitError::Dimension("model and design have different columns".into()));
    }
    let trt = fm.layout.treatment().ok_or_else(|| FitError::Dimension("model has no treatment column".into()))?;
    let sub = fm.layout.subgroup();
    let inter = fm.layout.interaction();

    let mut row = vec![0.0; design.x.ncols()];
    let mut total = 0.0;
    let mut count = 0usize;
    for (i, &member) in m.flags.iter().enumerate() {
        let s = match target {
            Target::Subgroup if member => 1.0,
            Target::Complement if !member => 0.0,
            Target::Overall => f64::from(u8::from(member)),
            _ => continue,
        };
        row.iter_mut().zip(design.x.row(i).iter()).for_each(|(r, x)| *r = *x);
        if let Some(j) = sub {
            row[j] = s;
        }
        let mut predict = |t: f64| {
            row[trt] = t;
            if let Some(j) = inter {
                row[j] = t * s;
            }
            sigmoid(fm.linear_predictor(&row))
        };
        total += predict(1.0) - predict(0.0);
        count += 1;
    }
    if count == 0 {
        return Err(FitError::EmptyTarget(target));
    }
    Ok(total / count as f64)
}
