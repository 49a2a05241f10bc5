//! Firth-penalized logistic regression.
//!
//! Maximizes `l(b) + 0.5 * log det I(b)` where `I = X' W X`, `W = diag(p(1-p))`.
//! Newton steps use the Fisher information and the modified score
//! `U*_r = sum_i (y_i - p_i + h_i (1/2 - p_i)) x_ir`, with `h_i` the diagonal of
//! the weighted hat matrix. A step is halved while it would lower the
//! penalized log-likelihood.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;

use super::{DesignLayout, DesignMatrix, FitConfig, FitError};

#[derive(Debug, Clone, Serialize)]
pub struct FittedModel {
    pub coefficients: Vec<f64>,
    /// Inverse Fisher information at the estimate, row-major `p x p`.
    pub covariance: Vec<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
    pub penalized_loglik: f64,
    pub layout: DesignLayout,
}

impl FittedModel {
    pub fn std_error(&self, j: usize) -> f64 {
        self.covariance[j][j].max(0.0).sqrt()
    }

    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        self.coefficients.iter().zip(row).map(|(b, x)| b * x).sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitDiagnostics {
    pub hat_values: Vec<f64>,
    pub score_norm_at_exit: f64,
    pub step_halvings: usize,
    /// Penalized log-likelihood at the start and after every accepted step.
    pub loglik_trace: Vec<f64>,
}

pub(crate) fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(eta))` without overflow.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

struct State {
    probs: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
    penalized_loglik: f64,
    hat: Vec<f64>,
    score: DVector<f64>,
}

fn evaluate(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> Option<State> {
    let eta = x * beta;
    let probs: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
    let weights: Vec<f64> = probs.iter().map(|p| p * (1.0 - p)).collect();

    let root_w = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * weights[i].sqrt());
    let info = root_w.tr_mul(&root_w);
    let chol = info.cholesky()?;
    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    if !log_det.is_finite() {
        return None;
    }
    let loglik: f64 = y.iter().zip(eta.iter()).map(|(&yi, &e)| yi * e - softplus(e)).sum();

    // h_i = w_i x_i' I^{-1} x_i = |L^{-1} sqrt(w_i) x_i|^2.
    let z = chol.l_dirty().solve_lower_triangular(&root_w.transpose())?;
    let hat: Vec<f64> = z.column_iter().map(|c| c.norm_squared()).collect();

    let resid = DVector::from_iterator(
        y.len(),
        (0..y.len()).map(|i| y[i] - probs[i] + hat[i] * (0.5 - probs[i])),
    );
    let score = x.tr_mul(&resid);
    Some(State { probs, chol, penalized_loglik: loglik + 0.5 * log_det, hat, score })
}

/// Penalized log-likelihood `l(b) + 0.5 log det I(b)`; `None` when `I(b)` is singular.
pub fn penalized_loglik(x: &DMatrix<f64>, y: &DVector<f64>, beta: &[f64]) -> Option<f64> {
    evaluate(x, y, &DVector::from_column_slice(beta)).map(|s| s.penalized_loglik)
}

/// First column (in order) that is numerically a linear combination of the preceding ones.
pub(crate) fn dependent_column(x: &DMatrix<f64>) -> Option<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let norm = col.norm();
        if norm == 0.0 {
            return Some(j);
        }
        let mut v = col;
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let rest = v.norm();
        if rest <= 1e-9 * norm {
            return Some(j);
        }
        basis.push(v / rest);
    }
    None
}

fn singular(design: &DesignMatrix, weights: Option<&[f64]>) -> FitError {
    let x = match weights {
        Some(w) => DMatrix::from_fn(design.x.nrows(), design.x.ncols(), |i, j| design.x[(i, j)] * w[i].sqrt()),
        None => design.x.clone(),
    };
    let column = dependent_column(&x).map_or_else(|| "<unknown>".to_string(), |j| design.layout.columns[j].name.clone());
    FitError::Singular { column }
}

/// Fits the penalized model by Newton iteration from `b = 0`.
///
/// Rank-deficient designs fail with the first offending column; running out
/// of iterations returns the current estimate with `converged = false`.
pub fn fit_firth_logistic(design: &DesignMatrix, cfg: &FitConfig) -> Result<(FittedModel, FitDiagnostics), FitError> {
    let (x, y) = (&design.x, &design.y);
    if x.nrows() == 0 {
        return Err(FitError::Dimension("no observations".into()));
    }
    if dependent_column(x).is_some() {
        return Err(singular(design, None));
    }

    let mut beta = DVector::zeros(x.ncols());
    let mut state = evaluate(x, y, &beta).ok_or_else(|| singular(design, None))?;
    let mut trace = vec![state.penalized_loglik];
    let mut halvings = 0;
    let mut iterations = 0;

    while state.score.amax() >= cfg.tol && iterations < cfg.max_iter {
        let delta = state.chol.solve(&state.score);
        let slack = 1e-12 * (1.0 + state.penalized_loglik.abs());
        let mut step = 1.0;
        let mut next = None;
        for attempt in 0..=cfg.max_halvings {
            if attempt > 0 {
                step *= 0.5;
                halvings += 1;
            }
            let candidate = &beta + &delta * step;
            if let Some(s) = evaluate(x, y, &candidate) {
                // Within rounding of the current value, only a smaller score counts
                // as progress; otherwise a step that overshoots to a mirror point
                // (as happens when a hat value is 1) would be accepted forever.
                let gain = s.penalized_loglik - state.penalized_loglik;
                if gain > slack || (gain >= -slack && s.score.amax() < state.score.amax()) {
                    next = Some((candidate, s));
                    break;
                }
            }
        }
        let Some((b, s)) = next else { break };
        beta = b;
        state = s;
        trace.push(state.penalized_loglik);
        iterations += 1;
    }

    let score_norm = state.score.amax();
    if beta.iter().any(|b| !b.is_finite()) {
        let weights: Vec<f64> = state.probs.iter().map(|p| p * (1.0 - p)).collect();
        return Err(singular(design, Some(&weights)));
    }
    let inverse = state.chol.inverse();
    let covariance = (0..inverse.nrows()).map(|i| inverse.row(i).iter().copied().collect()).collect();
    let model = FittedModel {
        coefficients: beta.iter().copied().collect(),
        covariance,
        converged: score_norm < cfg.tol,
        iterations,
        penalized_loglik: state.penalized_loglik,
        layout: design.layout.clone(),
    };
    let diagnostics = FitDiagnostics { hat_values: state.hat, score_norm_at_exit: score_norm, step_halvings: halvings, loglik_trace: trace };
    Ok((model, diagnostics))
}
