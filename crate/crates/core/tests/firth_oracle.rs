use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use subchal_core::expr::membership;
use subchal_core::inference::{
    bootstrap_replicates, bootstrap_sd, build_design_matrix, fit_firth_logistic, interaction_statistic, standardized_risk_difference,
    DesignMatrix, Target,
};
use subchal_core::scoring::score_s1;
use subchal_core::stats::{mean, sample_sd};
use subchal_core::trial_data::CovariateDef;
use subchal_core::{parse, Arm, CovariateSchema, CovariateValue, FitConfig, ModelSpec, SubjectRecord, TrialDataset};

fn sigmoid(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

/// Rows `(x, y)` for a single binary predictor: `a` events and `b` non-events at
/// `x = 0`, `c` events and `d` non-events at `x = 1`.
fn two_by_two(a: usize, b: usize, c: usize, d: usize) -> DesignMatrix {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (x, events, non) in [(0.0, a, b), (1.0, c, d)] {
        for k in 0..events + non {
            rows.extend([1.0, x]);
            y.push(if k < events { 1.0 } else { 0.0 });
        }
    }
    DesignMatrix::from_raw(DMatrix::from_row_slice(y.len(), 2, &rows), DVector::from_vec(y)).unwrap()
}

/// Penalized log-likelihood written out for the two-group model, where
/// `det I = n0 w0 n1 w1`.
fn two_by_two_objective(a: f64, b: f64, c: f64, d: f64, b0: f64, b1: f64) -> f64 {
    let group = |events: f64, non: f64, eta: f64| {
        let p = sigmoid(eta);
        (events * p.ln() + non * (1.0 - p).ln(), (events + non) * p * (1.0 - p))
    };
    let (l0, i0) = group(a, b, b0);
    let (l1, i1) = group(c, d, b0 + b1);
    l0 + l1 + 0.5 * (i0 * i1).ln()
}

/// Coarse grid followed by a shrinking compass search.
fn grid_maximize(f: impl Fn(f64, f64) -> f64) -> (f64, f64) {
    let mut best = (0.0, 0.0);
    let mut best_val = f64::NEG_INFINITY;
    for i in -40..=40 {
        for j in -40..=40 {
            let (u, v) = (i as f64 * 0.25, j as f64 * 0.25);
            let val = f(u, v);
            if val > best_val {
                best = (u, v);
                best_val = val;
            }
        }
    }
    let mut step = 0.25;
    while step > 1e-10 {
        let mut moved = false;
        for (du, dv) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step), (step, step), (-step, -step), (step, -step), (-step, step)] {
            let cand = (best.0 + du, best.1 + dv);
            let val = f(cand.0, cand.1);
            if val > best_val {
                best = cand;
                best_val = val;
                moved = true;
            }
        }
        if !moved {
            step /= 2.0;
        }
    }
    best
}

#[test]
fn two_by_two_matches_half_cell_and_direct_maximization() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut checked = 0;
    while checked < 200 {
        let [a, b, c, d]: [usize; 4] = std::array::from_fn(|_| rng.random_range(0..=20));
        if a + b == 0 || c + d == 0 {
            continue;
        }
        checked += 1;
        let (fit, diag) = fit_firth_logistic(&two_by_two(a, b, c, d), &FitConfig::default()).unwrap();
        assert!(fit.converged, "{a} {b} {c} {d}: {diag:?}");
        let h = |x: usize| x as f64 + 0.5;
        let b0 = (h(a) / h(b)).ln();
        let b1 = (h(c) * h(b) / (h(d) * h(a))).ln();
        assert!((fit.coefficients[0] - b0).abs() < 1e-6, "{a} {b} {c} {d}");
        assert!((fit.coefficients[1] - b1).abs() < 1e-6, "{a} {b} {c} {d}");

        let (g0, g1) = grid_maximize(|u, v| two_by_two_objective(a as f64, b as f64, c as f64, d as f64, u, v));
        assert!((fit.coefficients[0] - g0).abs() < 1e-4 && (fit.coefficients[1] - g1).abs() < 1e-4, "{a} {b} {c} {d}");
    }
}

#[test]
fn separated_data_gives_finite_estimates() {
    for (a, b, c, d) in [(0, 10, 10, 0), (5, 0, 0, 5), (0, 20, 3, 0), (0, 7, 0, 9)] {
        let (fit, _) = fit_firth_logistic(&two_by_two(a, b, c, d), &FitConfig::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.coefficients.iter().all(|b| b.is_finite() && b.abs() < 20.0), "{:?}", fit.coefficients);
    }
}

fn random_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DesignMatrix {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let beta: Vec<f64> = (0..p).map(|_| normal.sample(rng) * 0.7).collect();
    let mut rows = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = vec![1.0];
        row.extend((1..p).map(|_| normal.sample(rng)));
        let eta: f64 = row.iter().zip(&beta).map(|(x, b)| x * b).sum();
        y.push(f64::from(u8::from(rng.random_bool(sigmoid(eta)))));
        rows.extend(row);
    }
    DesignMatrix::from_raw(DMatrix::from_row_slice(n, p, &rows), DVector::from_vec(y)).unwrap()
}

fn loglik(design: &DesignMatrix, beta: &[f64]) -> f64 {
    (0..design.nrows())
        .map(|i| {
            let eta: f64 = design.x.row(i).iter().zip(beta).map(|(x, b)| x * b).sum();
            let p = sigmoid(eta);
            design.y[i] * p.ln() + (1.0 - design.y[i]) * (1.0 - p).ln()
        })
        .sum()
}

#[test]
fn covariance_is_inverse_observed_information() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let design = random_design(&mut rng, 150, 3);
        let (fit, _) = fit_firth_logistic(&design, &FitConfig::default()).unwrap();
        let p = fit.coefficients.len();
        // Central second differences of the plain log-likelihood, whose
        // negative Hessian equals X'WX for the logistic model.
        let eps = 1e-4;
        let mut hess = DMatrix::zeros(p, p);
        for j in 0..p {
            for k in 0..p {
                let at = |dj: f64, dk: f64| {
                    let mut b = fit.coefficients.clone();
                    b[j] += dj;
                    b[k] += dk;
                    loglik(&design, &b)
                };
                hess[(j, k)] = -(at(eps, eps) - at(eps, -eps) - at(-eps, eps) + at(-eps, -eps)) / (4.0 * eps * eps);
            }
        }
        let inv = hess.try_inverse().unwrap();
        for j in 0..p {
            for k in 0..p {
                let scale = (fit.covariance[j][j] * fit.covariance[k][k]).sqrt();
                assert!((fit.covariance[j][k] - inv[(j, k)]).abs() < 1e-3 * scale, "({j},{k})");
            }
        }
    }
}

#[test]
fn fit_diagnostics_are_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = FitConfig::default();
    for n in [30, 80, 300] {
        let design = random_design(&mut rng, n, 4);
        let (fit, diag) = fit_firth_logistic(&design, &cfg).unwrap();
        let hat_sum: f64 = diag.hat_values.iter().sum();
        assert!((hat_sum - 4.0).abs() < 1e-8, "sum of hat values {hat_sum}");
        assert!(diag.loglik_trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(fit.converged && diag.score_norm_at_exit < cfg.tol);
        assert!((diag.loglik_trace.last().unwrap() - fit.penalized_loglik).abs() < 1e-9);
    }
}

#[test]
fn shifting_a_covariate_only_moves_the_intercept() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let design = random_design(&mut rng, 120, 3);
    let mut shifted = design.clone();
    for i in 0..shifted.nrows() {
        shifted.x[(i, 2)] += 7.5;
    }
    let cfg = FitConfig::default();
    let (a, _) = fit_firth_logistic(&design, &cfg).unwrap();
    let (b, _) = fit_firth_logistic(&shifted, &cfg).unwrap();
    assert!((a.coefficients[1] - b.coefficients[1]).abs() < 1e-7);
    assert!((a.coefficients[2] - b.coefficients[2]).abs() < 1e-7);
    assert!((a.coefficients[0] - (b.coefficients[0] + 7.5 * b.coefficients[2])).abs() < 1e-6);
    assert!((a.penalized_loglik - b.penalized_loglik).abs() < 1e-8);
}

fn schema() -> CovariateSchema {
    CovariateSchema::new(vec![CovariateDef::numeric("X"), CovariateDef::boolean("G")]).unwrap()
}

/// `(arm, response, x, in_group)` rows in one study.
fn dataset(rows: &[(Arm, bool, f64, bool)]) -> TrialDataset {
    let subjects = rows
        .iter()
        .enumerate()
        .map(|(i, &(arm, y, x, g))| SubjectRecord {
            subject_id: format!("S{i:04}"),
            study_id: "T".into(),
            arm,
            outcome: Some(y),
            discontinued: false,
            covariates: vec![CovariateValue::Numeric(x), CovariateValue::Boolean(g)],
        })
        .collect();
    TrialDataset::new("T", schema(), subjects).unwrap()
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize, gamma: f64) -> Vec<(Arm, bool, f64, bool)> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    (0..n)
        .map(|i| {
            let arm = if i % 2 == 0 { Arm::Control } else { Arm::Treatment };
            let x = normal.sample(rng);
            let g = rng.random_bool(0.4);
            let t = arm.indicator();
            let eta = -0.3 + 0.8 * t + 0.4 * x + 0.3 * f64::from(u8::from(g)) + gamma * t * f64::from(u8::from(g));
            (arm, rng.random_bool(sigmoid(eta)), x, g)
        })
        .collect()
}

fn adjusted() -> ModelSpec {
    ModelSpec { adjustment_covariates: vec!["X".into()], include_interaction: true }
}

#[test]
fn identical_patterns_give_zero_interaction() {
    let mut rows = Vec::new();
    for g in [false, true] {
        for (arm, events) in [(Arm::Control, 3), (Arm::Treatment, 7)] {
            for k in 0..12 {
                rows.push((arm, k < events, 0.0, g));
            }
        }
    }
    let ds = dataset(&rows);
    let m = membership(&parse("G == TRUE").unwrap(), &ds).unwrap();
    let design = build_design_matrix(&ds, &m, &ModelSpec::unadjusted()).unwrap();
    let (fit, _) = fit_firth_logistic(&design, &FitConfig::default()).unwrap();
    let (beta, _) = interaction_statistic(&fit).unwrap();
    assert!(beta.abs() < 1e-8, "{beta}");
}

#[test]
fn standardized_difference_matches_counterfactual_averaging() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for n in [24, 37, 50] {
        for _ in 0..5 {
            let rows = random_rows(&mut rng, n, 1.0);
            if !rows.iter().any(|r| r.3) || rows.iter().all(|r| r.3) {
                continue;
            }
            let ds = dataset(&rows);
            let m = membership(&parse("G == TRUE").unwrap(), &ds).unwrap();
            let Ok(design) = build_design_matrix(&ds, &m, &adjusted()) else { continue };
            let Ok((fit, _)) = fit_firth_logistic(&design, &FitConfig::default()) else { continue };
            let b = &fit.coefficients;
            let x_mean = mean(&rows.iter().map(|r| r.2).collect::<Vec<_>>());
            // Coefficients are (intercept, treatment, subgroup, interaction, X - mean(X)).
            let p = |t: f64, s: f64, x: f64| sigmoid(b[0] + b[1] * t + b[2] * s + b[3] * t * s + b[4] * (x - x_mean));
            let brute = |keep: &dyn Fn(bool) -> bool, s_of: &dyn Fn(bool) -> f64| {
                let chosen: Vec<f64> =
                    rows.iter().filter(|r| keep(r.3)).map(|r| p(1.0, s_of(r.3), r.2) - p(0.0, s_of(r.3), r.2)).collect();
                mean(&chosen)
            };
            let cases: [(Target, f64); 3] = [
                (Target::Subgroup, brute(&|g| g, &|_| 1.0)),
                (Target::Complement, brute(&|g| !g, &|_| 0.0)),
                (Target::Overall, brute(&|_| true, &|g| f64::from(u8::from(g)))),
            ];
            for (target, want) in cases {
                let got = standardized_risk_difference(&fit, &design, &m, target).unwrap();
                assert!((got - want).abs() < 1e-10, "{target:?}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn swapping_subgroup_and_complement_flips_s1() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let ds = dataset(&random_rows(&mut rng, 200, 0.7));
        let spec = ModelSpec::unadjusted();
        let m = membership(&parse("G == TRUE").unwrap(), &ds).unwrap();
        let c = membership(&parse("G == FALSE").unwrap(), &ds).unwrap();
        let (s_in, _) = score_s1(&ds, &m, &spec).unwrap();
        let (s_out, _) = score_s1(&ds, &c, &spec).unwrap();
        assert!((s_in + s_out).abs() < 1e-6, "{s_in} vs {s_out}");
    }
}

#[test]
fn null_interaction_statistic_is_centered() {
    let s1: Vec<f64> = (0..500u64)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + r);
            let ds = dataset(&random_rows(&mut rng, 300, 0.0));
            let m = membership(&parse("G == TRUE").unwrap(), &ds).unwrap();
            score_s1(&ds, &m, &adjusted()).unwrap().0
        })
        .collect();
    assert!(mean(&s1).abs() < 0.15, "mean S1 {}", mean(&s1));
    assert!((sample_sd(&s1) - 1.0).abs() < 0.15, "sd S1 {}", sample_sd(&s1));
}

#[test]
fn bootstrap_is_reproducible_and_seed_sensitive() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ds = dataset(&random_rows(&mut rng, 200, 0.5));
    let e = parse("G == TRUE").unwrap();
    let a = bootstrap_replicates(&ds, &e, &adjusted(), 30, 9).unwrap();
    let b = bootstrap_replicates(&ds, &e, &adjusted(), 30, 9).unwrap();
    let c = bootstrap_replicates(&ds, &e, &adjusted(), 30, 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn bootstrap_of_identical_subjects_has_zero_spread() {
    let rows: Vec<_> = (0..40).map(|i| if i % 2 == 0 { (Arm::Control, false, 1.0, true) } else { (Arm::Treatment, true, 1.0, true) }).collect();
    let ds = dataset(&rows);
    let sd = bootstrap_sd(&ds, &parse("X > 0").unwrap(), &ModelSpec::unadjusted(), 20, 3).unwrap();
    assert!(sd < 1e-12, "{sd}");
}

/// Bootstrap standard deviation against the spread of the estimate over
/// fresh datasets from the same generating process.
#[test]
fn bootstrap_sd_tracks_monte_carlo_spread() {
    let e = parse("G == TRUE").unwrap();
    let spec = adjusted();
    let estimate = |ds: &TrialDataset| {
        let m = membership(&e, ds).unwrap();
        let design = build_design_matrix(ds, &m, &spec).unwrap();
        let (fit, _) = fit_firth_logistic(&design, &FitConfig::default()).unwrap();
        standardized_risk_difference(&fit, &design, &m, Target::Subgroup).unwrap()
    };
    let fresh: Vec<f64> = (0..400u64).map(|r| estimate(&dataset(&random_rows(&mut ChaCha8Rng::seed_from_u64(r), 400, 0.5)))).collect();
    let truth = sample_sd(&fresh);
    let boot: Vec<f64> = (0..8u64)
        .map(|r| bootstrap_sd(&dataset(&random_rows(&mut ChaCha8Rng::seed_from_u64(5000 + r), 400, 0.5)), &e, &spec, 200, r).unwrap())
        .collect();
    let ratio = mean(&boot) / truth;
    assert!((ratio - 1.0).abs() < 0.25, "bootstrap {} vs Monte Carlo {truth}", mean(&boot));
}
