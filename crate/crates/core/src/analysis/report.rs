use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    classical_mds, pairwise_jaccard_matrix, prediction_error_report, variable_frequency, AnalysisError, DistanceMatrix,
    Embedding2D, PredictionErrorReport,
};
use crate::expr::{membership, parse};
use crate::scoring::ScoreBoard;
use crate::stats::fmt_sig6;
use crate::trial_data::TrialDataset;

/// Cross-team analyses over the ranked teams of a scored round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundAnalysis {
    /// Every covariate with the number of teams using it.
    pub variable_frequency: Vec<(String, usize)>,
    pub jaccard: DistanceMatrix,
    /// Absent when fewer than three teams were ranked.
    pub mds: Option<Embedding2D>,
    pub prediction_errors: PredictionErrorReport,
}

impl RoundAnalysis {
    /// Covariates used by at least two teams.
    pub fn frequent_variables(&self) -> impl Iterator<Item = &(String, usize)> {
        self.variable_frequency.iter().filter(|(_, n)| *n >= 2)
    }
}

/// Runs all analyses; memberships are evaluated on the holdout covariates.
pub fn analyze_round(board: &ScoreBoard, holdout: &TrialDataset) -> Result<RoundAnalysis, AnalysisError> {
    let teams: Vec<_> = board.ranked().collect();
    let exprs = teams.iter().map(|t| parse(&t.subgroup)).collect::<Result<Vec<_>, _>>()?;
    let memberships = exprs.iter().map(|e| membership(e, holdout)).collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<String> = teams.iter().map(|t| t.team_id.clone()).collect();
    let jaccard = pairwise_jaccard_matrix(&labels, &memberships)?;
    let mds = if labels.len() >= 3 { Some(classical_mds(&jaccard)?) } else { None };
    Ok(RoundAnalysis {
        variable_frequency: variable_frequency(&exprs),
        jaccard,
        mds,
        prediction_errors: prediction_error_report(board),
    })
}

#[derive(Serialize)]
struct Bundle<'a> {
    scoreboard: &'a ScoreBoard,
    #[serde(skip_serializing_if = "Option::is_none")]
    analysis: Option<&'a RoundAnalysis>,
}

/// Shape of `report.json`.
#[derive(Debug, Deserialize)]
pub struct ReportBundle {
    pub scoreboard: ScoreBoard,
    #[serde(default)]
    pub analysis: Option<RoundAnalysis>,
}

pub fn read_report(path: &Path) -> Result<ReportBundle, AnalysisError> {
    let text = fs::read_to_string(path).map_err(|e| AnalysisError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| AnalysisError::Json { path: path.to_path_buf(), source: e })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), AnalysisError> {
    fs::write(path, bytes).map_err(|e| AnalysisError::io(path, e))
}

fn csv_bytes(rows: Vec<Vec<String>>) -> Result<Vec<u8>, AnalysisError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| AnalysisError::Shape(e.to_string()))
}

/// Writes the scoreboard files (`scoreboard.csv`, `alternative.csv`, `report.json`).
pub fn emit_scoreboard(board: &ScoreBoard, out_dir: &Path) -> Result<(), AnalysisError> {
    write_bundle(board, None, out_dir)
}

fn write_bundle(board: &ScoreBoard, analysis: Option<&RoundAnalysis>, out_dir: &Path) -> Result<(), AnalysisError> {
    fs::create_dir_all(out_dir).map_err(|e| AnalysisError::io(out_dir, e))?;
    let mut buf = Vec::new();
    board.write_csv(&mut buf)?;
    write_file(&out_dir.join("scoreboard.csv"), &buf)?;
    let mut buf = Vec::new();
    board.write_alternative_csv(&mut buf)?;
    write_file(&out_dir.join("alternative.csv"), &buf)?;
    let mut json = serde_json::to_string_pretty(&Bundle { scoreboard: board, analysis })
        .map_err(|e| AnalysisError::Json { path: out_dir.join("report.json"), source: e })?;
    json.push('\n');
    write_file(&out_dir.join("report.json"), json.as_bytes())
}

/// Writes the scoreboard files plus `jaccard.csv`, `mds.csv`,
/// `variable_frequency.csv`, `prediction_errors.csv` and, with `svg`,
/// `mds.svg` and `error_vs_size.svg`.
pub fn emit_report(board: &ScoreBoard, analysis: &RoundAnalysis, out_dir: &Path, svg: bool) -> Result<(), AnalysisError> {
    write_bundle(board, Some(analysis), out_dir)?;

    let jm = &analysis.jaccard;
    let mut rows = vec![std::iter::once("team_id".to_string()).chain(jm.labels.iter().cloned()).collect()];
    for (label, row) in jm.labels.iter().zip(&jm.d) {
        rows.push(std::iter::once(label.clone()).chain(row.iter().map(|&v| fmt_sig6(v))).collect());
    }
    write_file(&out_dir.join("jaccard.csv"), &csv_bytes(rows)?)?;

    let mut rows = vec![vec!["team_id".to_string(), "x".to_string(), "y".to_string()]];
    if let Some(mds) = &analysis.mds {
        for (label, c) in mds.labels.iter().zip(&mds.coordinates) {
            rows.push(vec![label.clone(), fmt_sig6(c[0]), fmt_sig6(c[1])]);
        }
    }
    write_file(&out_dir.join("mds.csv"), &csv_bytes(rows)?)?;

    let mut rows = vec![vec!["covariate".to_string(), "teams".to_string()]];
    rows.extend(analysis.variable_frequency.iter().map(|(v, n)| vec![v.clone(), n.to_string()]));
    write_file(&out_dir.join("variable_frequency.csv"), &csv_bytes(rows)?)?;

    let header = ["team_id", "N", "delta_pred", "sigma_pred", "delta_hat", "error", "abs_error", "lower", "upper", "covered", "in_percentage"];
    let mut rows = vec![header.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    for r in &analysis.prediction_errors.rows {
        rows.push(vec![
            r.team_id.clone(),
            r.subgroup_size.to_string(),
            fmt_sig6(r.delta_pred),
            fmt_sig6(r.sigma_pred),
            fmt_sig6(r.delta_hat),
            fmt_sig6(r.error),
            fmt_sig6(r.abs_error),
            fmt_sig6(r.lower),
            fmt_sig6(r.upper),
            r.covered.to_string(),
            r.in_percentage.to_string(),
        ]);
    }
    write_file(&out_dir.join("prediction_errors.csv"), &csv_bytes(rows)?)?;

    if svg {
        let points: Vec<(String, f64, f64)> = analysis
            .mds
            .iter()
            .flat_map(|m| m.labels.iter().zip(&m.coordinates).map(|(l, c)| (l.clone(), c[0], c[1])))
            .collect();
        write_file(&out_dir.join("mds.svg"), scatter_svg("Subgroup similarity (classical MDS of Jaccard distances)", "PC1", "PC2", &points).as_bytes())?;
        let points: Vec<(String, f64, f64)> = analysis
            .prediction_errors
            .rows
            .iter()
            .map(|r| (r.team_id.clone(), r.subgroup_size as f64, r.abs_error))
            .collect();
        write_file(&out_dir.join("error_vs_size.svg"), scatter_svg("Absolute prediction error by subgroup size", "subgroup size", "|delta_pred - delta_hat|", &points).as_bytes())?;
    }
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Minimal labelled scatter plot.
pub fn scatter_svg(title: &str, x_label: &str, y_label: &str, points: &[(String, f64, f64)]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const M: f64 = 50.0;
    let range = |vals: Vec<f64>| {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        match (lo.is_finite(), hi > lo) {
            (true, true) => (lo, hi),
            (true, false) => (lo - 1.0, lo + 1.0),
            _ => (0.0, 1.0),
        }
    };
    let (x0, x1) = range(points.iter().map(|p| p.1).collect());
    let (y0, y1) = range(points.iter().map(|p| p.2).collect());
    let px = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let py = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(s, r#"<line x1="{M}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, H - M, W - M, H - M);
    let _ = writeln!(s, r#"<line x1="{M}" y1="{M}" x2="{M}" y2="{}" stroke="black"/>"#, H - M);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, W / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (label, x, y) in points {
        let (cx, cy) = (px(*x), py(*y));
        let _ = writeln!(s, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="4" fill="steelblue"/>"#);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="10">{}</text>"#, cx + 6.0, cy - 6.0, escape(label));
    }
    s.push_str("</svg>\n");
    s
}
