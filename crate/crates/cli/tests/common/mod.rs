#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use subchal_core::simulate::generate_trial;
use subchal_core::trial_data::write_dataset;
use subchal_core::GeneratorConfig;

/// A scoring round on disk: holdout CSV, schema and a submissions directory.
pub struct Round {
    pub holdout: PathBuf,
    pub schema: PathBuf,
    pub submissions: PathBuf,
}

/// Subgroup, predicted effect, predicted standard deviation.
pub const TEAMS: [(&str, &str, f64, f64); 6] = [
    ("alpha", "CRPSI > 12", 0.45, 0.08),
    ("bravo", "AGE < 45", 0.30, 0.10),
    ("charlie", "WEIGHT > 80 & NAVTNF == TRUE", 0.35, 0.12),
    ("delta", "PSTSCO > 3 | TNJTA78 > 20", 0.28, 0.05),
    ("echo", "SEX == 'F'", 0.25, 0.09),
    ("foxtrot", "0.1*AGE - 0.05*FACITSCO > 3.4", 0.40, 0.15),
];

pub fn write_submission(dir: &Path, team: &str, subgroup: &str, delta: f64, sigma: f64) {
    let body = serde_json::json!({ "team_id": team, "subgroup": subgroup, "delta_pred": delta, "sigma_pred": sigma });
    fs::write(dir.join(format!("{team}.json")), serde_json::to_string_pretty(&body).unwrap()).unwrap();
}

/// Synthetic holdout from the bundled modifier config plus the six teams above.
pub fn fixture_round(root: &Path) -> Round {
    let cfg = GeneratorConfig::preset("modifier").unwrap();
    let ds = generate_trial(&cfg, cfg.training.len(), 2024).unwrap();
    let holdout = root.join("holdout.csv");
    let schema = root.join("holdout.schema.json");
    write_dataset(&ds, &holdout, &schema).unwrap();
    let submissions = root.join("submissions");
    fs::create_dir_all(&submissions).unwrap();
    for (team, subgroup, delta, sigma) in TEAMS {
        write_submission(&submissions, team, subgroup, delta, sigma);
    }
    Round { holdout, schema, submissions }
}

/// Every regular file under `dir`, by relative path.
pub fn read_tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}
