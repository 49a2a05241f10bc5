use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ScoreError;

/// One team's entry for a challenge round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub team_id: String,
    /// Subgroup expression text.
    pub subgroup: String,
    /// Predicted treatment effect in the subgroup, risk-difference scale.
    pub delta_pred: f64,
    pub sigma_pred: f64,
    #[serde(default)]
    pub methods: String,
}

impl Submission {
    pub fn new(team_id: &str, subgroup: &str, delta_pred: f64, sigma_pred: f64) -> Self {
        Self { team_id: team_id.into(), subgroup: subgroup.into(), delta_pred, sigma_pred, methods: String::new() }
    }
}

pub fn load_submission(path: &Path) -> Result<Submission, ScoreError> {
    let text = fs::read_to_string(path).map_err(|source| ScoreError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|source| ScoreError::Json { path: path.to_path_buf(), source })
}

/// Loads every `*.json` file in `dir`, ordered by file name.
pub fn load_submissions(dir: &Path) -> Result<Vec<Submission>, ScoreError> {
    let entries = fs::read_dir(dir).map_err(|source| ScoreError::Io { path: dir.to_path_buf(), source })?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|source| ScoreError::Io { path: dir.to_path_buf(), source })?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "json") {
            paths.push(path);
        }
    }
    paths.sort();
    let subs = paths.iter().map(|p| load_submission(p)).collect::<Result<Vec<_>, _>>()?;
    let mut seen = std::collections::BTreeSet::new();
    for s in &subs {
        if !seen.insert(s.team_id.as_str()) {
            return Err(ScoreError::DuplicateTeam(s.team_id.clone()));
        }
    }
    Ok(subs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn methods_field_is_optional() {
        let s: Submission =
            serde_json::from_str(r#"{"team_id":"T1","subgroup":"AGE > 50","delta_pred":0.2,"sigma_pred":0.05}"#).unwrap();
        assert_eq!(s, Submission::new("T1", "AGE > 50", 0.2, 0.05));
    }

    #[test]
    fn directory_order_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.json"), serde_json::to_string(&Submission::new("B", "X > 1", 0.1, 0.1)).unwrap()).unwrap();
        fs::write(dir.path().join("a.json"), serde_json::to_string(&Submission::new("A", "X > 2", 0.1, 0.1)).unwrap()).unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let subs = load_submissions(dir.path()).unwrap();
        assert_eq!(subs.iter().map(|s| s.team_id.as_str()).collect::<Vec<_>>(), ["A", "B"]);

        fs::write(dir.path().join("c.json"), "{ not json").unwrap();
        match load_submissions(dir.path()) {
            Err(ScoreError::Json { path, .. }) => assert!(path.ends_with("c.json")),
            other => panic!("expected JSON error, got {other:?}"),
        }
    }
}
