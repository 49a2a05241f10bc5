//! Organizer workflows behind the `subchal` binary.
//!
//! Each `cmd_*` function computes everything first and writes its output
//! files at the end. Errors are input errors (exit 1); a successful run
//! reports whether any team failed validation (exit 2).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use subchal_core::analysis::{analyze_round, emit_report, emit_scoreboard, read_report};
use subchal_core::scoring::{check_validity, load_submissions, rank_teams, read_standardized_csv, score_round, AltScoreConfig, ValidityReport};
use subchal_core::simulate::{generate_trial, run_challenge_simulation, study_config};
use subchal_core::trial_data::{load_dataset, load_dataset_with, write_dataset, OutcomeColumn};
use subchal_core::{GeneratorConfig, ModelSpec, ScoreBoard, SimulationReport, TrialDataset};

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "SUBCHAL_THREADS";

#[derive(Debug, Parser)]
#[command(name = "subchal", version, about = "Score, analyze and simulate subgroup-identification challenges")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check submissions against holdout covariates and report subgroup cell sizes.
    Validate(ValidateArgs),
    /// Fit every submission on the holdout and rank the teams.
    Score(ScoreArgs),
    /// Summaries and embeddings of a scored round.
    Analyze(AnalyzeArgs),
    /// Run simulated challenges with a naive subgroup finder.
    Simulate(SimulateArgs),
    /// Write one synthetic study as a dataset CSV plus schema JSON.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
pub struct HoldoutArgs {
    /// Holdout dataset CSV.
    #[arg(long)]
    pub holdout: PathBuf,
    /// Covariate schema JSON for the holdout.
    #[arg(long)]
    pub schema: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub data: HoldoutArgs,
    /// Directory of submission JSON files.
    #[arg(long)]
    pub submissions: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long, required_unless_present = "rerank_only")]
    pub holdout: Option<PathBuf>,
    #[arg(long, required_unless_present = "rerank_only")]
    pub schema: Option<PathBuf>,
    #[arg(long, required_unless_present = "rerank_only")]
    pub submissions: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON model config (adjustment covariates, interaction flag).
    #[arg(long)]
    pub model_config: Option<PathBuf>,
    /// Exponents for the alternative risk-difference score.
    #[arg(long, value_delimiter = ',', default_values_t = AltScoreConfig::PRESETS.to_vec())]
    pub alpha_list: Vec<f64>,
    /// Rank precomputed `team_id,Z1,Z2` rows instead of fitting.
    #[arg(long, conflicts_with_all = ["holdout", "schema", "submissions", "model_config"])]
    pub rerank_only: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub data: HoldoutArgs,
    /// Directory holding the `report.json` written by `score`; analysis files go here too.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Generator config file (JSON or TOML).
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Bundled config: `null` or `modifier`.
    #[arg(long, default_value = "null")]
    pub preset: String,
    #[arg(long, default_value_t = 200)]
    pub replications: usize,
    /// Overrides the seed stored in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "null")]
    pub preset: String,
    /// Study index: training studies first, the holdout last.
    #[arg(long)]
    pub study: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// How a command that ran to completion ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    InvalidTeams,
}

impl From<Outcome> for ExitCode {
    fn from(o: Outcome) -> Self {
        match o {
            Outcome::Ok => ExitCode::SUCCESS,
            Outcome::InvalidTeams => ExitCode::from(2),
        }
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Validate(a) => cmd_validate(&a),
        Command::Score(a) => cmd_score(&a),
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Generate(a) => cmd_generate(&a),
    }
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn load_holdout(data: &Path, schema: &Path, outcome: OutcomeColumn) -> Result<TrialDataset> {
    load_dataset_with(data, schema, outcome).with_context(|| format!("cannot load holdout {}", data.display()))
}

pub fn load_model_spec(path: Option<&Path>) -> Result<ModelSpec> {
    let Some(path) = path else { return Ok(ModelSpec::default()) };
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid model config {}", path.display()))
}

/// Team ids become file names, so anything outside `[A-Za-z0-9_.-]` is replaced.
fn file_stem(team_id: &str) -> String {
    team_id.chars().map(|c| if c.is_ascii_alphanumeric() || "_.-".contains(c) { c } else { '_' }).collect()
}

/// Writes `validity/<team>.json` per team and `validity.json` for the round.
/// The outcome column is optional and never read.
pub fn cmd_validate(args: &ValidateArgs) -> Result<Outcome> {
    let holdout = load_holdout(&args.data.holdout, &args.data.schema, OutcomeColumn::Optional)?;
    let subs = load_submissions(&args.submissions).context("cannot load submissions")?;
    let reports: Vec<ValidityReport> = subs.iter().map(|s| check_validity(s, &holdout)).collect();

    let dir = args.out.join("validity");
    create_out(&dir)?;
    for r in &reports {
        write(&dir.join(format!("{}.json", file_stem(&r.team_id))), to_json(r)?)?;
    }
    write(&args.out.join("validity.json"), to_json(&reports)?)?;
    Ok(if reports.iter().all(|r| r.valid) { Outcome::Ok } else { Outcome::InvalidTeams })
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Scores a full round, or only re-ranks standardized components with `--rerank-only`.
pub fn cmd_score(args: &ScoreArgs) -> Result<Outcome> {
    let board = if let Some(path) = &args.rerank_only {
        let file = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        let teams = read_standardized_csv(file).with_context(|| format!("cannot read {}", path.display()))?;
        if teams.is_empty() {
            bail!("{} has no teams", path.display());
        }
        rank_teams(teams)
    } else {
        let (Some(data), Some(schema), Some(dir)) = (&args.holdout, &args.schema, &args.submissions) else {
            bail!("--holdout, --schema and --submissions are required unless --rerank-only is given");
        };
        if let Some(a) = args.alpha_list.iter().find(|a| !(**a >= 0.0)) {
            bail!("alpha must be non-negative, got {a}");
        }
        let holdout = load_dataset(data, schema).with_context(|| format!("cannot load holdout {}", data.display()))?;
        let spec = load_model_spec(args.model_config.as_deref())?;
        let subs = load_submissions(dir).context("cannot load submissions")?;
        score_round(&holdout, &subs, &spec, &args.alpha_list).context("cannot score round")?
    };
    create_out(&args.out)?;
    emit_scoreboard(&board, &args.out)?;
    Ok(board_outcome(&board))
}

fn board_outcome(board: &ScoreBoard) -> Outcome {
    if board.teams.iter().all(|t| t.valid) {
        Outcome::Ok
    } else {
        Outcome::InvalidTeams
    }
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<Outcome> {
    let report = args.out.join("report.json");
    if !report.is_file() {
        bail!("{} not found; run `subchal score` first", report.display());
    }
    let bundle = read_report(&report)?;
    let holdout = load_holdout(&args.data.holdout, &args.data.schema, OutcomeColumn::Optional)?;
    let analysis = analyze_round(&bundle.scoreboard, &holdout)?;
    emit_report(&bundle.scoreboard, &analysis, &args.out, args.svg)?;
    Ok(Outcome::Ok)
}

fn generator_config(config: Option<&Path>, preset: &str) -> Result<GeneratorConfig> {
    let cfg = match config {
        Some(path) => GeneratorConfig::load(path)?,
        None => GeneratorConfig::preset(preset)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Writes `simulation.json` and `simulation.csv`.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<Outcome> {
    let cfg = generator_config(args.config.as_deref(), &args.preset)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let report: SimulationReport = run_challenge_simulation(&cfg, args.replications, seed)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    create_out(&args.out)?;
    write(&args.out.join("simulation.json"), report.to_json())?;
    write(&args.out.join("simulation.csv"), csv)?;
    Ok(Outcome::Ok)
}

/// Writes `<study id>.csv` and `<study id>.schema.json`.
pub fn cmd_generate(args: &GenerateArgs) -> Result<Outcome> {
    let cfg = generator_config(args.config.as_deref(), &args.preset)?;
    let id = study_config(&cfg, args.study)?.id.clone();
    let ds = generate_trial(&cfg, args.study, args.seed.unwrap_or(cfg.seed))?;
    create_out(&args.out)?;
    write_dataset(&ds, &args.out.join(format!("{id}.csv")), &args.out.join(format!("{id}.schema.json")))?;
    Ok(Outcome::Ok)
}
