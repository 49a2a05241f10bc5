use std::process::ExitCode;

use clap::Parser;
use subchal_cli::{run, Cli, THREADS_ENV};

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = value.trim().parse().map_err(|_| anyhow::anyhow!("{THREADS_ENV} must be a positive integer, got `{value}`"))?;
    if n == 0 {
        anyhow::bail!("{THREADS_ENV} must be a positive integer, got `{value}`");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli)) {
        Ok(outcome) => outcome.into(),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
