use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use kpp_lab::config::{parse_config, Command, ConfigErrors};
use kpp_lab::runner::{run, RunError};

/// Lyapunov exponents, free-boundary runs and spreading/vanishing
/// classification for diffusive KPP equations.
#[derive(Debug, Parser)]
#[command(name = "kpp-lab", version)]
struct Cli {
    /// lyapunov, critical-length, simulate, double-front, pullback, classify,
    /// critical-mu or sweep; defaults to the config's `command`.
    command: Option<String>,

    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,

    /// Directory for output files.
    #[arg(long, default_value = ".")]
    out: PathBuf,

    /// Worker threads for sweep.
    #[arg(long)]
    jobs: Option<usize>,

    #[arg(long, short)]
    verbose: bool,
}

fn execute(cli: &Cli) -> Result<(), RunError> {
    let command = cli
        .command
        .as_deref()
        .map(str::parse::<Command>)
        .transpose()
        .map_err(|e| RunError::config(&ConfigErrors(vec![e])))?;
    let text = std::fs::read_to_string(&cli.config).map_err(|e| {
        RunError::config(&ConfigErrors(vec![format!(
            "cannot read {}: {e}",
            cli.config.display()
        )]))
    })?;
    let cfg = parse_config(&text).map_err(|e| RunError::config(&e))?;
    let summary = run(&cfg, command, &cli.out, cli.jobs)?;
    for line in &summary.lines {
        println!("{line}");
    }
    for file in &summary.files {
        println!("wrote {}", file.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(mut e) => {
            if let Some(obj) = e.context.as_object_mut() {
                obj.insert("config".into(), json!(cli.config.display().to_string()));
            }
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
