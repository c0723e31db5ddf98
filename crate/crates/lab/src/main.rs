use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use mckean_lab::{parse_config, run_subcommand, Command, LabError, OUT_DIR_ENV};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Subcommand {
    Validate,
    Stationary,
    Evolve,
    Particles,
    Asymptotics,
    Basin,
    Converge,
}

impl From<Subcommand> for Command {
    fn from(s: Subcommand) -> Self {
        match s {
            Subcommand::Validate => Command::Validate,
            Subcommand::Stationary => Command::Stationary,
            Subcommand::Evolve => Command::Evolve,
            Subcommand::Particles => Command::Particles,
            Subcommand::Asymptotics => Command::Asymptotics,
            Subcommand::Basin => Command::Basin,
            Subcommand::Converge => Command::Converge,
        }
    }
}

/// Numerical experiments on self-stabilizing diffusions.
#[derive(Parser, Debug)]
#[command(name = "mckean-lab", version)]
struct Cli {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: `out` in the config, else `./out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Treat failed experiment hypotheses as errors.
    #[arg(long)]
    strict: bool,
}

fn run(cli: Cli) -> Result<i32, LabError> {
    let text = std::fs::read_to_string(&cli.config).map_err(|e| LabError::io(&cli.config, e))?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.strict |= cli.strict;
    let out = cli
        .out
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let report = run_subcommand(cli.subcommand.into(), &cfg, &out)?;
    for line in &report.lines {
        println!("{line}");
    }
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
