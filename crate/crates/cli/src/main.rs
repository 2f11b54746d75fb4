use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use epflow::config::{parse_config_str, CommandKind, ConfigError};
use epflow::run::{run, RunError, RunOptions};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Rate,
    Spectrum,
    Sweep,
    Simulate,
    MgfCheck,
    Admissible,
}

impl From<Cmd> for CommandKind {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Rate => CommandKind::Rate,
            Cmd::Spectrum => CommandKind::Spectrum,
            Cmd::Sweep => CommandKind::Sweep,
            Cmd::Simulate => CommandKind::Simulate,
            Cmd::MgfCheck => CommandKind::MgfCheck,
            Cmd::Admissible => CommandKind::Admissible,
        }
    }
}

/// Entropy-production rate functions by Riccati, grid-spectral and Monte Carlo routes.
#[derive(Debug, Parser)]
#[command(name = "epflow", version)]
struct Cli {
    command: Cmd,
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "EPFLOW_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not configure {n} threads: {e}");
        }
    }
    let result = std::fs::read_to_string(&cli.config)
        .map_err(|source| RunError::from(ConfigError::Io { path: cli.config.display().to_string(), source }))
        .and_then(|text| {
            let cfg = parse_config_str(&text, &cli.config.display().to_string(), Some(cli.command.into()))?;
            run(&cfg, &RunOptions { out_dir: cli.out.clone(), seed: cli.seed })
        });
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("epflow: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
