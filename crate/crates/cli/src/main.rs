//! `trapwalk`: runs the experiments on a configuration file.
//!
//! Exit codes are listed on [`error::CliError`].

mod config;
mod error;
mod experiments;
mod output;

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Kind};
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "trapwalk", version, about = "Biased random walks on Galton-Watson trees with traps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory for records, summary and manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Solve for the tail exponent and report the regime.
    Gamma,
    /// Trap-weight tail and its prefactor by two routes.
    TrapTail,
    /// Holding-time tail over late snapshot pairs.
    TrapTimeTail,
    /// Full walks to the deepest level of `ns`.
    Walk,
    /// Hitting-time and displacement scaling exponents.
    Displacement,
    /// Phase concentration of holding times, lattice against non-lattice.
    Dichotomy,
    /// Exact escape and correction constants of pairs.
    PairConstants,
    /// Backbone shapes at two late entrance counts.
    SnapshotStability,
    /// All factors of the scale constant.
    Constants,
    /// Serialize sampled traps.
    DumpTrap,
    /// Run the kind named in the configuration.
    Run,
}

impl Command {
    fn kind(self) -> Option<Kind> {
        Some(match self {
            Command::Gamma => Kind::Gamma,
            Command::TrapTail => Kind::TrapTail,
            Command::TrapTimeTail => Kind::TrapTimeTail,
            Command::Walk => Kind::Walk,
            Command::Displacement => Kind::Displacement,
            Command::Dichotomy => Kind::Dichotomy,
            Command::PairConstants => Kind::PairConstants,
            Command::SnapshotStability => Kind::SnapshotStability,
            Command::Constants => Kind::Constants,
            Command::DumpTrap => Kind::DumpTrap,
            Command::Run => return None,
        })
    }
}

fn load(cli: &Cli) -> Result<(ExperimentConfig, Kind), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    let kind = match (cli.command.kind(), cfg.kind) {
        (Some(k), _) | (None, Some(k)) => k,
        (None, None) => {
            return Err(CliError::Config(config::ConfigError {
                field: "kind".into(),
                message: "`run` needs a kind in the configuration".into(),
            }))
        }
    };
    cfg.kind = Some(kind);
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    cfg.validate()?;
    Ok((cfg, kind))
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let (cfg, kind) = load(cli)?;
    let started = output::unix_now();
    let outcome = experiments::run(kind, &cfg)?;
    let mut stdout = std::io::stdout().lock();
    let rows = output::summary_rows(&outcome.summary);
    match (&cfg.out, &outcome.stdout) {
        (Some(dir), _) => {
            let manifest = output::write_dir(dir, &cfg, kind, &outcome, started)?;
            stdout.write_all(rows.as_bytes())?;
            writeln!(stdout, "manifest          {}", manifest.display())?;
        }
        (None, Some(text)) => stdout.write_all(text.as_bytes())?,
        (None, None) => stdout.write_all(rows.as_bytes())?,
    }
    stdout.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("trapwalk: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
