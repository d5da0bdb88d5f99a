use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pqdist::runner::{self, ExitStatus, ExperimentConfig, Task};

/// Capacity and distortion experiments on ℝⁿ and ℍⁿ.
#[derive(Parser, Debug)]
#[command(name = "pqdist", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML configuration; flags given here override it
    #[arg(long, global = true, env = "PQDIST_CONFIG")]
    config: Option<PathBuf>,
    /// CSV destination (default: standard output)
    #[arg(long, global = true, env = "PQDIST_OUT")]
    out: Option<PathBuf>,
    #[arg(long, global = true, env = "PQDIST_SEED")]
    seed: Option<u64>,
    /// grid cells per axis
    #[arg(long, global = true, env = "PQDIST_RESOLUTION")]
    resolution: Option<usize>,
    /// relative slack of the inequality checks
    #[arg(long, global = true, env = "PQDIST_SLACK")]
    slack: Option<f64>,
    /// R<n> or H<n>
    #[arg(long, global = true, env = "PQDIST_GROUP")]
    group: Option<String>,
    /// zoo mapping, e.g. "winding(k=2)"
    #[arg(long, global = true, env = "PQDIST_MAP")]
    map: Option<String>,
    #[arg(short, long, global = true, env = "PQDIST_P")]
    p: Option<f64>,
    #[arg(short, long, global = true, env = "PQDIST_Q")]
    q: Option<f64>,
    /// print the effective configuration to stderr
    #[arg(long, global = true)]
    show_config: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// p-capacity of the configured ring, or of its image under --map
    Capacity,
    /// (p,q)-distortion coefficient of a zoo mapping
    Distort,
    /// Monte Carlo change-of-variables check
    Cov,
    /// push-forward support and norm check
    Push,
    /// batch of inequality checks over maps and exponents
    Verify,
    /// table of the mapping zoo
    Zoo,
    /// capacity decay along an exhaustion
    Liouville,
}

impl Command {
    fn task(self) -> Task {
        match self {
            Command::Capacity => Task::Capacity,
            Command::Distort => Task::Distortion,
            Command::Cov => Task::CovCheck,
            Command::Push => Task::Pushforward,
            Command::Verify => Task::VerifySuite,
            Command::Zoo => Task::ZooList,
            Command::Liouville => Task::Liouville,
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, String> {
    let mut cfg = match &cli.global.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            ExperimentConfig::from_toml_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    let g = &cli.global;
    cfg.task = cli.command.task();
    if let Some(v) = g.seed {
        cfg.seed = v;
    }
    if let Some(v) = g.resolution {
        cfg.resolution = v;
    }
    if let Some(v) = g.slack {
        cfg.slack = v;
    }
    if let Some(v) = &g.group {
        cfg.group = v.clone();
    }
    if let Some(v) = &g.map {
        cfg.map.name = v.clone();
    }
    if let Some(v) = g.p {
        cfg.exponents.p = v;
    }
    if let Some(v) = g.q {
        cfg.exponents.q = v;
    }
    if let Some(v) = &g.out {
        cfg.output = v.display().to_string();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("pqdist: {msg}");
            return ExitCode::from(ExitStatus::Config.code() as u8);
        }
    };
    if cli.global.show_config {
        eprint!("{}", cfg.to_toml_string());
    }
    let out = runner::run(&cfg);
    for d in &out.diagnostics {
        eprintln!("pqdist: {d}");
    }
    let written = if cfg.output.is_empty() {
        std::io::stdout().write_all(out.csv.as_bytes())
    } else {
        fs::write(&cfg.output, out.csv.as_bytes())
    };
    if let Err(e) = written {
        eprintln!("pqdist: cannot write output: {e}");
        return ExitCode::from(ExitStatus::Config.code() as u8);
    }
    ExitCode::from(out.status.code() as u8)
}
