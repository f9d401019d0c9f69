use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

mod config;
mod output;
mod run;

use config::{ExperimentConfig, Mode};

/// Convergence experiments for the finite element approximation of the
/// stochastic linear Schrödinger equation.
#[derive(Debug, Parser)]
#[command(name = "schrod-spde", version)]
struct Cli {
    #[arg(value_enum)]
    mode: Mode,
    /// `key = value` configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    /// One value, or two comma-separated values for the two components.
    #[arg(long)]
    scales: Option<String>,
    /// Final time.
    #[arg(long = "T")]
    final_time: Option<String>,
    /// Spectral truncation J.
    #[arg(long)]
    modes: Option<String>,
    /// Comma-separated interior node counts, strictly increasing.
    #[arg(long)]
    mesh: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    /// Time steps K of the Monte Carlo convolution rule.
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// cos, linear or bump.
    #[arg(long)]
    phi: Option<String>,
    #[arg(long = "bump-sigma")]
    bump_sigma: Option<String>,
    /// Leading sine modes in the pairing direction.
    #[arg(long)]
    support: Option<String>,
    /// CSV output path; the JSON summary goes next to it.
    #[arg(long)]
    out: Option<String>,
    /// Fill the `seconds` column with per-row wall time.
    #[arg(long)]
    timing: bool,
}

impl Cli {
    fn config(&self) -> Result<ExperimentConfig, config::ConfigError> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let flags = [
            ("theta", &self.theta),
            ("rho", &self.rho),
            ("scales", &self.scales),
            ("T", &self.final_time),
            ("modes", &self.modes),
            ("mesh", &self.mesh),
            ("samples", &self.samples),
            ("steps", &self.steps),
            ("seed", &self.seed),
            ("phi", &self.phi),
            ("bump_sigma", &self.bump_sigma),
            ("support", &self.support),
            ("out", &self.out),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v).map_err(|e| config::ConfigError(format!("--{e}")))?;
            }
        }
        if self.timing {
            cfg.timing = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match cli.config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    println!("# schrod-spde {}", cli.mode);
    for line in cfg.header() {
        println!("# {line}");
    }
    match run::run(cli.mode, &cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more gated checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
