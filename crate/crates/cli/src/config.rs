//! Experiment configuration: documented defaults, then a `key = value`
//! file, then command-line flags. Every value passes through the same parser
//! so file and flag errors read the same.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Rates,
    ExactWeak,
    ExactStrong,
    Deterministic,
    McCrosscheck,
    Selftest,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.to_possible_value().expect("no skipped variants").get_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phi {
    Cos,
    Linear,
    Bump,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub theta: f64,
    pub rho: f64,
    pub scales: [f64; 2],
    #[serde(rename = "T")]
    pub final_time: f64,
    pub modes: usize,
    pub mesh: Vec<usize>,
    pub samples: usize,
    pub steps: usize,
    pub seed: u64,
    pub phi: Phi,
    /// Width of the gauss-bump functional.
    pub bump_sigma: f64,
    /// Number of leading sine modes in the pairing direction.
    pub support: usize,
    pub out: PathBuf,
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            theta: 1.0,
            rho: 1.3,
            scales: [1.0, 1.0],
            final_time: 1.0,
            modes: 512,
            mesh: vec![15, 31, 63, 127, 255],
            samples: 1000,
            steps: 256,
            seed: 42,
            phi: Phi::Cos,
            bump_sigma: 0.5,
            support: 8,
            out: PathBuf::from("results.csv"),
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(key: &str, value: &str, what: &str) -> ConfigError {
    ConfigError(format!("{key}: cannot parse {value:?} as {what}"))
}

fn parse<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| bad(key, value, what))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<Vec<T>, ConfigError> {
    value.split(',').map(|p| parse(key, p, what)).collect()
}

pub const KEYS: [&str; 14] =
    ["theta", "rho", "scales", "T", "modes", "mesh", "samples", "steps", "seed", "phi", "bump_sigma", "support", "out", "timing"];

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "theta" => self.theta = parse(key, value, "a real number")?,
            "rho" => self.rho = parse(key, value, "a real number")?,
            "scales" => {
                let s: Vec<f64> = parse_list(key, value, "a real number")?;
                self.scales = match s.as_slice() {
                    [a] => [*a, *a],
                    [a, b] => [*a, *b],
                    _ => return Err(ConfigError(format!("scales: expected one or two comma-separated values, got {value:?}"))),
                };
            }
            "T" => self.final_time = parse(key, value, "a real number")?,
            "modes" => self.modes = parse(key, value, "a positive integer")?,
            "mesh" => self.mesh = parse_list(key, value, "a positive integer")?,
            "samples" => self.samples = parse(key, value, "an integer")?,
            "steps" => self.steps = parse(key, value, "an integer")?,
            "seed" => self.seed = parse(key, value, "an unsigned 64-bit integer")?,
            "phi" => {
                self.phi = match value.trim() {
                    "cos" => Phi::Cos,
                    "linear" => Phi::Linear,
                    "bump" => Phi::Bump,
                    _ => return Err(ConfigError(format!("phi: must be one of cos, linear, bump, got {value:?}"))),
                }
            }
            "bump_sigma" => self.bump_sigma = parse(key, value, "a real number")?,
            "support" => self.support = parse(key, value, "a positive integer")?,
            "out" => self.out = PathBuf::from(value.trim()),
            "timing" => self.timing = parse(key, value, "true or false")?,
            _ => return Err(ConfigError(format!("unknown key {key:?}; known keys: {}", KEYS.join(", ")))),
        }
        Ok(())
    }

    /// Applies a `key = value` file. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("{origin}:{}: expected `key = value`, got {raw:?}", i + 1)))?;
            self.set(key.trim(), value).map_err(|e| ConfigError(format!("{origin}:{}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("config {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError(m));
        if !(0.0..=1.0).contains(&self.theta) {
            return fail(format!("theta: must lie in [0, 1], got {}", self.theta));
        }
        if !(self.rho - self.theta >= 0.3 - 1e-12) || !self.rho.is_finite() {
            return fail(format!("rho: must satisfy rho >= theta + 0.3 = {}, got {}", self.theta + 0.3, self.rho));
        }
        if self.scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return fail(format!("scales: must be finite and positive, got {:?}", self.scales));
        }
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return fail(format!("T: must be positive and finite, got {}", self.final_time));
        }
        if self.mesh.is_empty() || self.mesh[0] == 0 {
            return fail("mesh: needs at least one size, each N >= 1".into());
        }
        if self.mesh.windows(2).any(|w| w[1] <= w[0]) {
            return fail(format!("mesh: sizes must be strictly increasing, got {:?}", self.mesh));
        }
        let n_max = *self.mesh.last().expect("nonempty");
        if self.modes < 2 * (n_max + 1) {
            return fail(format!("modes: J must be >= 2(max N + 1) = {}, got {}", 2 * (n_max + 1), self.modes));
        }
        if self.samples < 2 {
            return fail(format!("samples: must be at least 2, got {}", self.samples));
        }
        if self.steps < 1 {
            return fail("steps: K must be at least 1".into());
        }
        if !(self.bump_sigma > 0.0 && self.bump_sigma.is_finite()) {
            return fail(format!("bump_sigma: must be positive, got {}", self.bump_sigma));
        }
        if self.support == 0 || self.support > self.modes {
            return fail(format!("support: must lie in [1, modes = {}], got {}", self.modes, self.support));
        }
        Ok(())
    }

    /// `key = value` lines for the run header, in [`KEYS`] order.
    pub fn header(&self) -> Vec<String> {
        let list = |v: &[usize]| v.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",");
        let phi = match self.phi {
            Phi::Cos => "cos",
            Phi::Linear => "linear",
            Phi::Bump => "bump",
        };
        let values = [
            self.theta.to_string(),
            self.rho.to_string(),
            format!("{},{}", self.scales[0], self.scales[1]),
            self.final_time.to_string(),
            self.modes.to_string(),
            list(&self.mesh),
            self.samples.to_string(),
            self.steps.to_string(),
            self.seed.to_string(),
            phi.to_string(),
            self.bump_sigma.to_string(),
            self.support.to_string(),
            self.out.display().to_string(),
            self.timing.to_string(),
        ];
        KEYS.iter().zip(values).map(|(k, v)| format!("{k} = {v}")).collect()
    }
}
