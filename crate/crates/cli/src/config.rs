use clap::{Args, Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("{key}: {msg}")]
    Key { key: String, msg: String },
    #[error("config file {path}: {msg}")]
    File { path: String, msg: String },
    #[error("no command given (pass one on the command line or set `command` in the config file)")]
    NoCommand,
}

impl ConfigError {
    pub fn key(key: &str, msg: impl Into<String>) -> Self {
        ConfigError::Key { key: key.to_string(), msg: msg.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
#[value(rename_all = "kebab-case")]
pub enum Command {
    Coeffs1d,
    Bifurcation1d,
    Innerfit2d,
    Delta0star,
    Deadend,
    Bifurcation2d,
    ArclengthTrace,
    AsymCompare,
    VerifyBounds,
    OuterAppc,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Coeffs1d => "coeffs1d",
            Command::Bifurcation1d => "bifurcation1d",
            Command::Innerfit2d => "innerfit2d",
            Command::Delta0star => "delta0star",
            Command::Deadend => "deadend",
            Command::Bifurcation2d => "bifurcation2d",
            Command::ArclengthTrace => "arclength-trace",
            Command::AsymCompare => "asym-compare",
            Command::VerifyBounds => "verify-bounds",
            Command::OuterAppc => "outer-appc",
        }
    }

    /// Parameter keys the command reads, besides `out` and `format`.
    pub fn keys(&self) -> &'static [&'static str] {
        match self {
            Command::Coeffs1d => &["eps"],
            Command::Bifurcation1d => &["eps", "alpha_start", "alpha_end", "points"],
            Command::Innerfit2d => &["delta0", "rho_max", "parametric"],
            Command::Delta0star => &["bracket", "tol"],
            Command::Deadend => &["eps", "tol", "coefficients"],
            Command::Bifurcation2d => &["eps", "alpha_start", "alpha_end", "points", "spacing", "tol"],
            Command::ArclengthTrace => &["eps", "alpha_start", "alpha_end", "ds", "ds_min", "ds_max", "max_steps"],
            Command::AsymCompare => &["eps", "model", "delta_range", "points", "rho_max"],
            Command::VerifyBounds => &["samples", "eps_range", "k_max", "rescaled_samples", "delta_max"],
            Command::OuterAppc => &["eps", "delta", "ell2", "lambda2", "hom_sin", "points", "rho_max"],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    /// Uniform in α.
    Linear,
    /// Geometric in δ = 1 + α.
    LogDelta,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    #[serde(rename = "1d")]
    #[value(name = "1d")]
    OneD,
    #[serde(rename = "2d")]
    #[value(name = "2d")]
    TwoD,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientSource {
    Parametric,
    Scalar,
}

/// Flat parameter map shared by the command line (kebab-case flags) and the
/// `[params]` table of a config file (snake_case keys).
#[derive(Clone, Debug, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Aspect ratio(s); sweep commands accept a list.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_start: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_end: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing: Option<Spacing>,
    #[arg(long, num_args = 2)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bracket: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub delta0: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parametric: Option<bool>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<CoefficientSource>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ds: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ds_min: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ds_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<Model>,
    #[arg(long, num_args = 2)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_range: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[arg(long, num_args = 2)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_range: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rescaled_samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell2: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hom_sin: Option<f64>,
    /// Output directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

fn one_or_many<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(Option::<OneOrMany>::deserialize(d)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    }))
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl Params {
    /// Fields set in `top` replace those in `self`.
    pub fn overlay(mut self, top: &Params) -> Params {
        overlay!(
            self, top, eps, alpha_start, alpha_end, points, spacing, bracket, tol, delta0, rho_max, parametric, coefficients, ds, ds_min, ds_max,
            max_steps, model, delta_range, samples, eps_range, k_max, rescaled_samples, delta_max, delta, ell2, lambda2, hom_sin, out, format
        );
        self
    }

    /// Names of the keys that are set.
    pub fn set_keys(&self) -> Vec<String> {
        match serde_json::to_value(self) {
            Ok(serde_json::Value::Object(m)) => m.keys().cloned().collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "mems", version, about = "Bifurcation, asymptotics and bound checks for the MEMS capacitor model with mean curvature")]
#[command(allow_negative_numbers = true)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// TOML file with `command`, `seed` and a `[params]` table; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub params: Params,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    command: Option<Command>,
    seed: Option<u64>,
    #[serde(default)]
    params: Params,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub params: Params,
}

pub const DEFAULT_SEED: u64 = 7;

pub fn load_file(path: &Path) -> Result<(Option<Command>, Option<u64>, Params), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File { path: path.display().to_string(), msg: e.to_string() })?;
    let f: FileConfig = toml::from_str(&text).map_err(|e| ConfigError::File { path: path.display().to_string(), msg: e.message().to_string() })?;
    Ok((f.command, f.seed, f.params))
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<RunConfig, ConfigError> {
        let (fc, fs, fp) = match &cli.config {
            Some(p) => load_file(p)?,
            None => (None, None, Params::default()),
        };
        let command = cli.command.or(fc).ok_or(ConfigError::NoCommand)?;
        let cfg = RunConfig { command, seed: cli.seed.or(fs).unwrap_or(DEFAULT_SEED), params: fp.overlay(&cli.params) };
        cfg.check_keys()?;
        Ok(cfg)
    }

    /// Rejects keys the command does not read.
    pub fn check_keys(&self) -> Result<(), ConfigError> {
        let allowed = self.command.keys();
        for k in self.params.set_keys() {
            if k != "out" && k != "format" && !allowed.contains(&k.as_str()) {
                return Err(ConfigError::key(&k, format!("not a parameter of `{}` (accepted: {})", self.command.name(), allowed.join(", "))));
            }
        }
        Ok(())
    }
}
