//! Experiment configuration, runners and artifact emission.

mod experiments;
mod rates;

pub use experiments::run_experiment;
pub use rates::{convergence_study, RateFlag, RateRow};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::cauchy::{CauchyError, TimeScheme};
use crate::fields::{catalog, FieldError};
use crate::goursat::{default_lambda_schedule, GoursatError, InitialVelocity};
use crate::mollify::MollifyError;
use crate::norms::NormError;
use crate::surface::{CharacteristicSurface, SurfaceError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("bad config: {0}")]
    Config(String),
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Cauchy(#[from] CauchyError),
    #[error(transparent)]
    Goursat(#[from] GoursatError),
    #[error(transparent)]
    Mollify(#[from] MollifyError),
    #[error(transparent)]
    Norm(#[from] NormError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Cauchy,
    Goursat,
    MollifyCheck,
    Convergence,
    EstimateConstants,
}

impl Experiment {
    pub const ALL: [Experiment; 5] =
        [Experiment::Cauchy, Experiment::Goursat, Experiment::MollifyCheck, Experiment::Convergence, Experiment::EstimateConstants];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Cauchy => "cauchy",
            Experiment::Goursat => "goursat",
            Experiment::MollifyCheck => "mollify-check",
            Experiment::Convergence => "convergence",
            Experiment::EstimateConstants => "estimate-constants",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, HarnessError> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| HarnessError::Config(format!("unknown experiment {s:?}")))
    }
}

/// Characteristic data for the goursat experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSpec {
    /// `dalembert` on flat1d with the cone, `cos` otherwise.
    Auto,
    Dalembert,
    Cos,
    Constant,
    Zero,
}

impl FromStr for DataSpec {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s {
            "auto" => Ok(DataSpec::Auto),
            "dalembert" => Ok(DataSpec::Dalembert),
            "cos" => Ok(DataSpec::Cos),
            "constant" => Ok(DataSpec::Constant),
            "zero" => Ok(DataSpec::Zero),
            other => Err(HarnessError::Config(format!("unknown data {other:?} (auto, dalembert, cos, constant, zero)"))),
        }
    }
}

/// Every key accepted by [`ExperimentConfig::set`], with its default.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("experiment", "cauchy"),
    ("catalog", "flat1d"),
    ("surface", "cone"),
    ("grid", "64,128"),
    ("T", "1"),
    ("lambda_schedule", "1-2^-k for k = 2..8"),
    ("early_stop_tol", "1e-10"),
    ("initial_velocity", "zero_time"),
    ("data", "auto"),
    ("seed", "0"),
    ("ensemble", "16"),
    ("levels", "2,4,8,16"),
    ("scheme", "rk4"),
    ("cfl", "0.5"),
    ("out", "out"),
];

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub catalog: String,
    pub surface: String,
    /// Points per axis, ascending.
    pub grids: Vec<usize>,
    #[serde(rename = "T")]
    pub t_max: f64,
    pub lambda_schedule: Vec<f64>,
    pub early_stop_tol: f64,
    pub initial_velocity: InitialVelocity,
    pub data: DataSpec,
    pub seed: u64,
    pub ensemble: usize,
    /// Mollification levels for `mollify-check`.
    pub levels: Vec<usize>,
    pub scheme: TimeScheme,
    pub cfl: f64,
    #[serde(skip)]
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Cauchy,
            catalog: "flat1d".into(),
            surface: "cone".into(),
            grids: vec![64, 128],
            t_max: 1.0,
            lambda_schedule: default_lambda_schedule(),
            early_stop_tol: 1e-10,
            initial_velocity: InitialVelocity::ZeroTime,
            data: DataSpec::Auto,
            seed: 0,
            ensemble: 16,
            levels: vec![2, 4, 8, 16],
            scheme: TimeScheme::Rk4,
            cfl: 0.5,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value.trim().parse().map_err(|_| HarnessError::Config(format!("cannot parse {key} = {value:?}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, HarnessError> {
    value.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse(key, s)).collect()
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self { experiment, ..Self::default() }
    }

    /// Sets one key; see [`CONFIG_KEYS`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let value = value.trim();
        match key.trim() {
            "experiment" => self.experiment = value.parse()?,
            "catalog" => self.catalog = value.to_string(),
            "surface" => self.surface = value.to_string(),
            "grid" | "grids" => self.grids = parse_list(key, value)?,
            "T" | "t" => self.t_max = parse(key, value)?,
            "lambda_schedule" | "lambda-schedule" => self.lambda_schedule = parse_list(key, value)?,
            "early_stop_tol" => self.early_stop_tol = parse(key, value)?,
            "initial_velocity" => self.initial_velocity = value.parse().map_err(HarnessError::Config)?,
            "data" => self.data = value.parse()?,
            "seed" => self.seed = parse(key, value)?,
            "ensemble" => self.ensemble = parse(key, value)?,
            "levels" => self.levels = parse_list(key, value)?,
            "scheme" => self.scheme = value.parse().map_err(HarnessError::Config)?,
            "cfl" => self.cfl = parse(key, value)?,
            "out" | "output_dir" => self.output_dir = PathBuf::from(value),
            other => return Err(HarnessError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), HarnessError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| HarnessError::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        let entry = catalog(&self.catalog)?;
        if self.grids.is_empty() || self.grids.iter().any(|&n| n < 8) {
            return bad("grid sizes must be at least 8".into());
        }
        if self.grids.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("grid sizes must be strictly ascending: {:?}", self.grids));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad(format!("T = {} must be positive", self.t_max));
        }
        let (lo, hi) = entry.metric.window();
        if -self.t_max < lo || self.t_max > hi {
            return bad(format!("T = {} leaves the coefficient window ({lo}, {hi}) of {}", self.t_max, self.catalog));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl = {} not in (0, 1]", self.cfl));
        }
        let sched = &self.lambda_schedule;
        if sched.is_empty() || sched.iter().any(|l| !(*l > 0.0 && *l < 1.0)) || sched.windows(2).any(|w| w[1] <= w[0]) {
            return bad("lambda_schedule must be strictly increasing inside (0, 1)".into());
        }
        match self.experiment {
            Experiment::Goursat | Experiment::EstimateConstants => {
                if !CharacteristicSurface::names().contains(&self.surface.as_str()) {
                    return Err(SurfaceError::UnknownSurface(self.surface.clone()).into());
                }
            }
            Experiment::Convergence if self.grids.len() < 3 => return bad("convergence needs at least 3 grid sizes".into()),
            Experiment::MollifyCheck if self.levels.is_empty() || self.levels.contains(&0) => {
                return bad("levels must be positive".into());
            }
            _ => {}
        }
        if self.experiment == Experiment::EstimateConstants {
            if self.ensemble < 8 {
                return bad(format!("ensemble = {} below 8", self.ensemble));
            }
            let grid = experiments::grid_for(entry.dim(), self.grids[0]);
            let surface = CharacteristicSurface::by_name(&self.surface, &grid, &entry.metric)?;
            let phi = surface.phi().max_abs();
            if !(self.t_max > phi) {
                return bad(format!("T = {} must exceed max |φ| = {phi}", self.t_max));
            }
        }
        Ok(())
    }
}

/// One checked statement of an experiment.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Result of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub assertions: Vec<Assertion>,
    pub manifest: serde_json::Value,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}
