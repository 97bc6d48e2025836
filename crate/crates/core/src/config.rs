//! Application configuration: JSON file, then `ATBAT_` environment overrides.
//!
//! An override names a config key with `__` between levels, so
//! `ATBAT_HTTP__PORT=9000` sets `http.port`. Values are parsed as JSON when
//! they parse, otherwise taken as strings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ingest::ColumnMapping;
use crate::outcome::SoftmaxConfig;
use crate::patience::PatienceConfig;
use crate::solver::SolverConfig;
use crate::zones::ZoneGrid;

pub const ENV_PREFIX: &str = "ATBAT_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    #[default]
    Softmax,
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutcomeConfig {
    pub kind: OutcomeKind,
    /// Backoff weight of the empirical table.
    pub alpha: f64,
    pub softmax: SoftmaxConfig,
}

impl Default for OutcomeConfig {
    fn default() -> Self {
        OutcomeConfig {
            kind: OutcomeKind::Softmax,
            alpha: 5.0,
            softmax: SoftmaxConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub keep_fraction: f64,
    pub ridge_lambda: f64,
    pub min_variance: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            keep_fraction: crate::control::DEFAULT_KEEP_FRACTION,
            ridge_lambda: 1.0,
            min_variance: crate::control::DEFAULT_MIN_VARIANCE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Player-disjoint held-out share; `null` trains on everything.
    pub test_fraction: Option<f64>,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_fraction: Some(0.2),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolveAlgorithm {
    #[default]
    Acyclic,
    ValueIteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub at_bats: usize,
    pub seed: u64,
    /// Smoothing weight of the behavioral baseline.
    pub behavioral_alpha: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            at_bats: 20_000,
            seed: 0,
            behavioral_alpha: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpConfig {
    pub bind: String,
    pub port: u32,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            bind: "127.0.0.1".into(),
            port: 8080,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub store: PathBuf,
    pub grid: ZoneGrid,
    pub mapping: ColumnMapping,
    pub patience: PatienceConfig,
    pub solver: SolverConfig,
    pub algorithm: SolveAlgorithm,
    pub outcome: OutcomeConfig,
    pub control: ControlConfig,
    pub split: SplitConfig,
    pub simulation: SimulationConfig,
    pub http: HttpConfig,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            store: PathBuf::from("store"),
            grid: ZoneGrid::default(),
            mapping: ColumnMapping::default(),
            patience: PatienceConfig::default(),
            solver: SolverConfig::default(),
            algorithm: SolveAlgorithm::default(),
            outcome: OutcomeConfig::default(),
            control: ControlConfig::default(),
            split: SplitConfig::default(),
            simulation: SimulationConfig::default(),
            http: HttpConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("invalid configuration: {0}")]
pub struct ConfigError(pub String);

fn set_path(root: &mut Value, path: &[String], value: Value) -> Result<(), ConfigError> {
    let mut cur = root;
    for (i, key) in path.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| ConfigError(format!("{} is not a section", path[..i].join("."))))?;
        if i + 1 == path.len() {
            obj.insert(key.clone(), value);
            return Ok(());
        }
        cur = obj
            .entry(key.clone())
            .or_insert_with(|| Value::Object(Default::default()));
        if cur.is_null() {
            *cur = Value::Object(Default::default());
        }
    }
    Ok(())
}

impl AppConfig {
    /// Defaults, overlaid by the file if given, then by `env`.
    pub fn load(
        file: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, ConfigError> {
        let mut v = serde_json::to_value(AppConfig::default()).expect("default config serializes");
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
            let user: Value = serde_json::from_str(&text)
                .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
            merge(&mut v, user);
        }
        let mut overrides: Vec<(String, String)> = env
            .into_iter()
            .filter(|(k, _)| k.starts_with(ENV_PREFIX))
            .collect();
        overrides.sort();
        for (k, raw) in overrides {
            let path: Vec<String> = k[ENV_PREFIX.len()..]
                .split("__")
                .map(|s| s.to_ascii_lowercase())
                .collect();
            if path.iter().any(|s| s.is_empty()) {
                return Err(ConfigError(format!("malformed override {k}")));
            }
            let value = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
            set_path(&mut v, &path, value)?;
        }
        let cfg: AppConfig = serde_json::from_value(v).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_env(file: Option<&Path>) -> Result<Self, ConfigError> {
        Self::load(file, std::env::vars())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError(m));
        self.grid.validate().map_err(|e| ConfigError(e.to_string()))?;
        let t = self.patience.threshold;
        if !(t > 0.0 && t < 1.0) {
            return bad(format!("patience.threshold must lie in (0, 1), got {t}"));
        }
        // cap feasibility depends on the repertoire, checked per solve
        self.solver
            .validate(usize::MAX)
            .map_err(|e| ConfigError(format!("solver: {e}")))?;
        if !(self.outcome.alpha >= 0.0) || !self.outcome.alpha.is_finite() {
            return bad("outcome.alpha must be non-negative".into());
        }
        self.outcome
            .softmax
            .validate()
            .map_err(|e| ConfigError(format!("outcome.softmax: {e}")))?;
        let c = &self.control;
        if !(c.keep_fraction > 0.0 && c.keep_fraction <= 1.0) {
            return bad("control.keep_fraction must lie in (0, 1]".into());
        }
        if !(c.ridge_lambda >= 0.0) || !(c.min_variance > 0.0) {
            return bad("control.ridge_lambda must be >= 0 and control.min_variance > 0".into());
        }
        if let Some(f) = self.split.test_fraction {
            if !(f > 0.0 && f < 1.0) {
                return bad(format!("split.test_fraction must lie in (0, 1), got {f}"));
            }
        }
        if self.simulation.at_bats == 0 {
            return bad("simulation.at_bats must be positive".into());
        }
        if !(self.simulation.behavioral_alpha >= 0.0) {
            return bad("simulation.behavioral_alpha must be non-negative".into());
        }
        if !(1..=65535).contains(&self.http.port) {
            return bad(format!("http.port must lie in 1..65535, got {}", self.http.port));
        }
        Ok(())
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}
