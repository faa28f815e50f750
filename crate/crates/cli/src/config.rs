//! Config files: TOML, or JSON when the extension is `.json`.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use rfo_core::fields::{Boundary, Distribution, ModelParams, ScaleConfig};

use crate::{CliError, CliResult, Common};

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_WORKERS: usize = 1;

/// Reads and deserializes a config, reporting the failing field path and,
/// for TOML, the line and column.
pub fn load<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, path.extension().is_some_and(|e| e == "json"))
        .map_err(|m| CliError::Config(format!("{}: {m}", path.display())))
}

pub fn parse<T: DeserializeOwned>(text: &str, json: bool) -> Result<T, String> {
    if json {
        let mut de = serde_json::Deserializer::from_str(text);
        return serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let inner = e.inner();
            format!(
                "{}: {} (line {}, column {})",
                field_path(e.path().to_string(), &inner.to_string()),
                inner,
                inner.line(),
                inner.column()
            )
        });
    }
    let de = toml::de::Deserializer::parse(text).map_err(|e| located(text, &e))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = field_path(e.path().to_string(), e.inner().message());
        format!("{path}: {}", located(text, e.inner()))
    })
}

/// Appends the missing field's name to the path of its parent table.
fn field_path(path: String, message: &str) -> String {
    let missing = message
        .strip_prefix("missing field `")
        .and_then(|rest| rest.split('`').next());
    match (missing, path.as_str()) {
        (Some(f), ".") => f.to_string(),
        (Some(f), p) => format!("{p}.{f}"),
        (None, _) => path,
    }
}

fn located(text: &str, e: &toml::de::Error) -> String {
    match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            format!("{} (line {line}, column {column})", e.message())
        }
        None => e.message().to_string(),
    }
}

/// Loads the config if one was given, else the type's defaults.
pub fn load_or_default<T: DeserializeOwned + Default>(common: &Common) -> CliResult<T> {
    match &common.config {
        Some(p) => load(p),
        None => Ok(T::default()),
    }
}

pub fn require_config(common: &Common) -> CliResult<&PathBuf> {
    common
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("this command needs --config".into()))
}

/// Seed and worker count after applying flag > environment > file > default.
pub fn resolve_run(common: &Common, file_seed: Option<u64>, file_workers: Option<usize>) -> CliResult<(u64, usize)> {
    let seed = common.seed.or(file_seed).unwrap_or(DEFAULT_SEED);
    let workers = common.workers.or(file_workers).unwrap_or(DEFAULT_WORKERS);
    if workers == 0 {
        return Err(CliError::Config("workers must be at least 1".into()));
    }
    Ok((seed, workers))
}

/// Model section with every field optional; missing values take the XY
/// defaults and the boundary defaults to a unit field along `e₁`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub beta: f64,
    pub boundary: Option<Boundary>,
    pub scales: ScaleConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n: 2,
            k: 1,
            eps: 0.5,
            beta: 1.0,
            boundary: None,
            scales: ScaleConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn resolve(&self) -> CliResult<ModelParams> {
        let params = ModelParams {
            n: self.n,
            k: self.k,
            eps: self.eps,
            beta: self.beta,
            boundary: self.boundary.clone().unwrap_or_else(|| Boundary::field_e1(self.n.max(1))),
            scales: self.scales,
        };
        params.validate().map_err(|e| CliError::Config(format!("model: {e}")))?;
        Ok(params)
    }
}

/// Which disorder realization a single-configuration command uses.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisorderConfig {
    pub distribution: Distribution,
    pub realization: u64,
}

impl Default for DisorderConfig {
    fn default() -> Self {
        Self {
            distribution: Distribution::StandardGaussian,
            realization: 0,
        }
    }
}
