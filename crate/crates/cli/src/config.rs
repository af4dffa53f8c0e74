//! Experiment configuration files (TOML). Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationFile {
    /// `quad` or `mc`.
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

impl Default for IntegrationFile {
    fn default() -> Self {
        Self { method: "quad".into(), nodes: None, samples: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceComparisonFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub lambda: f64,
    #[serde(default = "unit_square")]
    pub window: [f64; 4],
    pub f: String,
    pub reps: usize,
    #[serde(default = "poissonized")]
    pub scheme: String,
    #[serde(default)]
    pub integration: IntegrationFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CiSuiteFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// `linear:a,b` or `const:c`.
    pub intensity: String,
    #[serde(default = "unit_interval")]
    pub interval: [f64; 2],
    pub h: f64,
    pub alpha: f64,
    #[serde(default = "all_methods")]
    pub methods: Vec<String>,
    pub reps: usize,
    #[serde(default = "default_grid_steps")]
    pub grid_steps: usize,
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Long-format CSV of bands and coverage, one row per method and grid point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series_out: Option<PathBuf>,
}

fn unit_square() -> [f64; 4] {
    [0.0, 1.0, 0.0, 1.0]
}

fn unit_interval() -> [f64; 2] {
    [0.0, 1.0]
}

fn poissonized() -> String {
    "poissonized".into()
}

fn all_methods() -> Vec<String> {
    ["mc", "closed", "exact", "oracle"].map(String::from).to_vec()
}

pub fn default_grid_steps() -> usize {
    50
}

pub fn default_resamples() -> usize {
    2_000
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentConfig {
    VarianceComparison(VarianceComparisonFile),
    CiSuite(CiSuiteFile),
}

fn parse_body<T: DeserializeOwned>(table: toml::Table) -> CliResult<T> {
    toml::Value::Table(table).try_into().map_err(|e| CliError::Config(e.to_string()))
}

pub fn parse(text: &str) -> CliResult<ExperimentConfig> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    let kind = match table.remove("experiment") {
        Some(toml::Value::String(s)) => s,
        Some(_) => return Err(CliError::Config("`experiment` must be a string".into())),
        None => return Err(CliError::Config("missing `experiment` key".into())),
    };
    match kind.as_str() {
        "variance_comparison" => parse_body(table).map(ExperimentConfig::VarianceComparison),
        "ci_suite" => parse_body(table).map(ExperimentConfig::CiSuite),
        other => Err(CliError::Config(format!(
            "unknown experiment {other:?} (expected variance_comparison or ci_suite)"
        ))),
    }
}

pub fn load(path: &Path) -> CliResult<(ExperimentConfig, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| CliError::Config("config is not UTF-8".into()))?;
    Ok((parse(text)?, bytes))
}
