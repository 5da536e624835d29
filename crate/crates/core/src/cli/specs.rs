//! JSON run specifications accepted by the subcommands.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::codec::CodecChoice;
use crate::info::{JointInstance, SWEEP_SETTINGS};
use crate::model::{ExperimentConfig, ParameterVector, PriorSpec};
use crate::protocols::{default_l_const, ProtocolSpec};

use super::{CliError, SCHEMA_VERSION};

/// `simulate`: one protocol under a prior, or its worst case over a θ grid.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    pub schema_version: u32,
    pub protocol: ProtocolSpec,
    pub config: ExperimentConfig,
    #[serde(default)]
    pub prior: Option<PriorSpec>,
    #[serde(default)]
    pub theta_grid: Option<Vec<ParameterVector>>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub pool_machines: Option<usize>,
    #[serde(default)]
    pub noise_sigma2: Option<f64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// `tradeoff`: the thresholding protocol across a list of α.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeoffSpec {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub s: usize,
    pub alphas: Vec<f64>,
    #[serde(default = "default_l_const")]
    pub l_const: f64,
    #[serde(default = "default_codec")]
    pub codec: CodecChoice,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// `directsum`: loss decomposition of a d-dimensional protocol.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectSumSpec {
    pub schema_version: u32,
    pub inner: ProtocolSpec,
    pub config: ExperimentConfig,
    pub prior: PriorSpec,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// `verify-info`: the information-inequality suite.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyInfoSpec {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_instances")]
    pub chain_rule_instances: usize,
    #[serde(default = "default_instances")]
    pub superadditivity_instances: usize,
    #[serde(default = "default_quantizers")]
    pub quantizers_per_setting: usize,
    #[serde(default = "default_settings")]
    pub settings: Vec<(f64, usize)>,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default)]
    pub joints: Vec<JointInstance>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_codec() -> CodecChoice {
    CodecChoice::Default
}

fn default_instances() -> usize {
    1000
}

fn default_quantizers() -> usize {
    8
}

fn default_settings() -> Vec<(f64, usize)> {
    SWEEP_SETTINGS.to_vec()
}

fn default_sigma2() -> f64 {
    1.0
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::spec(format!("cannot read spec {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::spec(format!("invalid spec {}: {e}", path.display())))
}

pub fn check_schema(version: u32) -> Result<(), CliError> {
    if version != SCHEMA_VERSION {
        return Err(CliError::spec(format!(
            "unsupported schema_version {version}, expected {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

/// A flag wins over the spec; one of them must be present.
pub fn required<T: Copy>(flag: Option<T>, spec: Option<T>, field: &str) -> Result<T, CliError> {
    flag.or(spec)
        .ok_or_else(|| CliError::spec(format!("missing required field `{field}` (set it in the spec or pass --{field})")))
}

pub fn validate_config(config: &ExperimentConfig) -> Result<(), CliError> {
    config.validate().map_err(CliError::from_spec)
}
