//! Run configuration: one JSON document per reproducible run.

use std::path::{Path, PathBuf};

use lpen::montecarlo::SimConfig;
use lpen::sweep::SweepSpec;
use lpen::verify::VerifyConfig;
use lpen::{ClockSpec, ExtrapolationConfig, HFunction, ModelSpec, PenalizationParams, QuadratureConfig};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::CliError;

/// Top-level document `{"model", "penalization", "command", "seed", "out"}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "ModelSpec::standard_bm")]
    pub model: ModelSpec,
    #[serde(default)]
    pub penalization: Option<PenalizationParams>,
    #[serde(default)]
    pub command: serde_json::Value,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    /// The command section as the options type of one subcommand (an
    /// absent section means all defaults).
    pub fn command<T: DeserializeOwned>(&self) -> Result<T, CliError> {
        let value = match &self.command {
            serde_json::Value::Null => serde_json::Value::Object(Default::default()),
            v => v.clone(),
        };
        serde_json::from_value(value).map_err(|e| CliError::Config(format!("invalid command section: {e}")))
    }

    pub fn penalization(&self) -> Result<PenalizationParams, CliError> {
        self.penalization
            .ok_or_else(|| CliError::Config("this command needs a \"penalization\" section".into()))
    }
}

/// Optional numerical settings shared by the exact commands.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct Numerics {
    pub quadrature: QuadratureConfig,
    pub extrapolation: ExtrapolationConfig,
}

impl Numerics {
    pub fn h_function(&self, model: ModelSpec) -> Result<HFunction, CliError> {
        Ok(HFunction::with_config(model, self.quadrature, self.extrapolation)?)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HTableOptions {
    pub grid: Vec<f64>,
    /// γ for the `h_gamma` column; defaults to the penalization γ, else 0.
    pub gamma: Option<f64>,
    pub quadrature: QuadratureConfig,
    pub extrapolation: ExtrapolationConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhiOptions {
    pub grid: Vec<f64>,
    pub quadrature: QuadratureConfig,
    pub extrapolation: ExtrapolationConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectOptions {
    pub clock: ClockSpec,
    #[serde(default)]
    pub grid: Vec<f64>,
    /// Also estimate by simulation (always done for exponential clocks).
    #[serde(default)]
    pub simulate: bool,
    #[serde(default)]
    pub mc: SimConfig,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub extrapolation: ExtrapolationConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOptions {
    pub sweep: SweepSpec,
    #[serde(default = "default_x")]
    pub x: f64,
    #[serde(default)]
    pub mc: SimConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub extrapolation: ExtrapolationConfig,
}

fn default_x() -> f64 {
    0.5
}

/// The verify command section is a [`VerifyConfig`].
pub type VerifyOptions = VerifyConfig;

pub fn numerics(quadrature: QuadratureConfig, extrapolation: ExtrapolationConfig) -> Numerics {
    Numerics {
        quadrature,
        extrapolation,
    }
}
