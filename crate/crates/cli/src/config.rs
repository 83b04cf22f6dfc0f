//! TOML run configuration. Every field is optional; command-line flags are
//! laid over the file before anything is validated.

use std::path::{Path, PathBuf};

use protomdpc::density_evolution::Quantization;
use protomdpc::simulation::Format;
use protomdpc::{ensemble, Algorithm, BaseMatrix, DecoderConfig, EnsembleSpec};
use serde::Deserialize;

use crate::CliError;

/// Environment variable naming the config file used when `--config` is absent.
pub const CONFIG_ENV: &str = "PROTOMDPC_CONFIG";

/// Lifting size used when neither the file nor the flags set one.
pub const DEFAULT_Q: usize = 4801;

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in ensemble name (`A`, `B`, `C`).
    pub ensemble: Option<String>,
    /// Custom base matrix; takes precedence over `ensemble`.
    pub base: Option<Vec<Vec<u32>>>,
    pub state_columns: Option<Vec<usize>>,
    #[serde(rename = "Q", alias = "q")]
    pub q: Option<usize>,
    pub seed: Option<u64>,
    pub error_weight: Option<usize>,
    pub format: Option<Format>,
    #[serde(default)]
    pub decoder: DecoderSection,
    #[serde(default)]
    pub keys: KeySection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub threshold: ThresholdSection,
    #[serde(default)]
    pub security: SecuritySection,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DecoderSection {
    pub algorithm: Option<Algorithm>,
    pub omega: Option<f64>,
    pub max_iterations: Option<usize>,
    pub early_stop: Option<bool>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct KeySection {
    pub private: Option<PathBuf>,
    pub public: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub weights: Option<Vec<usize>>,
    pub trials: Option<usize>,
    /// 0 disables the cap.
    pub max_failures: Option<usize>,
    pub workers: Option<usize>,
    pub fixed_key: Option<bool>,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    pub step: Option<f64>,
    pub saturation: Option<f64>,
    pub block_length: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SecuritySection {
    pub curve: Option<PathBuf>,
    pub target_bler: Option<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::usage(format!("config: {e}")))
    }

    /// Reads `path`, or the file named by the environment variable, or
    /// returns the empty config.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn q(&self) -> usize {
        self.q.unwrap_or(DEFAULT_Q)
    }

    pub fn spec(&self) -> Result<EnsembleSpec, CliError> {
        let q = self.q();
        let spec = match &self.base {
            Some(rows) => {
                let state = self.state_columns.clone().unwrap_or_default();
                let name = self.ensemble.clone().unwrap_or_else(|| "custom".into());
                EnsembleSpec::new(name, BaseMatrix::new(rows.clone(), state)?, q)?
            }
            None => {
                let name = self
                    .ensemble
                    .as_deref()
                    .ok_or_else(|| CliError::usage("no ensemble given (use --ensemble or --base)"))?;
                ensemble(name, q)?
            }
        };
        Ok(spec)
    }

    pub fn decoder(&self) -> Result<DecoderConfig, CliError> {
        let d = &self.decoder;
        let mut cfg = DecoderConfig::new(d.algorithm.unwrap_or(Algorithm::AlgE), d.omega.unwrap_or(1.0));
        if let Some(it) = d.max_iterations {
            cfg.max_iterations = it;
        }
        if let Some(stop) = d.early_stop {
            cfg.early_stop = stop;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or_default()
    }

    pub fn quantization(&self) -> Result<Quantization, CliError> {
        let mut quant = Quantization::default();
        if let Some(step) = self.threshold.step {
            quant.step = step;
        }
        if let Some(sat) = self.threshold.saturation {
            quant.saturation = sat;
        }
        quant.validate()?;
        Ok(quant)
    }
}

/// Parses `1,8,8;5,5,5` into rows.
pub fn parse_base(text: &str) -> Result<Vec<Vec<u32>>, String> {
    text.split(';')
        .map(|row| {
            row.split(',')
                .map(|v| v.trim().parse::<u32>().map_err(|e| format!("bad entry `{v}`: {e}")))
                .collect()
        })
        .collect()
}
