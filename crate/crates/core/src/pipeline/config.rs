use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ewt::EwtConfig;
use crate::mlp::MlpHyper;
use crate::windowing::Sensor;

use super::synth::SynthConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

/// Subject-level split fractions. With `loso` every subject is the test set
/// once and `test` is ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub loso: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.70,
            val: 0.15,
            test: 0.15,
            loso: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Window length `L` in seconds.
    pub window_seconds: f64,
    /// Fractional overlap `alpha` of consecutive windows.
    pub overlap: f64,
    /// Minimum label purity `rho` for a window to be kept.
    pub purity: f64,
    /// Maximum number of modes `K`; features per sensor are `3K`.
    pub max_modes: usize,
    /// Offset inside the log-energy feature.
    pub epsilon: f64,
    /// Per-model seeds are derived from `seed`; `mlp.seed` is not used.
    pub mlp: MlpHyper,
    pub split: SplitSpec,
    pub seed: u64,
    pub sensors: Vec<Sensor>,
    pub synth: SynthConfig,
    /// Sensor whose test streams are replaced by white noise in the robustness run.
    pub noise_sensor: Sensor,
    pub data_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window_seconds: 30.0,
            overlap: 0.75,
            purity: 0.9,
            max_modes: 5,
            epsilon: 1e-12,
            mlp: MlpHyper::default(),
            split: SplitSpec::default(),
            seed: 42,
            sensors: Sensor::ALL.to_vec(),
            synth: SynthConfig::default(),
            noise_sensor: Sensor::Ecg,
            data_dir: None,
            out_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.window_seconds.is_finite() && self.window_seconds > 0.0) {
            return Err(invalid("window_seconds", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(invalid("overlap", "must lie in [0, 1)"));
        }
        if !(self.purity > 0.0 && self.purity <= 1.0) {
            return Err(invalid("purity", format!("{} is outside (0, 1]", self.purity)));
        }
        if !(1..=32).contains(&self.max_modes) {
            return Err(invalid("max_modes", "must lie in 1..=32"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(invalid("epsilon", "must be positive"));
        }
        self.mlp
            .validate()
            .map_err(|e| invalid("mlp", e.to_string()))?;
        let s = &self.split;
        for (name, v) in [("train", s.train), ("val", s.val), ("test", s.test)] {
            if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                return Err(invalid("split", format!("{name} fraction {v} outside [0, 1]")));
            }
        }
        if s.train <= 0.0 || s.val <= 0.0 {
            return Err(invalid("split", "train and val fractions must be positive"));
        }
        if !s.loso && ((s.train + s.val + s.test) - 1.0).abs() > 1e-9 {
            return Err(invalid("split", "fractions must sum to 1"));
        }
        if self.sensors.is_empty() {
            return Err(invalid("sensors", "at least one sensor is required"));
        }
        if self.sensors.iter().collect::<BTreeSet<_>>().len() != self.sensors.len() {
            return Err(invalid("sensors", "duplicate sensor"));
        }
        self.synth.validate().map_err(|m| invalid("synth", m))?;
        Ok(())
    }

    pub fn ewt(&self) -> EwtConfig {
        EwtConfig {
            max_modes: self.max_modes,
            ..EwtConfig::default()
        }
    }

    /// Configured sensors in canonical order.
    pub fn sensor_set(&self) -> Vec<Sensor> {
        self.sensors.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn features_per_sensor(&self) -> usize {
        3 * self.max_modes
    }
}
