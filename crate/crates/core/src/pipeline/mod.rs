//! Batch orchestration: ingestion, extraction, training, evaluation and reports.
//!
//! Output directory layout:
//!
//! ```text
//! <out>/features.csv
//! <out>/models/manifest.json, ssp_<SENSOR>.json, feature_<TEAM>.json
//! <out>/models/fold_<subject>/...        (leave-one-subject-out)
//! <out>/report.json, sizes.csv, teams.csv, fusion_audit.jsonl
//! ```

pub mod config;
pub mod evaluate;
pub mod extract;
pub mod ingest;
pub mod report;
pub mod seeds;
pub mod synth;
pub mod train;

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{ConfigError, PipelineConfig, SplitSpec};
pub use evaluate::{run_evaluate, EvalReport, Robustness};
pub use extract::{run_extract, Corruption, FeatureStore};
pub use ingest::IngestionError;
pub use train::{run_train, ModelStore};

use crate::ewt::EwtError;
use crate::features::FeatureError;
use crate::fusion::FusionError;
use crate::mlp::MlpError;
use crate::windowing::WindowError;

pub const FEATURES_FILE: &str = "features.csv";
pub const MODELS_DIR: &str = "models";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingestion(#[from] IngestionError),
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error(transparent)]
    Ewt(#[from] EwtError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error("training {model}: {source}")]
    Training {
        model: String,
        #[source]
        source: MlpError,
    },
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("nothing found at {0}; run the previous stage first")]
    MissingStore(PathBuf),
}

impl PipelineError {
    /// Errors caused by the configuration rather than by data or I/O.
    pub fn is_validation(&self) -> bool {
        matches!(self, PipelineError::Config(_))
    }
}

pub fn save_models(folds: &[ModelStore], out_dir: &Path) -> Result<(), PipelineError> {
    let dir = out_dir.join(MODELS_DIR);
    match folds {
        [single] => single.save(&dir),
        _ => folds
            .iter()
            .try_for_each(|f| f.save(&dir.join(format!("fold_{}", f.split.test.join("_"))))),
    }
}

pub fn load_models(out_dir: &Path) -> Result<Vec<ModelStore>, PipelineError> {
    let dir = out_dir.join(MODELS_DIR);
    if dir.join("manifest.json").is_file() {
        return Ok(vec![ModelStore::load(&dir)?]);
    }
    let mut folds: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|_| PipelineError::MissingStore(dir.clone()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("manifest.json").is_file())
        .collect();
    folds.sort();
    if folds.is_empty() {
        return Err(PipelineError::MissingStore(dir));
    }
    folds.iter().map(|p| ModelStore::load(p)).collect()
}

pub fn load_features(out_dir: &Path) -> Result<FeatureStore, PipelineError> {
    let path = out_dir.join(FEATURES_FILE);
    if !path.is_file() {
        return Err(PipelineError::MissingStore(path));
    }
    FeatureStore::read_csv(&path)
}

/// Test subjects of every fold.
pub fn test_subjects(folds: &[ModelStore]) -> Vec<String> {
    let mut s: Vec<String> = folds.iter().flat_map(|f| f.split.test.clone()).collect();
    s.sort();
    s.dedup();
    s
}

/// Re-extracts the test subjects with `cfg.noise_sensor` replaced by white
/// noise and compares full-team accuracies against `clean`.
pub fn run_robustness(
    cfg: &PipelineConfig,
    data_dir: &Path,
    folds: &[ModelStore],
    clean: &EvalReport,
) -> Result<Option<Robustness>, PipelineError> {
    let corruption = Corruption {
        sensor: cfg.noise_sensor,
        seed: seeds::derive_seed(cfg.seed, "noise"),
    };
    let subjects = test_subjects(folds);
    let noisy_store = run_extract(cfg, data_dir, Some(&subjects), Some(&corruption))?;
    let (noisy, _) = run_evaluate(cfg, folds, &noisy_store)?;
    Ok(Robustness::compare(cfg.noise_sensor, clean, &noisy))
}

/// Extract, train, evaluate (clean and corrupted) and write every artefact.
pub fn run_all(cfg: &PipelineConfig, data_dir: &Path, out_dir: &Path) -> Result<EvalReport, PipelineError> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|source| PipelineError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let store = run_extract(cfg, data_dir, None, None)?;
    store.write_csv(&out_dir.join(FEATURES_FILE))?;
    let folds = run_train(cfg, &store)?;
    save_models(&folds, out_dir)?;
    let (mut report, audit) = run_evaluate(cfg, &folds, &store)?;
    report.robustness = run_robustness(cfg, data_dir, &folds, &report)?;
    report::emit_report(&report, &audit, out_dir)?;
    Ok(report)
}
