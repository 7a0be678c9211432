//! Windowing, labelling, decomposition and featurisation of an ingestion directory.

use std::fs::File;
use std::path::Path;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::ingest::{list_subjects, read_subject, SubjectData};
use super::{seeds, PipelineError};
use crate::ewt::decompose;
use crate::features::{feature_names, feature_vector};
use crate::windowing::{label_index_range, majority_label, segment, AffectClass, LabelVote, Sensor, WindowSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub subject: String,
    pub sensor: Sensor,
    pub window: usize,
    pub label: AffectClass,
    pub features: Vec<f64>,
}

/// Window bookkeeping for one (subject, sensor) stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractStats {
    pub subject: String,
    pub sensor: Sensor,
    pub windows: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub unlabeled: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureStore {
    pub rows: Vec<FeatureRow>,
    pub stats: Vec<ExtractStats>,
}

const FIXED_COLUMNS: [&str; 4] = ["subject", "modality", "window_k", "label"];

impl FeatureStore {
    pub fn subjects(&self) -> Vec<String> {
        let mut s: Vec<String> = self.rows.iter().map(|r| r.subject.clone()).collect();
        s.sort();
        s.dedup();
        s
    }

    pub fn dim(&self) -> Option<usize> {
        self.rows.first().map(|r| r.features.len())
    }

    /// `subject,modality,window_k,label,f_0,...` with labels as condition codes.
    pub fn write_csv(&self, path: &Path) -> Result<(), PipelineError> {
        let csv_err = |e: csv::Error| PipelineError::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        let file = File::create(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut w = csv::Writer::from_writer(file);
        let dim = self.dim().unwrap_or(0);
        let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
        header.extend(feature_names(dim / 3));
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec = vec![
                r.subject.clone(),
                r.sensor.to_string(),
                r.window.to_string(),
                r.label.code().to_string(),
            ];
            rec.extend(r.features.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read_csv(path: &Path) -> Result<Self, PipelineError> {
        let file = File::open(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut reader = csv::Reader::from_reader(file);
        let at = |line: u64, message: String| PipelineError::Csv {
            path: path.to_path_buf(),
            message: format!("line {line}: {message}"),
        };
        let header = reader.headers().map_err(|e| at(1, e.to_string()))?.clone();
        if header.len() < FIXED_COLUMNS.len() || header.iter().take(4).ne(FIXED_COLUMNS) {
            return Err(at(1, "unexpected header".into()));
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| at(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            let sensor: Sensor = rec[1].parse().map_err(|e: crate::windowing::WindowError| at(line, e.to_string()))?;
            let window: usize = rec[2].parse().map_err(|_| at(line, format!("bad window index `{}`", &rec[2])))?;
            let code: i64 = rec[3].parse().map_err(|_| at(line, format!("bad label `{}`", &rec[3])))?;
            let label = AffectClass::from_code(code).ok_or_else(|| at(line, format!("label {code} is not a target class")))?;
            let features = rec
                .iter()
                .skip(4)
                .map(|v| v.parse::<f64>().map_err(|_| at(line, format!("bad feature `{v}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(FeatureRow {
                subject: rec[0].to_string(),
                sensor,
                window,
                label,
                features,
            });
        }
        Ok(Self {
            rows,
            stats: Vec::new(),
        })
    }
}

/// Replaces one sensor's stream with white noise of the same mean and spread.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Corruption {
    pub sensor: Sensor,
    pub seed: u64,
}

fn white_like(samples: &[f64], mut rng: impl rand::Rng) -> Vec<f64> {
    let n = samples.len().max(1) as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let normal = Normal::new(mean, sd.max(f64::MIN_POSITIVE)).expect("finite spread");
    (0..samples.len()).map(|_| normal.sample(&mut rng)).collect()
}

/// Feature rows of one sensor of one subject.
pub fn extract_stream(
    data: &SubjectData,
    sensor: Sensor,
    cfg: &PipelineConfig,
    corruption: Option<&Corruption>,
) -> Result<(Vec<FeatureRow>, ExtractStats), PipelineError> {
    let mut stats = ExtractStats {
        subject: data.id.clone(),
        sensor,
        windows: 0,
        accepted: 0,
        rejected: 0,
        unlabeled: 0,
    };
    let Some((fs, mut samples)) = data.sensor_stream(sensor) else {
        log::warn!("{}: no usable {sensor} stream", data.id);
        return Ok((Vec::new(), stats));
    };
    if let Some(c) = corruption.filter(|c| c.sensor == sensor) {
        let rng = seeds::stream(c.seed, &format!("noise/{}/{sensor}", data.id));
        samples = white_like(&samples, rng);
    }
    let spec = WindowSpec::new(cfg.window_seconds, cfg.overlap, fs)?;
    if samples.len() < spec.len() {
        log::warn!("{}: {sensor} stream shorter than one window", data.id);
        return Ok((Vec::new(), stats));
    }

    let mut kept = Vec::new();
    for (k, window) in segment(&samples, &spec)? {
        stats.windows += 1;
        let range = label_index_range(k, &spec, fs);
        if range.end > data.labels.len() {
            stats.unlabeled += 1;
            continue;
        }
        match majority_label(&data.labels[range], cfg.purity)? {
            LabelVote::Accepted { label, .. } => kept.push((k, window, label)),
            LabelVote::Rejected(_) => stats.rejected += 1,
        }
    }
    stats.accepted = kept.len();

    let ewt = cfg.ewt();
    let rows = kept
        .par_iter()
        .map(|&(k, window, label)| {
            let modes = decompose(window, fs, &ewt)?;
            Ok(FeatureRow {
                subject: data.id.clone(),
                sensor,
                window: k,
                label,
                features: feature_vector(&modes, cfg.max_modes, cfg.epsilon)?,
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok((rows, stats))
}

/// Extracts every configured sensor of every subject under `data_dir`.
///
/// When `subjects` is given only those subjects are processed.
pub fn run_extract(
    cfg: &PipelineConfig,
    data_dir: &Path,
    subjects: Option<&[String]>,
    corruption: Option<&Corruption>,
) -> Result<FeatureStore, PipelineError> {
    let sensors = cfg.sensor_set();
    let mut store = FeatureStore::default();
    for dir in list_subjects(data_dir)? {
        let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if subjects.is_some_and(|s| !s.contains(&name)) {
            continue;
        }
        let data = read_subject(&dir, &sensors)?;
        let results = sensors
            .par_iter()
            .map(|&s| extract_stream(&data, s, cfg, corruption))
            .collect::<Result<Vec<_>, _>>()?;
        for (rows, stats) in results {
            log::info!(
                "{} {}: {} windows, {} accepted, {} rejected, {} unlabeled",
                stats.subject,
                stats.sensor,
                stats.windows,
                stats.accepted,
                stats.rejected,
                stats.unlabeled
            );
            store.rows.extend(rows);
            store.stats.push(stats);
        }
    }
    Ok(store)
}
