//! Reading and writing the per-subject ingestion layout.
//!
//! ```text
//! <data>/<subject>/<MODALITY>.csv   header `value`, one sample per line
//! <data>/<subject>/labels.csv       header `label`, integer codes at 700 Hz
//! <data>/<subject>/meta.json        {"ECG": 700.0, "BVP": 64.0, ...}
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::windowing::{Modality, Sensor, LABEL_RATE_HZ};

pub const LABELS_FILE: &str = "labels.csv";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Error)]
pub enum IngestionError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{path}: expected header `{expected}`, found `{found}`")]
    Header { path: PathBuf, expected: &'static str, found: String },
    #[error("{path}: {message}")]
    Meta { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Inconsistent { path: PathBuf, message: String },
    #[error("no subject directories under {0}")]
    NoSubjects(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestionError + '_ {
    move |source| IngestionError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One subject's raw streams and label codes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubjectData {
    pub id: String,
    pub rates: BTreeMap<Modality, f64>,
    pub streams: BTreeMap<Modality, Vec<f64>>,
    pub labels: Vec<i64>,
}

impl SubjectData {
    /// The stream a sensor's predictor sees. The accelerometer is reduced to
    /// the Euclidean norm of its axes, truncated to the shortest axis.
    pub fn sensor_stream(&self, sensor: Sensor) -> Option<(f64, Vec<f64>)> {
        let channels = sensor.channels();
        let fs = *self.rates.get(&channels[0])?;
        if channels.len() == 1 {
            return Some((fs, self.streams.get(&channels[0])?.clone()));
        }
        let axes: Vec<&Vec<f64>> = channels.iter().map(|c| self.streams.get(c)).collect::<Option<_>>()?;
        if channels.iter().any(|c| self.rates.get(c) != Some(&fs)) {
            return None;
        }
        let n = axes.iter().map(|a| a.len()).min()?;
        let norm = (0..n)
            .map(|i| axes.iter().map(|a| a[i] * a[i]).sum::<f64>().sqrt())
            .collect();
        Some((fs, norm))
    }
}

/// Sorted subject directories (those holding a labels file).
pub fn list_subjects(data_dir: &Path) -> Result<Vec<PathBuf>, IngestionError> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(data_dir).map_err(io_err(data_dir))? {
        let path = entry.map_err(io_err(data_dir))?.path();
        if path.is_dir() && path.join(LABELS_FILE).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(IngestionError::NoSubjects(data_dir.to_path_buf()));
    }
    Ok(dirs)
}

fn read_column<T: std::str::FromStr>(path: &Path, header: &'static str) -> Result<Vec<T>, IngestionError>
where
    T::Err: std::fmt::Display,
{
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let found = reader
        .headers()
        .map_err(|e| IngestionError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if found.trim_start_matches('\u{feff}').trim() != header {
        return Err(IngestionError::Header {
            path: path.to_path_buf(),
            expected: header,
            found,
        });
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| IngestionError::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 1 {
            return Err(IngestionError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected 1 field, found {}", record.len()),
            });
        }
        let text = record[0].trim();
        let value = text.parse::<T>().map_err(|e| IngestionError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("`{text}`: {e}"),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn read_meta(path: &Path) -> Result<BTreeMap<Modality, f64>, IngestionError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let raw: BTreeMap<String, f64> = serde_json::from_str(&text).map_err(|e| IngestionError::Meta {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut rates = BTreeMap::new();
    for (key, fs) in raw {
        let Ok(m) = key.parse::<Modality>() else {
            log::debug!("{}: ignoring key `{key}`", path.display());
            continue;
        };
        if !(fs.is_finite() && fs > 0.0) {
            return Err(IngestionError::Meta {
                path: path.to_path_buf(),
                message: format!("sampling rate for {m} must be positive, got {fs}"),
            });
        }
        rates.insert(m, fs);
    }
    Ok(rates)
}

/// Loads the channels needed by `sensors` from one subject directory.
pub fn read_subject(dir: &Path, sensors: &[Sensor]) -> Result<SubjectData, IngestionError> {
    let id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let meta_path = dir.join(META_FILE);
    let all_rates = read_meta(&meta_path)?;
    let labels = read_column::<i64>(&dir.join(LABELS_FILE), "label")?;
    let label_seconds = labels.len() as f64 / LABEL_RATE_HZ;

    let mut data = SubjectData {
        id,
        labels,
        ..Default::default()
    };
    for sensor in sensors {
        for &m in sensor.channels() {
            let fs = *all_rates.get(&m).ok_or_else(|| IngestionError::Meta {
                path: meta_path.clone(),
                message: format!("no sampling rate for {m}"),
            })?;
            let path = dir.join(format!("{m}.csv"));
            let samples = read_column::<f64>(&path, "value")?;
            if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
                return Err(IngestionError::Parse {
                    path,
                    line: pos as u64 + 2,
                    message: "non-finite sample".into(),
                });
            }
            let seconds = samples.len() as f64 / fs;
            if (seconds - label_seconds).abs() > 1.0 {
                log::warn!(
                    "{}: {seconds:.1} s of signal against {label_seconds:.1} s of labels",
                    path.display()
                );
            }
            data.rates.insert(m, fs);
            data.streams.insert(m, samples);
        }
    }
    Ok(data)
}

fn write_column<T: std::fmt::Display>(path: &Path, header: &str, values: &[T]) -> Result<(), IngestionError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "{header}")?;
        for v in values {
            writeln!(w, "{v}")?;
        }
        w.flush()
    };
    body().map_err(io_err(path))
}

/// Writes one subject in the ingestion layout under `data_dir/<id>`.
pub fn write_subject(data_dir: &Path, subject: &SubjectData) -> Result<PathBuf, IngestionError> {
    let dir = data_dir.join(&subject.id);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    for (m, samples) in &subject.streams {
        write_column(&dir.join(format!("{m}.csv")), "value", samples)?;
    }
    write_column(&dir.join(LABELS_FILE), "label", &subject.labels)?;
    let meta: BTreeMap<String, f64> = subject.rates.iter().map(|(m, fs)| (m.to_string(), *fs)).collect();
    let meta_path = dir.join(META_FILE);
    let text = serde_json::to_string_pretty(&meta).expect("meta serialises");
    fs::write(&meta_path, text + "\n").map_err(io_err(&meta_path))?;
    Ok(dir)
}
