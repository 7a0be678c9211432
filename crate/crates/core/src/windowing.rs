//! Raw streams, overlapping windows and majority-vote window labels.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sampling rate of the condition label stream.
pub const LABEL_RATE_HZ: f64 = 700.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WindowError {
    #[error("stream has {len} samples, shorter than one window of {window}")]
    StreamTooShort { len: usize, window: usize },
    #[error("invalid window spec: {0}")]
    InvalidSpec(String),
    #[error("label range is empty")]
    EmptyRange,
    #[error("sampling rate must be positive and finite, got {0}")]
    InvalidSampleRate(f64),
    #[error("signal record has no samples")]
    EmptyRecord,
    #[error("unknown modality `{0}`")]
    UnknownModality(String),
    #[error("unknown sensor `{0}`")]
    UnknownSensor(String),
}

/// One recorded channel. Three-axis acceleration is stored as three channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "ECG")]
    Ecg,
    #[serde(rename = "EDA")]
    Eda,
    #[serde(rename = "EMG")]
    Emg,
    #[serde(rename = "BVP")]
    Bvp,
    #[serde(rename = "ACC_X")]
    AccX,
    #[serde(rename = "ACC_Y")]
    AccY,
    #[serde(rename = "ACC_Z")]
    AccZ,
}

impl Modality {
    pub const ALL: [Modality; 7] = [
        Modality::Ecg,
        Modality::Eda,
        Modality::Emg,
        Modality::Bvp,
        Modality::AccX,
        Modality::AccY,
        Modality::AccZ,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Ecg => "ECG",
            Modality::Eda => "EDA",
            Modality::Emg => "EMG",
            Modality::Bvp => "BVP",
            Modality::AccX => "ACC_X",
            Modality::AccY => "ACC_Y",
            Modality::AccZ => "ACC_Z",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = WindowError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Modality::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| WindowError::UnknownModality(s.to_string()))
    }
}

/// A physical sensor feeding one single-sensor predictor. The accelerometer
/// is one sensor built from three channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sensor {
    #[serde(rename = "ECG")]
    Ecg,
    #[serde(rename = "EDA")]
    Eda,
    #[serde(rename = "EMG")]
    Emg,
    #[serde(rename = "BVP")]
    Bvp,
    #[serde(rename = "ACC")]
    Acc,
}

impl Sensor {
    pub const ALL: [Sensor; 5] = [Sensor::Ecg, Sensor::Eda, Sensor::Emg, Sensor::Bvp, Sensor::Acc];

    pub fn as_str(self) -> &'static str {
        match self {
            Sensor::Ecg => "ECG",
            Sensor::Eda => "EDA",
            Sensor::Emg => "EMG",
            Sensor::Bvp => "BVP",
            Sensor::Acc => "ACC",
        }
    }

    pub fn channels(self) -> &'static [Modality] {
        match self {
            Sensor::Ecg => &[Modality::Ecg],
            Sensor::Eda => &[Modality::Eda],
            Sensor::Emg => &[Modality::Emg],
            Sensor::Bvp => &[Modality::Bvp],
            Sensor::Acc => &[Modality::AccX, Modality::AccY, Modality::AccZ],
        }
    }
}

impl fmt::Display for Sensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sensor {
    type Err = WindowError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Sensor::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| WindowError::UnknownSensor(s.to_string()))
    }
}

/// Target affective conditions. Discriminants are the label-stream codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AffectClass {
    Baseline = 1,
    Stress = 2,
    Amusement = 3,
}

impl AffectClass {
    pub const ALL: [AffectClass; 3] = [AffectClass::Baseline, AffectClass::Stress, AffectClass::Amusement];
    pub const COUNT: usize = 3;

    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            1 => Some(AffectClass::Baseline),
            2 => Some(AffectClass::Stress),
            3 => Some(AffectClass::Amusement),
            _ => None,
        }
    }

    pub fn code(self) -> i64 {
        self as i64
    }

    /// Zero-based class index used by the classifiers.
    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    pub subject_id: String,
    pub modality: Modality,
    pub fs: f64,
    pub samples: Vec<f64>,
}

impl SignalRecord {
    pub fn new(subject_id: impl Into<String>, modality: Modality, fs: f64, samples: Vec<f64>) -> Result<Self, WindowError> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(WindowError::InvalidSampleRate(fs));
        }
        if samples.is_empty() {
            return Err(WindowError::EmptyRecord);
        }
        Ok(Self {
            subject_id: subject_id.into(),
            modality,
            fs,
            samples,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    duration_s: f64,
    overlap: f64,
    len: usize,
    hop: usize,
}

impl WindowSpec {
    /// `W = round(L fs)`, `H = max(1, round((1 - alpha) W))`.
    pub fn new(duration_s: f64, overlap: f64, fs: f64) -> Result<Self, WindowError> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(WindowError::InvalidSampleRate(fs));
        }
        if !(0.0..1.0).contains(&overlap) {
            return Err(WindowError::InvalidSpec(format!("overlap {overlap} outside [0, 1)")));
        }
        if !(duration_s.is_finite() && duration_s > 0.0) {
            return Err(WindowError::InvalidSpec(format!("duration {duration_s} must be positive")));
        }
        let len = (duration_s * fs).round() as usize;
        let hop = (((1.0 - overlap) * len as f64).round() as usize).max(1);
        let spec = Self {
            duration_s,
            overlap,
            len,
            hop,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Spec given directly in samples.
    pub fn from_samples(len: usize, hop: usize) -> Result<Self, WindowError> {
        let spec = Self {
            duration_s: f64::NAN,
            overlap: if len > 0 { 1.0 - hop as f64 / len as f64 } else { 0.0 },
            len,
            hop,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), WindowError> {
        if self.len < 2 {
            return Err(WindowError::InvalidSpec(format!("window length {} < 2", self.len)));
        }
        if self.hop < 1 || self.hop > self.len {
            return Err(WindowError::InvalidSpec(format!(
                "hop {} outside 1..={}",
                self.hop, self.len
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn overlap(&self) -> f64 {
        self.overlap
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }

    /// Number of complete windows in a stream of `n` samples.
    pub fn count(&self, n: usize) -> usize {
        if n < self.len {
            0
        } else {
            (n - self.len) / self.hop + 1
        }
    }
}

/// Windows `x[kH .. kH + W)` for `k = 0 ..= (N - W) / H`.
pub fn segment<'a>(samples: &'a [f64], spec: &WindowSpec) -> Result<Vec<(usize, &'a [f64])>, WindowError> {
    if samples.len() < spec.len {
        return Err(WindowError::StreamTooShort {
            len: samples.len(),
            window: spec.len,
        });
    }
    Ok((0..spec.count(samples.len()))
        .map(|k| {
            let start = k * spec.hop;
            (k, &samples[start..start + spec.len])
        })
        .collect())
}

/// Indices of the label stream covered by window `k` of a stream sampled at `fs_signal`.
pub fn label_index_range(k: usize, spec: &WindowSpec, fs_signal: f64) -> Range<usize> {
    let scale = LABEL_RATE_HZ / fs_signal;
    let start_sample = (k * spec.hop) as f64;
    let start = (start_sample * scale).round() as usize;
    let end = ((start_sample + spec.len as f64) * scale).round() as usize;
    start..end.max(start + 1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LabelVote {
    Accepted { label: AffectClass, purity: f64 },
    Rejected(RejectReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    LowPurity,
    NonTargetMajority,
    Tie,
}

/// Majority code of `labels`. Purity is measured against the whole range,
/// non-target codes included.
pub fn majority_label(labels: &[i64], rho: f64) -> Result<LabelVote, WindowError> {
    if labels.is_empty() {
        return Err(WindowError::EmptyRange);
    }
    let mut counts: Vec<(i64, usize)> = Vec::new();
    for &code in labels {
        match counts.iter_mut().find(|(c, _)| *c == code) {
            Some((_, n)) => *n += 1,
            None => counts.push((code, 1)),
        }
    }
    let top = counts.iter().map(|&(_, n)| n).max().expect("nonempty");
    let leaders: Vec<i64> = counts.iter().filter(|&&(_, n)| n == top).map(|&(c, _)| c).collect();
    if leaders.len() > 1 {
        return Ok(LabelVote::Rejected(RejectReason::Tie));
    }
    let Some(label) = AffectClass::from_code(leaders[0]) else {
        return Ok(LabelVote::Rejected(RejectReason::NonTargetMajority));
    };
    let purity = top as f64 / labels.len() as f64;
    if purity < rho {
        return Ok(LabelVote::Rejected(RejectReason::LowPurity));
    }
    Ok(LabelVote::Accepted { label, purity })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub subject_id: String,
    pub modality: Modality,
    pub index: usize,
    pub samples: Vec<f64>,
    pub label: AffectClass,
    pub purity: f64,
}

/// Windows of one record that pass the purity vote, plus how many did not.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Labeling {
    pub windows: Vec<LabeledWindow>,
    pub rejected: usize,
    /// Windows whose label range runs past the end of the label stream.
    pub unlabeled: usize,
}

pub fn label_windows(record: &SignalRecord, labels: &[i64], spec: &WindowSpec, rho: f64) -> Result<Labeling, WindowError> {
    let mut out = Labeling::default();
    for (k, samples) in segment(&record.samples, spec)? {
        let range = label_index_range(k, spec, record.fs);
        if range.end > labels.len() {
            out.unlabeled += 1;
            continue;
        }
        match majority_label(&labels[range], rho)? {
            LabelVote::Accepted { label, purity } => out.windows.push(LabeledWindow {
                subject_id: record.subject_id.clone(),
                modality: record.modality,
                index: k,
                samples: samples.to_vec(),
                label,
                purity,
            }),
            LabelVote::Rejected(_) => out.rejected += 1,
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_count_and_last_start() {
        let x: Vec<f64> = (0..700).map(|i| i as f64).collect();
        let spec = WindowSpec::from_samples(256, 64).unwrap();
        let w = segment(&x, &spec).unwrap();
        assert_eq!(w.len(), 7);
        assert_eq!(w[6].1[0], 384.0);
        assert!(w.iter().all(|(_, s)| s.len() == 256));
    }

    #[test]
    fn hop_from_overlap() {
        let spec = WindowSpec::new(4.0, 0.75, 64.0).unwrap();
        assert_eq!(spec.len(), 256);
        assert_eq!(spec.hop(), 64);
    }

    #[test]
    fn too_short() {
        let spec = WindowSpec::from_samples(256, 64).unwrap();
        assert_eq!(
            segment(&[0.0; 100], &spec),
            Err(WindowError::StreamTooShort { len: 100, window: 256 })
        );
    }

    #[test]
    fn invalid_specs() {
        assert!(WindowSpec::from_samples(1, 1).is_err());
        assert!(WindowSpec::from_samples(8, 0).is_err());
        assert!(WindowSpec::from_samples(8, 9).is_err());
        assert!(WindowSpec::new(1.0, 1.0, 64.0).is_err());
        assert!(WindowSpec::new(1.0, -0.1, 64.0).is_err());
    }

    #[test]
    fn label_ranges() {
        let s = WindowSpec::from_samples(256, 100).unwrap();
        assert_eq!(label_index_range(1, &s, 700.0), 100..356);
        let s = WindowSpec::from_samples(70, 10).unwrap();
        assert_eq!(label_index_range(1, &s, 70.0), 100..800);
        let s = WindowSpec::from_samples(256, 64).unwrap();
        assert_eq!(label_index_range(1, &s, 64.0), 700..3500);
    }

    #[test]
    fn votes() {
        assert_eq!(
            majority_label(&[2; 10], 0.9).unwrap(),
            LabelVote::Accepted { label: AffectClass::Stress, purity: 1.0 }
        );
        let mixed: Vec<i64> = [1; 6].into_iter().chain([2; 4]).collect();
        assert_eq!(majority_label(&mixed, 0.9).unwrap(), LabelVote::Rejected(RejectReason::LowPurity));
        let mostly: Vec<i64> = [3; 95].into_iter().chain([0; 5]).collect();
        assert_eq!(
            majority_label(&mostly, 0.9).unwrap(),
            LabelVote::Accepted { label: AffectClass::Amusement, purity: 0.95 }
        );
        assert_eq!(majority_label(&[1, 2], 0.1).unwrap(), LabelVote::Rejected(RejectReason::Tie));
        assert_eq!(
            majority_label(&[0, 0, 0, 1], 0.5).unwrap(),
            LabelVote::Rejected(RejectReason::NonTargetMajority)
        );
        assert_eq!(majority_label(&[], 0.9), Err(WindowError::EmptyRange));
    }

    #[test]
    fn names_round_trip() {
        for m in Modality::ALL {
            assert_eq!(m.as_str().parse::<Modality>().unwrap(), m);
        }
        for s in Sensor::ALL {
            assert_eq!(s.as_str().parse::<Sensor>().unwrap(), s);
        }
        assert!("TEMP".parse::<Modality>().is_err());
    }

    #[test]
    fn labeling_drops_overrun_and_impure_windows() {
        let rec = SignalRecord::new("S1", Modality::Ecg, 700.0, vec![0.0; 1000]).unwrap();
        let spec = WindowSpec::from_samples(200, 100).unwrap();
        let mut labels = vec![1i64; 500];
        labels.extend(vec![2i64; 400]);
        let out = label_windows(&rec, &labels, &spec, 0.9).unwrap();
        // 9 windows; k=8 needs labels up to 1000 > 900.
        assert_eq!(out.unlabeled, 1);
        assert_eq!(out.windows.len() + out.rejected + out.unlabeled, 9);
        assert!(out.windows.iter().all(|w| w.purity >= 0.9));
        assert_eq!(out.windows.iter().find(|w| w.index == 0).unwrap().label, AffectClass::Baseline);
    }
}
