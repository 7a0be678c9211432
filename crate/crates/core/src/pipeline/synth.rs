//! Seeded synthetic corpus in the ingestion layout.
//!
//! Every subject cycles through contiguous condition blocks. In each block a
//! sensor carries a class-specific tone (see [`class_tones`]) over a fixed
//! sensor-specific carrier and pink noise, with per-subject gain and small
//! frequency jitter.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ingest::{write_subject, IngestionError, SubjectData};
use super::seeds;
use crate::windowing::{AffectClass, Modality, Sensor, LABEL_RATE_HZ};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub subjects: usize,
    /// Length of one condition block.
    pub block_seconds: f64,
    /// Blocks per class; each repeat visits the three classes in shuffled order.
    pub repeats: usize,
    pub tone_amplitude: f64,
    /// Standard deviation of the pink noise floor.
    pub noise_std: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            subjects: 15,
            block_seconds: 120.0,
            repeats: 2,
            tone_amplitude: 1.0,
            noise_std: 1.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.subjects == 0 || self.repeats == 0 {
            return Err("subjects and repeats must be positive".into());
        }
        if !(self.block_seconds.is_finite() && self.block_seconds > 0.0) {
            return Err("block_seconds must be positive".into());
        }
        if !(self.tone_amplitude.is_finite() && self.tone_amplitude >= 0.0) {
            return Err("tone_amplitude must be nonnegative".into());
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err("noise_std must be nonnegative".into());
        }
        Ok(())
    }

    pub fn duration_seconds(&self) -> f64 {
        self.block_seconds * (3 * self.repeats) as f64
    }
}

/// Sampling rate used for each synthetic channel.
pub fn synthetic_rate(m: Modality) -> f64 {
    match m {
        Modality::Ecg | Modality::Emg | Modality::Bvp => 64.0,
        Modality::Eda | Modality::AccX | Modality::AccY | Modality::AccZ => 32.0,
    }
}

/// Tone frequency (Hz) for baseline, stress and amusement.
pub fn class_tones(sensor: Sensor) -> [f64; 3] {
    match sensor {
        Sensor::Ecg => [2.0, 8.0, 15.0],
        Sensor::Emg => [3.0, 10.0, 20.0],
        Sensor::Bvp => [1.5, 6.0, 12.0],
        Sensor::Eda => [1.0, 4.0, 9.0],
        Sensor::Acc => [2.5, 5.0, 11.0],
    }
}

fn carrier(sensor: Sensor) -> f64 {
    match sensor {
        Sensor::Ecg => 1.2,
        Sensor::Emg => 25.0,
        Sensor::Bvp => 1.0,
        Sensor::Eda => 0.3,
        Sensor::Acc => 0.8,
    }
}

/// Unit-variance pink noise (Kellet's refined filter over white noise).
pub fn pink_noise<R: Rng>(len: usize, rng: &mut R) -> Vec<f64> {
    let mut b = [0.0f64; 7];
    let raw: Vec<f64> = (0..len)
        .map(|_| {
            let w: f64 = StandardNormal.sample(rng);
            b[0] = 0.99886 * b[0] + w * 0.0555179;
            b[1] = 0.99332 * b[1] + w * 0.0750759;
            b[2] = 0.96900 * b[2] + w * 0.1538520;
            b[3] = 0.86650 * b[3] + w * 0.3104856;
            b[4] = 0.55000 * b[4] + w * 0.5329522;
            b[5] = -0.7616 * b[5] - w * 0.0168980;
            let out = b.iter().sum::<f64>() + w * 0.5362;
            b[6] = w * 0.115926;
            out
        })
        .collect();
    let n = len.max(1) as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let sd = (raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let sd = if sd > 0.0 { sd } else { 1.0 };
    raw.iter().map(|v| (v - mean) / sd).collect()
}

pub fn subject_id(index: usize) -> String {
    format!("S{:02}", index + 1)
}

/// Condition code of every block, in time order.
pub fn block_schedule<R: Rng>(cfg: &SynthConfig, rng: &mut R) -> Vec<AffectClass> {
    let mut out = Vec::with_capacity(3 * cfg.repeats);
    for _ in 0..cfg.repeats {
        let mut classes = AffectClass::ALL;
        classes.shuffle(rng);
        out.extend(classes);
    }
    out
}

/// The class-bearing signal of one sensor, sampled at `fs`.
fn sensor_signal<R: Rng>(cfg: &SynthConfig, sensor: Sensor, schedule: &[AffectClass], fs: f64, rng: &mut R) -> Vec<f64> {
    let n = (cfg.duration_seconds() * fs).round() as usize;
    let gain = rng.random_range(0.7..1.4);
    let jitter: Vec<f64> = (0..3).map(|_| rng.random_range(0.95..1.05)).collect();
    let phases: Vec<f64> = schedule.iter().map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let tones = class_tones(sensor);
    let carrier_f = carrier(sensor);
    let noise = pink_noise(n, rng);
    (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let block = ((t / cfg.block_seconds) as usize).min(schedule.len() - 1);
            let c = schedule[block].index();
            let tone = (2.0 * PI * tones[c] * jitter[c] * t + phases[block]).sin();
            let base = 0.5 * (2.0 * PI * carrier_f * t).sin();
            gain * (cfg.tone_amplitude * tone + base + cfg.noise_std * noise[i])
        })
        .collect()
}

/// One synthetic subject; a pure function of `(cfg, seed, index)`.
pub fn generate_subject(cfg: &SynthConfig, seed: u64, index: usize) -> SubjectData {
    let id = subject_id(index);
    let mut rng = seeds::stream(seed, &format!("synth/{id}"));
    let schedule = block_schedule(cfg, &mut rng);

    let n_labels = (cfg.duration_seconds() * LABEL_RATE_HZ).round() as usize;
    let labels = (0..n_labels)
        .map(|i| {
            let block = ((i as f64 / LABEL_RATE_HZ / cfg.block_seconds) as usize).min(schedule.len() - 1);
            schedule[block].code()
        })
        .collect();

    let mut data = SubjectData {
        id,
        labels,
        ..Default::default()
    };
    for sensor in Sensor::ALL {
        let fs = synthetic_rate(sensor.channels()[0]);
        let v = sensor_signal(cfg, sensor, &schedule, fs, &mut rng);
        match sensor {
            Sensor::Acc => {
                // Gravity on z; the motion component mostly along z as well.
                let axes = [(Modality::AccX, 0.0, 0.3), (Modality::AccY, 0.0, 0.2), (Modality::AccZ, 9.81, 0.9)];
                for (m, offset, share) in axes {
                    let jitter = pink_noise(v.len(), &mut rng);
                    let stream = v.iter().zip(&jitter).map(|(x, e)| offset + share * x + 0.05 * e).collect();
                    data.rates.insert(m, fs);
                    data.streams.insert(m, stream);
                }
            }
            _ => {
                let m = sensor.channels()[0];
                data.rates.insert(m, fs);
                data.streams.insert(m, v);
            }
        }
    }
    data
}

/// Writes `cfg.subjects` subjects under `out_dir`.
pub fn generate_corpus(cfg: &SynthConfig, seed: u64, out_dir: &Path) -> Result<Vec<PathBuf>, IngestionError> {
    (0..cfg.subjects)
        .map(|i| write_subject(out_dir, &generate_subject(cfg, seed, i)))
        .collect()
}
