//! Subject-disjoint splits and training of the per-sensor and per-team models.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{PipelineConfig, SplitSpec};
use super::extract::{FeatureRow, FeatureStore};
use super::{seeds, PipelineError};
use crate::fusion::{enumerate_teams, feature_level_fuse, Team};
use crate::mlp::{train, Dataset, MlpHyper, MlpModel};
use crate::windowing::{AffectClass, Sensor};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl Split {
    fn assert_disjoint(&self) {
        for s in &self.train {
            assert!(!self.val.contains(s) && !self.test.contains(s), "subject {s} in two splits");
        }
        for s in &self.val {
            assert!(!self.test.contains(s), "subject {s} in two splits");
        }
    }
}

fn sorted_unique(subjects: &[String]) -> Vec<String> {
    let mut s = subjects.to_vec();
    s.sort();
    s.dedup();
    s
}

/// Shuffled subjects split `round(train n)` / `round(val n)` / remainder,
/// rounding halves to even (15 subjects give 10/2/3).
pub fn split_subjects(subjects: &[String], spec: &SplitSpec, seed: u64) -> Result<Split, PipelineError> {
    let mut pool = sorted_unique(subjects);
    let n = pool.len();
    let n_train = (spec.train * n as f64).round_ties_even() as usize;
    let n_val = (spec.val * n as f64).round_ties_even() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(PipelineError::InsufficientData(format!(
            "{n} subjects cannot fill a {}/{}/{} split",
            spec.train, spec.val, spec.test
        )));
    }
    pool.shuffle(&mut seeds::stream(seed, "split"));
    let mut split = Split {
        train: pool[..n_train].to_vec(),
        val: pool[n_train..n_train + n_val].to_vec(),
        test: pool[n_train + n_val..].to_vec(),
    };
    split.train.sort();
    split.val.sort();
    split.test.sort();
    split.assert_disjoint();
    Ok(split)
}

/// One split per subject, that subject being the test set. Validation takes
/// the `val / (train + val)` share of the rest.
pub fn loso_splits(subjects: &[String], spec: &SplitSpec, seed: u64) -> Result<Vec<Split>, PipelineError> {
    let all = sorted_unique(subjects);
    if all.len() < 3 {
        return Err(PipelineError::InsufficientData(format!(
            "leave-one-subject-out needs at least 3 subjects, got {}",
            all.len()
        )));
    }
    all.iter()
        .map(|held| {
            let mut rest: Vec<String> = all.iter().filter(|s| *s != held).cloned().collect();
            rest.shuffle(&mut seeds::stream(seed, &format!("loso/{held}")));
            let share = spec.val / (spec.train + spec.val);
            let n_val = ((share * rest.len() as f64).round() as usize).clamp(1, rest.len() - 1);
            let mut split = Split {
                val: rest[..n_val].to_vec(),
                train: rest[n_val..].to_vec(),
                test: vec![held.clone()],
            };
            split.train.sort();
            split.val.sort();
            split.assert_disjoint();
            Ok(split)
        })
        .collect()
}

/// Rows of one window, keyed by sensor.
pub type WindowRows<'a> = BTreeMap<Sensor, &'a FeatureRow>;

/// Groups rows by `(subject, window)`.
pub fn join_windows(rows: &[FeatureRow]) -> BTreeMap<(String, usize), WindowRows<'_>> {
    let mut out: BTreeMap<(String, usize), WindowRows<'_>> = BTreeMap::new();
    for r in rows {
        out.entry((r.subject.clone(), r.window)).or_default().insert(r.sensor, r);
    }
    out
}

/// The shared label of the given sensors' rows, if they all exist and agree.
pub fn team_label(rows: &WindowRows<'_>, members: &[Sensor]) -> Option<AffectClass> {
    let mut label = None;
    for m in members {
        let l = rows.get(m)?.label;
        if label.is_some_and(|x| x != l) {
            return None;
        }
        label = Some(l);
    }
    label
}

/// Concatenated team features of one window, if every member is present and labels agree.
pub fn team_features(rows: &WindowRows<'_>, team: &Team) -> Option<(Vec<f64>, AffectClass)> {
    let label = team_label(rows, team.members())?;
    let parts: Vec<(Sensor, &[f64])> = rows.iter().map(|(s, r)| (*s, r.features.as_slice())).collect();
    feature_level_fuse(&parts, team).ok().map(|f| (f, label))
}

fn sensor_dataset(store: &FeatureStore, sensor: Sensor, subjects: &[String]) -> Dataset {
    let mut d = Dataset::default();
    for r in store.rows.iter().filter(|r| r.sensor == sensor && subjects.contains(&r.subject)) {
        d.features.push(r.features.clone());
        d.labels.push(r.label.index());
    }
    d
}

fn team_dataset(joined: &BTreeMap<(String, usize), WindowRows<'_>>, team: &Team, subjects: &[String]) -> Dataset {
    let mut d = Dataset::default();
    for ((subject, _), rows) in joined {
        if !subjects.contains(subject) {
            continue;
        }
        if let Some((f, label)) = team_features(rows, team) {
            d.features.push(f);
            d.labels.push(label.index());
        }
    }
    d
}

/// Trained models for one split.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelStore {
    pub split: Split,
    pub ssp: BTreeMap<Sensor, MlpModel>,
    /// Feature-level baselines for teams of two or more sensors.
    pub feature: BTreeMap<Team, MlpModel>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    split: Split,
    ssp: Vec<Sensor>,
    feature: Vec<Team>,
}

impl ModelStore {
    /// The feature-level model of `team`; for a single sensor this is its predictor.
    pub fn feature_model(&self, team: &Team) -> Option<&MlpModel> {
        match team.members() {
            [s] => self.ssp.get(s),
            _ => self.feature.get(team),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), PipelineError> {
        let write = |name: String, text: String| {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|source| PipelineError::Io { path, source })
        };
        fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        for (s, m) in &self.ssp {
            write(format!("ssp_{s}.json"), m.to_json())?;
        }
        for (t, m) in &self.feature {
            write(format!("feature_{}.json", t.label()), m.to_json())?;
        }
        let manifest = Manifest {
            split: self.split.clone(),
            ssp: self.ssp.keys().copied().collect(),
            feature: self.feature.keys().cloned().collect(),
        };
        write("manifest.json".into(), serde_json::to_string_pretty(&manifest).expect("manifest serialises"))
    }

    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let read = |name: String| {
            let path = dir.join(name);
            fs::read_to_string(&path).map_err(|source| PipelineError::Io { path, source })
        };
        let manifest: Manifest = serde_json::from_str(&read("manifest.json".into())?).map_err(|e| PipelineError::Csv {
            path: dir.join("manifest.json"),
            message: e.to_string(),
        })?;
        let mut ssp = BTreeMap::new();
        for s in manifest.ssp {
            ssp.insert(s, MlpModel::from_json(&read(format!("ssp_{s}.json"))?)?);
        }
        let mut feature = BTreeMap::new();
        for t in manifest.feature {
            let m = MlpModel::from_json(&read(format!("feature_{}.json", t.label()))?)?;
            feature.insert(t, m);
        }
        Ok(Self {
            split: manifest.split,
            ssp,
            feature,
        })
    }
}

enum Job {
    Ssp(Sensor),
    Feature(Team),
}

/// Trains every model of one split. `tag` prefixes the seed stream names.
pub fn train_split(cfg: &PipelineConfig, store: &FeatureStore, split: Split, tag: &str) -> Result<ModelStore, PipelineError> {
    split.assert_disjoint();
    let sensors = cfg.sensor_set();
    let joined = join_windows(&store.rows);
    let mut jobs: Vec<Job> = sensors.iter().map(|&s| Job::Ssp(s)).collect();
    jobs.extend(
        enumerate_teams(&sensors, None)?
            .into_iter()
            .filter(|t| t.len() > 1)
            .map(Job::Feature),
    );

    let hyper_for = |name: &str| MlpHyper {
        seed: seeds::derive_seed(cfg.seed, &format!("{tag}mlp/{name}")),
        ..cfg.mlp.clone()
    };
    let trained = jobs
        .par_iter()
        .map(|job| {
            let (name, tr, va) = match job {
                Job::Ssp(s) => (
                    format!("ssp/{s}"),
                    sensor_dataset(store, *s, &split.train),
                    sensor_dataset(store, *s, &split.val),
                ),
                Job::Feature(t) => (
                    format!("feature/{}", t.label()),
                    team_dataset(&joined, t, &split.train),
                    team_dataset(&joined, t, &split.val),
                ),
            };
            let (model, f1) = train(&tr, &va, &hyper_for(&name)).map_err(|e| PipelineError::Training {
                model: name.clone(),
                source: e,
            })?;
            log::info!(
                "{tag}{name}: {} train / {} val windows, F1 {f1:.3}, best epoch {}",
                tr.len(),
                va.len(),
                model.summary.best_epoch
            );
            Ok(model)
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;

    let mut out = ModelStore {
        split,
        ssp: BTreeMap::new(),
        feature: BTreeMap::new(),
    };
    for (job, model) in jobs.into_iter().zip(trained) {
        match job {
            Job::Ssp(s) => out.ssp.insert(s, model),
            Job::Feature(t) => out.feature.insert(t, model),
        };
    }
    Ok(out)
}

/// One model store per fold: a single fold unless leave-one-subject-out is on.
pub fn run_train(cfg: &PipelineConfig, store: &FeatureStore) -> Result<Vec<ModelStore>, PipelineError> {
    let subjects = store.subjects();
    if cfg.split.loso {
        loso_splits(&subjects, &cfg.split, cfg.seed)?
            .into_iter()
            .map(|split| {
                let tag = format!("loso/{}/", split.test[0]);
                train_split(cfg, store, split, &tag)
            })
            .collect()
    } else {
        let split = split_subjects(&subjects, &cfg.split, cfg.seed)?;
        Ok(vec![train_split(cfg, store, split, "")?])
    }
}
