//! Held-out evaluation of decision-level fusion against the feature-level baselines.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::extract::FeatureStore;
use super::train::{join_windows, team_features, team_label, ModelStore, Split};
use super::PipelineError;
use crate::fusion::{enumerate_teams, fuse, FusionAudit, SspOutput, Team};
use crate::metrics::{accuracy, confusion_matrix, macro_f1};
use crate::windowing::{AffectClass, Sensor};

/// Differences in accuracy at or below this count as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub windows: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    /// `confusion[truth][prediction]`, classes in baseline/stress/amusement order.
    pub confusion: Vec<Vec<usize>>,
}

impl Scores {
    fn from_pairs(pairs: &[(usize, usize)]) -> Option<Self> {
        if pairs.is_empty() {
            return None;
        }
        let (truth, pred): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
        let c = AffectClass::COUNT;
        Some(Self {
            windows: pairs.len(),
            accuracy: accuracy(&pred, &truth).ok()?,
            macro_f1: macro_f1(&pred, &truth, c).ok()?,
            confusion: confusion_matrix(&pred, &truth, c).ok()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectScore {
    pub subject: String,
    pub decision_accuracy: Option<f64>,
    pub feature_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamResult {
    pub team: Team,
    pub size: usize,
    pub decision: Option<Scores>,
    pub feature: Option<Scores>,
    pub per_subject: Vec<SubjectScore>,
    /// Windows whose fused weights all vanished.
    pub fallback_windows: usize,
    /// Mean single-sensor accuracy of the members.
    pub member_mean_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub size: usize,
    pub teams: usize,
    pub mean_decision: Option<f64>,
    pub std_decision: Option<f64>,
    pub mean_feature: Option<f64>,
    pub std_feature: Option<f64>,
}

/// Decision-vs-feature comparison counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub unit: String,
    pub decision_better: usize,
    pub equal: usize,
    pub feature_better: usize,
    pub total: usize,
    pub pct_decision_better: f64,
    pub pct_equal: f64,
    pub pct_feature_better: f64,
}

impl Tally {
    fn from_pairs(unit: &str, pairs: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let (mut b, mut e, mut w) = (0, 0, 0);
        for (d, f) in pairs {
            if d - f > TIE_TOLERANCE {
                b += 1;
            } else if f - d > TIE_TOLERANCE {
                w += 1;
            } else {
                e += 1;
            }
        }
        let total = b + e + w;
        let pct = |x: usize| if total == 0 { 0.0 } else { 100.0 * x as f64 / total as f64 };
        Self {
            unit: unit.into(),
            decision_better: b,
            equal: e,
            feature_better: w,
            total,
            pct_decision_better: pct(b),
            pct_equal: pct(e),
            pct_feature_better: pct(w),
        }
    }

    /// Share of comparisons where decision fusion is at least as accurate.
    pub fn pct_decision_not_worse(&self) -> f64 {
        self.pct_decision_better + self.pct_equal
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: PipelineConfig,
    pub splits: Vec<Split>,
    pub teams: Vec<TeamResult>,
    pub sizes: Vec<SizeSummary>,
    /// One case per (team, test subject).
    pub cases: Tally,
    /// One case per team, on pooled test windows.
    pub team_cases: Tally,
    pub conventions: Vec<String>,
    pub robustness: Option<Robustness>,
}

impl EvalReport {
    pub fn team(&self, team: &Team) -> Option<&TeamResult> {
        self.teams.iter().find(|t| &t.team == team)
    }

    /// Result for the team of every configured sensor.
    pub fn full_team(&self) -> Option<&TeamResult> {
        self.teams.iter().max_by_key(|t| t.size)
    }
}

const CONVENTIONS: [&str; 5] = [
    "macro F1 averages all three classes; a class with no true positives (including one absent from both predictions and truths) scores 0",
    "decision weights are (1 - H/ln 3)^F1 with 0^0 = 1; if all weights vanish the team falls back to the plain mean",
    "cases: one decision-vs-feature comparison per (team, test subject); ties within 1e-12",
    "per-size std is the population standard deviation over the teams of that size",
    "single-sensor teams use the sensor's own predictor for both columns",
];

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (Some(mean), Some(var.sqrt()))
}

#[derive(Default)]
struct TeamPredictions {
    /// (subject, truth, prediction)
    decision: Vec<(String, usize, usize)>,
    feature: Vec<(String, usize, usize)>,
    fallback: usize,
}

fn per_subject_accuracy(rows: &[(String, usize, usize)]) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (s, t, p) in rows {
        let e = counts.entry(s.clone()).or_default();
        e.0 += (t == p) as usize;
        e.1 += 1;
    }
    counts.into_iter().map(|(s, (h, n))| (s, h as f64 / n as f64)).collect()
}

/// Predicts every test window of one fold for every team.
fn predict_fold(
    models: &ModelStore,
    store: &FeatureStore,
    teams: &[Team],
    preds: &mut [TeamPredictions],
    audit: &mut Vec<FusionAudit>,
) -> Result<(), PipelineError> {
    let test_rows: Vec<_> = store
        .rows
        .iter()
        .filter(|r| models.split.test.contains(&r.subject))
        .cloned()
        .collect();
    let joined = join_windows(&test_rows);

    for ((subject, window), rows) in &joined {
        assert!(models.split.test.contains(subject), "non-test subject {subject} in evaluation");
        let mut outputs: BTreeMap<Sensor, SspOutput> = BTreeMap::new();
        for (&sensor, row) in rows {
            if let Some(model) = models.ssp.get(&sensor) {
                outputs.insert(
                    sensor,
                    SspOutput {
                        sensor,
                        p: model.predict_proba(&row.features)?,
                        f1: model.f1,
                    },
                );
            }
        }
        for (team, pred) in teams.iter().zip(preds.iter_mut()) {
            // Absent members are dropped from the decision team.
            let present: Vec<Sensor> = team.members().iter().copied().filter(|s| outputs.contains_key(s)).collect();
            if let Some(truth) = team_label(rows, &present) {
                let members: Vec<SspOutput> = present.iter().map(|s| outputs[s].clone()).collect();
                let decision = fuse(&members)?;
                pred.fallback += decision.fallback as usize;
                pred.decision.push((subject.clone(), truth.index(), decision.argmax()));
                audit.push(FusionAudit::new(subject, *window, &members, &decision));
            }
            if let (Some((x, truth)), Some(model)) = (team_features(rows, team), models.feature_model(team)) {
                let p = model.predict_proba(&x)?;
                pred.feature.push((subject.clone(), truth.index(), p.argmax()));
            }
        }
    }
    Ok(())
}

/// Scores every team over the test subjects of all folds.
pub fn run_evaluate(
    cfg: &PipelineConfig,
    folds: &[ModelStore],
    store: &FeatureStore,
) -> Result<(EvalReport, Vec<FusionAudit>), PipelineError> {
    let teams = enumerate_teams(&cfg.sensor_set(), None)?;
    let mut preds: Vec<TeamPredictions> = teams.iter().map(|_| TeamPredictions::default()).collect();
    let mut audit = Vec::new();
    for fold in folds {
        predict_fold(fold, store, &teams, &mut preds, &mut audit)?;
    }

    let strip = |v: &[(String, usize, usize)]| -> Vec<(usize, usize)> { v.iter().map(|(_, t, p)| (*t, *p)).collect() };
    let mut results: Vec<TeamResult> = teams
        .iter()
        .zip(&preds)
        .map(|(team, p)| {
            let d_sub = per_subject_accuracy(&p.decision);
            let f_sub = per_subject_accuracy(&p.feature);
            let mut subjects: Vec<&String> = d_sub.keys().chain(f_sub.keys()).collect();
            subjects.sort();
            subjects.dedup();
            TeamResult {
                team: team.clone(),
                size: team.len(),
                decision: Scores::from_pairs(&strip(&p.decision)),
                feature: Scores::from_pairs(&strip(&p.feature)),
                per_subject: subjects
                    .into_iter()
                    .map(|s| SubjectScore {
                        subject: s.clone(),
                        decision_accuracy: d_sub.get(s).copied(),
                        feature_accuracy: f_sub.get(s).copied(),
                    })
                    .collect(),
                fallback_windows: p.fallback,
                member_mean_accuracy: None,
            }
        })
        .collect();

    let singleton: BTreeMap<Sensor, f64> = results
        .iter()
        .filter(|r| r.size == 1)
        .filter_map(|r| Some((r.team.members()[0], r.decision.as_ref()?.accuracy)))
        .collect();
    for r in &mut results {
        let accs: Option<Vec<f64>> = r.team.members().iter().map(|s| singleton.get(s).copied()).collect();
        r.member_mean_accuracy = accs.map(|a| a.iter().sum::<f64>() / a.len() as f64);
    }

    let max_size = teams.iter().map(Team::len).max().unwrap_or(0);
    let sizes = (1..=max_size)
        .map(|size| {
            let of_size: Vec<&TeamResult> = results.iter().filter(|r| r.size == size).collect();
            let d: Vec<f64> = of_size.iter().filter_map(|r| Some(r.decision.as_ref()?.accuracy)).collect();
            let f: Vec<f64> = of_size.iter().filter_map(|r| Some(r.feature.as_ref()?.accuracy)).collect();
            let (mean_decision, std_decision) = mean_std(&d);
            let (mean_feature, std_feature) = mean_std(&f);
            SizeSummary {
                size,
                teams: of_size.len(),
                mean_decision,
                std_decision,
                mean_feature,
                std_feature,
            }
        })
        .collect();

    let cases = Tally::from_pairs(
        "(team, test subject)",
        results.iter().flat_map(|r| {
            r.per_subject
                .iter()
                .filter_map(|s| Some((s.decision_accuracy?, s.feature_accuracy?)))
        }),
    );
    let team_cases = Tally::from_pairs(
        "team",
        results
            .iter()
            .filter_map(|r| Some((r.decision.as_ref()?.accuracy, r.feature.as_ref()?.accuracy))),
    );

    let report = EvalReport {
        config: cfg.clone(),
        splits: folds.iter().map(|f| f.split.clone()).collect(),
        teams: results,
        sizes,
        cases,
        team_cases,
        conventions: CONVENTIONS.iter().map(|s| s.to_string()).collect(),
        robustness: None,
    };
    Ok((report, audit))
}

/// Full-team accuracy on clean and on corrupted test features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Robustness {
    pub corrupted_sensor: Sensor,
    pub clean_decision: f64,
    pub noisy_decision: f64,
    pub clean_feature: f64,
    pub noisy_feature: f64,
    pub decision_drop: f64,
    pub feature_drop: f64,
}

impl Robustness {
    pub fn compare(sensor: Sensor, clean: &EvalReport, noisy: &EvalReport) -> Option<Self> {
        let acc = |r: &EvalReport| -> Option<(f64, f64)> {
            let t = r.full_team()?;
            Some((t.decision.as_ref()?.accuracy, t.feature.as_ref()?.accuracy))
        };
        let (cd, cf) = acc(clean)?;
        let (nd, nf) = acc(noisy)?;
        Some(Self {
            corrupted_sensor: sensor,
            clean_decision: cd,
            noisy_decision: nd,
            clean_feature: cf,
            noisy_feature: nf,
            decision_drop: cd - nd,
            feature_drop: cf - nf,
        })
    }
}
