//! Decision-level fusion over sensor teams, and the feature-level baseline input.
//!
//! Each member contributes its class distribution `P_i` with weight
//! `w_i = (1 - H~(P_i))^F1_i`, where `H~` is Shannon entropy divided by
//! `ln |C|`. The team distribution is the weighted mean with `gamma = sum w_i`.
//! `0^0` is taken as 1, so a maximally uncertain member with zero confidence
//! still counts with unit weight.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distribution::{ClassDistribution, DistributionError};
use crate::windowing::Sensor;

/// Below this total weight the team falls back to an unweighted mean.
pub const MIN_TOTAL_WEIGHT: f64 = 1e-12;

/// Certainty `1 - H~` at or below this is treated as exactly zero, so rounding
/// in the entropy of a uniform vector cannot leave a residual weight.
pub const CERTAINTY_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("team has no members")]
    EmptyTeam,
    #[error("invalid member distribution: {0}")]
    InvalidDistribution(#[from] DistributionError),
    #[error("member {sensor} has {got} classes, expected {expected}")]
    ClassCountMismatch { sensor: Sensor, expected: usize, got: usize },
    #[error("confidence {0} outside [0, 1]")]
    InvalidConfidence(f64),
    #[error("team size {size} outside 1..={n}")]
    SizeOutOfRange { size: usize, n: usize },
    #[error("duplicate team member {0}")]
    DuplicateMember(Sensor),
    #[error("feature vector for {0} is missing")]
    MissingModality(Sensor),
}

/// A nonempty set of sensors, kept in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<Sensor>", into = "Vec<Sensor>")]
pub struct Team(Vec<Sensor>);

impl Team {
    pub fn new(members: Vec<Sensor>) -> Result<Self, FusionError> {
        if members.is_empty() {
            return Err(FusionError::EmptyTeam);
        }
        let mut seen = BTreeSet::new();
        for &m in &members {
            if !seen.insert(m) {
                return Err(FusionError::DuplicateMember(m));
            }
        }
        Ok(Self(seen.into_iter().collect()))
    }

    pub fn members(&self) -> &[Sensor] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, sensor: Sensor) -> bool {
        self.0.contains(&sensor)
    }

    /// Members joined by `+`, e.g. `ECG+EDA`.
    pub fn label(&self) -> String {
        self.0.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("+")
    }
}

impl fmt::Display for Team {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl TryFrom<Vec<Sensor>> for Team {
    type Error = FusionError;

    fn try_from(v: Vec<Sensor>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<Team> for Vec<Sensor> {
    fn from(t: Team) -> Self {
        t.0
    }
}

/// All teams of `size` members (every nonempty team when `None`), by size and
/// then lexicographically over the canonical sensor order.
pub fn enumerate_teams(sensors: &[Sensor], size: Option<usize>) -> Result<Vec<Team>, FusionError> {
    let pool: Vec<Sensor> = Team::new(sensors.to_vec())?.0;
    let n = pool.len();
    let sizes: Vec<usize> = match size {
        Some(s) if s == 0 || s > n => return Err(FusionError::SizeOutOfRange { size: s, n }),
        Some(s) => vec![s],
        None => (1..=n).collect(),
    };
    let mut teams = Vec::new();
    for k in sizes {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            teams.push(Team(idx.iter().map(|&i| pool[i]).collect()));
            // Advance to the next k-combination in lexicographic order.
            let Some(pos) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
                break;
            };
            idx[pos] += 1;
            for j in pos + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    Ok(teams)
}

/// `-sum p ln p / ln |C|`, clamped to `[0, 1]`.
pub fn normalized_entropy(p: &ClassDistribution) -> f64 {
    let h: f64 = p
        .probs()
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.ln())
        .sum();
    (h / (p.classes() as f64).ln()).clamp(0.0, 1.0)
}

/// One single-sensor prediction: a class distribution and the model's fixed confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SspOutput {
    pub sensor: Sensor,
    pub p: ClassDistribution,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamDecision {
    pub p: ClassDistribution,
    pub members: Vec<Sensor>,
    pub entropies: Vec<f64>,
    pub weights: Vec<f64>,
    pub gamma: f64,
    /// True when all weights vanished and `p` is the plain member mean.
    pub fallback: bool,
}

impl TeamDecision {
    pub fn argmax(&self) -> usize {
        self.p.argmax()
    }
}

pub fn member_weight(p: &ClassDistribution, f1: f64) -> f64 {
    let certainty = 1.0 - normalized_entropy(p);
    if certainty <= CERTAINTY_FLOOR {
        return if f1 == 0.0 { 1.0 } else { 0.0 };
    }
    certainty.powf(f1)
}

pub fn fuse(outputs: &[SspOutput]) -> Result<TeamDecision, FusionError> {
    let first = outputs.first().ok_or(FusionError::EmptyTeam)?;
    let classes = first.p.classes();
    for o in outputs {
        if o.p.classes() != classes {
            return Err(FusionError::ClassCountMismatch {
                sensor: o.sensor,
                expected: classes,
                got: o.p.classes(),
            });
        }
        if !(0.0..=1.0).contains(&o.f1) {
            return Err(FusionError::InvalidConfidence(o.f1));
        }
    }

    let entropies: Vec<f64> = outputs.iter().map(|o| normalized_entropy(&o.p)).collect();
    let weights: Vec<f64> = outputs.iter().map(|o| member_weight(&o.p, o.f1)).collect();
    let gamma: f64 = weights.iter().sum();
    let fallback = gamma < MIN_TOTAL_WEIGHT;
    let (eff, norm): (Vec<f64>, f64) = if fallback {
        (vec![1.0; outputs.len()], outputs.len() as f64)
    } else {
        (weights.clone(), gamma)
    };
    let mut mix = vec![0.0; classes];
    for (o, w) in outputs.iter().zip(&eff) {
        for (m, p) in mix.iter_mut().zip(o.p.probs()) {
            *m += w * p;
        }
    }
    mix.iter_mut().for_each(|m| *m /= norm);

    Ok(TeamDecision {
        p: ClassDistribution::normalized(mix)?,
        members: outputs.iter().map(|o| o.sensor).collect(),
        entropies,
        weights,
        gamma,
        fallback,
    })
}

/// Concatenates the team's feature vectors in canonical sensor order.
pub fn feature_level_fuse(vectors: &[(Sensor, &[f64])], team: &Team) -> Result<Vec<f64>, FusionError> {
    let mut out = Vec::new();
    for &s in team.members() {
        let (_, v) = vectors
            .iter()
            .find(|(m, _)| *m == s)
            .ok_or(FusionError::MissingModality(s))?;
        out.extend_from_slice(v);
    }
    Ok(out)
}

/// One fused window, as written to the audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionAudit {
    pub subject: String,
    pub window: usize,
    pub team: String,
    pub members: Vec<Sensor>,
    pub member_p: Vec<Vec<f64>>,
    pub entropy: Vec<f64>,
    pub f1: Vec<f64>,
    pub weights: Vec<f64>,
    pub gamma: f64,
    pub p_team: Vec<f64>,
    pub fallback: bool,
}

impl FusionAudit {
    pub fn new(subject: &str, window: usize, outputs: &[SspOutput], decision: &TeamDecision) -> Self {
        Self {
            subject: subject.to_string(),
            window,
            team: decision.members.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("+"),
            members: decision.members.clone(),
            member_p: outputs.iter().map(|o| o.p.probs().to_vec()).collect(),
            entropy: decision.entropies.clone(),
            f1: outputs.iter().map(|o| o.f1).collect(),
            weights: decision.weights.clone(),
            gamma: decision.gamma,
            p_team: decision.p.probs().to_vec(),
            fallback: decision.fallback,
        }
    }
}

pub fn write_audit_jsonl<W: Write>(mut w: W, records: &[FusionAudit]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn out(sensor: Sensor, p: &[f64], f1: f64) -> SspOutput {
        SspOutput {
            sensor,
            p: ClassDistribution::new(p.to_vec()).unwrap(),
            f1,
        }
    }

    #[test]
    fn entropy_examples() {
        assert!((normalized_entropy(&ClassDistribution::uniform(3)) - 1.0).abs() < 1e-15);
        assert_eq!(normalized_entropy(&ClassDistribution::one_hot(3, 1)), 0.0);
        let h = normalized_entropy(&ClassDistribution::new(vec![0.5, 0.5, 0.0]).unwrap());
        assert!((h - 0.630929753571457).abs() < 1e-12);
    }

    #[test]
    fn one_hot_beats_uniform() {
        for f1 in [0.3, 0.7, 1.0] {
            let d = fuse(&[
                out(Sensor::Ecg, &[0.0, 1.0, 0.0], 1.0),
                out(Sensor::Eda, &[1.0 / 3.0; 3], f1),
            ])
            .unwrap();
            assert_eq!(d.p.probs(), &[0.0, 1.0, 0.0]);
            assert_eq!(d.weights[1], 0.0);
        }
    }

    #[test]
    fn zero_to_the_zero_is_one() {
        let d = fuse(&[out(Sensor::Ecg, &[1.0 / 3.0; 3], 0.0)]).unwrap();
        assert_eq!(d.weights, vec![1.0]);
        assert!(!d.fallback);
    }

    #[test]
    fn all_uncertain_falls_back() {
        let d = fuse(&[
            out(Sensor::Ecg, &[1.0 / 3.0; 3], 0.5),
            out(Sensor::Eda, &[1.0 / 3.0; 3], 0.9),
        ])
        .unwrap();
        assert!(d.fallback);
        assert_eq!(d.gamma, 0.0);
        assert_eq!(d.p, ClassDistribution::uniform(3));
    }

    #[test]
    fn errors() {
        assert_eq!(fuse(&[]), Err(FusionError::EmptyTeam));
        assert!(matches!(
            fuse(&[out(Sensor::Ecg, &[0.5, 0.5, 0.0], 1.5)]),
            Err(FusionError::InvalidConfidence(_))
        ));
        assert!(matches!(
            fuse(&[out(Sensor::Ecg, &[0.5, 0.5, 0.0], 1.0), out(Sensor::Eda, &[0.5, 0.5], 1.0)]),
            Err(FusionError::ClassCountMismatch { .. })
        ));
    }

    #[test]
    fn team_counts() {
        let all = Sensor::ALL;
        assert_eq!(enumerate_teams(&all, None).unwrap().len(), 31);
        assert_eq!(enumerate_teams(&all, Some(4)).unwrap().len(), 5);
        let singles = enumerate_teams(&all, Some(1)).unwrap();
        assert_eq!(singles.len(), 5);
        assert!(singles.iter().all(|t| t.len() == 1));
        assert_eq!(enumerate_teams(&all, Some(2)).unwrap().len(), 10);
        assert!(matches!(
            enumerate_teams(&all, Some(6)),
            Err(FusionError::SizeOutOfRange { size: 6, n: 5 })
        ));
        assert!(enumerate_teams(&all, Some(0)).is_err());
    }

    #[test]
    fn team_order_is_lexicographic() {
        let pairs = enumerate_teams(&[Sensor::Emg, Sensor::Ecg, Sensor::Eda], Some(2)).unwrap();
        let labels: Vec<String> = pairs.iter().map(Team::label).collect();
        assert_eq!(labels, ["ECG+EDA", "ECG+EMG", "EDA+EMG"]);
    }

    #[test]
    fn team_rejects_duplicates_and_sorts() {
        assert_eq!(
            Team::new(vec![Sensor::Ecg, Sensor::Ecg]),
            Err(FusionError::DuplicateMember(Sensor::Ecg))
        );
        let t = Team::new(vec![Sensor::Acc, Sensor::Ecg]).unwrap();
        assert_eq!(t.members(), &[Sensor::Ecg, Sensor::Acc]);
        assert_eq!(serde_json::to_string(&t).unwrap(), r#"["ECG","ACC"]"#);
    }

    #[test]
    fn feature_concatenation() {
        let a = [1.0, 2.0];
        let b = [3.0];
        let team = Team::new(vec![Sensor::Eda, Sensor::Ecg]).unwrap();
        let fwd = feature_level_fuse(&[(Sensor::Ecg, &a), (Sensor::Eda, &b)], &team).unwrap();
        let rev = feature_level_fuse(&[(Sensor::Eda, &b), (Sensor::Ecg, &a)], &team).unwrap();
        assert_eq!(fwd, vec![1.0, 2.0, 3.0]);
        assert_eq!(fwd, rev);
        assert_eq!(
            feature_level_fuse(&[(Sensor::Ecg, &a)], &team),
            Err(FusionError::MissingModality(Sensor::Eda))
        );
    }

    #[test]
    fn audit_lines() {
        let outs = [out(Sensor::Ecg, &[0.8, 0.1, 0.1], 1.0), out(Sensor::Bvp, &[0.4, 0.4, 0.2], 0.5)];
        let d = fuse(&outs).unwrap();
        let rec = FusionAudit::new("S2", 4, &outs, &d);
        let mut buf = Vec::new();
        write_audit_jsonl(&mut buf, &[rec.clone(), rec.clone()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        let back: FusionAudit = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(back, rec);
        assert_eq!(back.team, "ECG+BVP");
    }

    fn dist() -> impl Strategy<Value = ClassDistribution> {
        prop::collection::vec(0.0f64..1.0, 3)
            .prop_filter("nonzero", |v| v.iter().sum::<f64>() > 1e-6)
            .prop_map(|v| ClassDistribution::normalized(v).unwrap())
    }

    fn member() -> impl Strategy<Value = SspOutput> {
        (0usize..5, dist(), 0.0f64..=1.0).prop_map(|(s, p, f1)| SspOutput {
            sensor: Sensor::ALL[s],
            p,
            f1,
        })
    }

    proptest! {
        #[test]
        fn fused_is_a_distribution(team in prop::collection::vec(member(), 1..6)) {
            let d = fuse(&team).unwrap();
            prop_assert!(ClassDistribution::new(d.p.probs().to_vec()).is_ok());
            prop_assert!(d.weights.iter().all(|w| (0.0..=1.0).contains(w)));
        }

        #[test]
        fn agreeing_members_keep_argmax(team in prop::collection::vec(member(), 1..6), hot in 0usize..3) {
            let team: Vec<SspOutput> = team
                .into_iter()
                .map(|mut o| {
                    let mut p = o.p.probs().to_vec();
                    p[hot] += 2.0;
                    o.p = ClassDistribution::normalized(p).unwrap();
                    o
                })
                .collect();
            prop_assert_eq!(fuse(&team).unwrap().argmax(), hot);
        }
    }
}
