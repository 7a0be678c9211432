//! Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion and exits
//! nonzero if anything failed.
//!
//! Set `AFFECT_REAL_DATA` to an ingestion directory to run the real-data check;
//! `AFFECT_REAL_CONFIG` optionally points at a pipeline config for it.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use affect_core::bessel::{bessel_j0, BesselRoots};
use affect_core::distribution::ClassDistribution;
use affect_core::ewt::{build_filter_bank, decompose, otsu_threshold, BoundarySet, EwtConfig, OtsuError};
use affect_core::fbse::{fbse_forward, fbse_inverse, FbseAnalysis};
use affect_core::features::{mode_energy, mode_entropy};
use affect_core::fusion::{fuse, SspOutput};
use affect_core::mlp::{train, Dataset, MlpHyper, Network};
use affect_core::pipeline::{self, synth, PipelineConfig};
use affect_core::windowing::Sensor;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn rel_rmse(estimate: &[f64], reference: &[f64]) -> f64 {
    let err: f64 = estimate.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum();
    let norm: f64 = reference.iter().map(|b| b * b).sum();
    (err / norm).sqrt()
}

fn tone(f: f64, fs: f64, len: usize, phase: f64) -> Vec<f64> {
    (0..len).map(|n| (2.0 * PI * f * n as f64 / fs + phase).sin()).collect()
}

fn random_window(rng: &mut ChaCha8Rng, len: usize, fs: f64) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut x: Vec<f64> = (0..len).map(|_| 0.3 * normal.sample(rng)).collect();
    for _ in 0..rng.random_range(1..4) {
        let f = rng.random_range(0.5..fs / 2.5);
        let a = rng.random_range(0.5..2.0);
        let ph = rng.random_range(0.0..2.0 * PI);
        for (v, t) in x.iter_mut().zip(tone(f, fs, len, ph)) {
            *v += a * t;
        }
    }
    let offset = rng.random_range(-3.0..3.0);
    x.iter_mut().for_each(|v| *v += offset);
    x
}

fn fbse_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let fs = 64.0;
    let mut worst = 0.0f64;
    for i in 0..100 {
        let u = [64, 128, 256][i % 3];
        let x = random_window(&mut rng, u, fs);
        let spec = fbse_forward(&x, fs, FbseAnalysis::default()).unwrap();
        worst = worst.max(rel_rmse(&fbse_inverse(&spec).unwrap(), &x));
    }
    let mut max_offset = 0i64;
    for i in 0..20 {
        let u = [128, 256][i % 2];
        let f = rng.random_range(1.0..28.0);
        let x = tone(f, fs, u, rng.random_range(0.0..2.0 * PI));
        let peak = fbse_forward(&x, fs, FbseAnalysis::default()).unwrap().peak_order() as f64;
        let expected = 2.0 * f * u as f64 / fs;
        max_offset = max_offset.max((peak - expected).round().abs() as i64);
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-3 && max_offset <= 2 && elapsed < Duration::from_secs(30),
        format!("roundtrip rel RMSE max {worst:.2e}, tone peak offset max {max_offset}, {elapsed:.2?}"),
    )
}

/// `J0(x) = (1/pi) int_0^pi cos(x sin t) dt` by the trapezoid rule; the
/// integrand is periodic so the rule converges geometrically once `n > x`.
fn j0_integral(x: f64) -> f64 {
    let n = 2048;
    let h = PI / n as f64;
    let inner: f64 = (1..n).map(|k| (x * (k as f64 * h).sin()).cos()).sum();
    (inner + 0.5 * (1.0 + (x * PI.sin()).cos())) / n as f64
}

fn j0_power_series(x: f64) -> f64 {
    let q = -x * x / 4.0;
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Option<f64> {
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo * fhi > 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

fn bessel_roots() -> Outcome {
    let roots = BesselRoots::j0(256);
    let mut residual = 0.0f64;
    let mut deviation = 0.0f64;
    for (i, &r) in roots.as_slice().iter().enumerate() {
        let m = (i + 1) as f64;
        let centre = (m - 0.25) * PI;
        let oracle = if centre < 12.0 {
            bisect(j0_power_series, centre - 0.5, centre + 0.5)
        } else {
            bisect(j0_integral, centre - 0.5, centre + 0.5)
        };
        let Some(oracle) = oracle else {
            return Outcome::Fail(format!("oracle found no sign change around root {}", i + 1));
        };
        residual = residual.max(bessel_j0(r).abs()).max(j0_integral(r).abs());
        deviation = deviation.max((r - oracle).abs());
    }
    let b2 = roots.get(2).unwrap();
    verdict(
        residual <= 1e-10 && deviation <= 1e-9 && (b2 - 5.520078).abs() <= 1e-5,
        format!("256 roots, residual max {residual:.1e}, oracle deviation max {deviation:.1e}, beta_2 = {b2:.7}"),
    )
}

fn ls_tone_energy(x: &[f64], f: f64, fs: f64) -> f64 {
    let s = tone(f, fs, x.len(), 0.0);
    let c = tone(f, fs, x.len(), PI / 2.0);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let (ss, cc, sc) = (dot(&s, &s), dot(&c, &c), dot(&s, &c));
    let (xs, xc) = (dot(x, &s), dot(x, &c));
    let det = ss * cc - sc * sc;
    let a = (xs * cc - xc * sc) / det;
    let b = (xc * ss - xs * sc) / det;
    let fit: Vec<f64> = s.iter().zip(&c).map(|(p, q)| a * p + b * q).collect();
    dot(&fit, &fit)
}

fn ewt_frame() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut partition = 0.0f64;
    for i in 0..50 {
        let count = rng.random_range(1..7);
        let interior = loop {
            let mut w: Vec<f64> = (0..count).map(|_| rng.random_range(0.05..PI - 0.05)).collect();
            w.sort_by(f64::total_cmp);
            if w.windows(2).all(|p| p[1] - p[0] > 0.02) {
                break w;
            }
        };
        let set = BoundarySet::with_auto_xi(&interior).unwrap();
        let grid = [256, 4096][i % 2];
        let bank = build_filter_bank(&set, grid).unwrap();
        for m in 0..grid {
            let s: f64 = bank.responses().iter().map(|r| r[m] * r[m]).sum();
            partition = partition.max((s - 1.0).abs());
        }
    }

    let fs = 64.0;
    let cfg = EwtConfig::default();
    let mut recon = 0.0f64;
    for i in 0..100 {
        let u = [64, 128, 256][i % 3];
        let x = random_window(&mut rng, u, fs);
        let mean = x.iter().sum::<f64>() / u as f64;
        let demeaned: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let modes = decompose(&x, fs, &cfg).unwrap();
        recon = recon.max(rel_rmse(&modes.sum(), &demeaned));
    }

    let fs = 128.0;
    let x: Vec<f64> = tone(5.0, fs, 256, 0.3)
        .iter()
        .zip(tone(20.0, fs, 256, 1.1))
        .map(|(a, b)| a + b)
        .collect();
    let modes = decompose(&x, fs, &cfg).unwrap();
    let energies: Vec<f64> = modes.modes().iter().map(|m| m.iter().map(|v| v * v).sum()).collect();
    let dominant = |f: f64| {
        (0..modes.len())
            .max_by(|&a, &b| {
                ls_tone_energy(&modes.modes()[a], f, fs).total_cmp(&ls_tone_energy(&modes.modes()[b], f, fs))
            })
            .unwrap()
    };
    let (low, high) = (dominant(5.0), dominant(20.0));
    let purity_low = ls_tone_energy(&modes.modes()[low], 5.0, fs) / energies[low];
    let purity_high = ls_tone_energy(&modes.modes()[high], 20.0, fs) / energies[high];
    let separated = low != high;

    verdict(
        partition <= 1e-6 && recon <= 1e-2 && separated && purity_low >= 0.9 && purity_high >= 0.9,
        format!(
            "partition error {partition:.1e}, mode-sum rel RMSE max {recon:.1e}, \
             {} modes, purity 5 Hz {purity_low:.3} / 20 Hz {purity_high:.3}{}",
            modes.len(),
            if separated { "" } else { " (same mode)" }
        ),
    )
}

/// Smallest `t` in `(min, max]` maximising `n0 n1 (mu0 - mu1)^2 / n^2`,
/// compared as exact fractions.
fn otsu_oracle(values: &[u32]) -> Option<u32> {
    let lo = *values.iter().min()?;
    let hi = *values.iter().max()?;
    if values.len() < 2 || lo == hi {
        return None;
    }
    let mut best: Option<(u32, i128, i128)> = None;
    for t in lo + 1..=hi {
        let below: Vec<i128> = values.iter().filter(|&&v| v < t).map(|&v| v as i128).collect();
        let above: Vec<i128> = values.iter().filter(|&&v| v >= t).map(|&v| v as i128).collect();
        let (n0, n1) = (below.len() as i128, above.len() as i128);
        let (s0, s1): (i128, i128) = (below.iter().sum(), above.iter().sum());
        let d = s0 * n1 - s1 * n0;
        let (num, den) = (d * d, n0 * n1);
        let better = match best {
            None => true,
            Some((_, bn, bd)) => num * bd > bn * den,
        };
        if better {
            best = Some((t, num, den));
        }
    }
    best.map(|b| b.0)
}

fn otsu_equivalence() -> Outcome {
    fn visit(prefix: &mut Vec<u32>, next: u32, checked: &mut usize, mismatch: &mut Option<Vec<u32>>) {
        if mismatch.is_some() {
            return;
        }
        let got = otsu_threshold(prefix);
        let ok = match otsu_oracle(prefix) {
            Some(t) => got == Ok(t),
            None => matches!(got, Err(OtsuError::TooFewValues(_) | OtsuError::DegenerateInput)),
        };
        *checked += 1;
        if !ok {
            *mismatch = Some(prefix.clone());
            return;
        }
        if prefix.len() == 8 {
            return;
        }
        for v in next..=10 {
            prefix.push(v);
            visit(prefix, v, checked, mismatch);
            prefix.pop();
        }
    }
    let mut checked = 0;
    let mut mismatch = None;
    visit(&mut Vec::new(), 0, &mut checked, &mut mismatch);
    match mismatch {
        None => Outcome::Pass(format!("{checked} multisets agree")),
        Some(m) => Outcome::Fail(format!("disagreement on {m:?}")),
    }
}

fn feature_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let w = rng.random_range(2..2048);
        let c: f64 = rng.random_range(-10.0..10.0);
        let constant = vec![c; w];
        worst = worst.max((mode_energy(&constant) - c * c).abs());
        worst = worst.max((mode_entropy(&constant) - (w as f64).ln()).abs());

        let mut impulse = vec![0.0; w];
        impulse[rng.random_range(0..w)] = c;
        worst = worst.max(mode_entropy(&impulse).abs());

        let x: Vec<f64> = (0..w).map(|_| rng.random_range(-1.0..1.0)).collect();
        let k: f64 = rng.random_range(0.1..10.0);
        let scaled: Vec<f64> = x.iter().map(|v| k * v).collect();
        let e = mode_energy(&x);
        worst = worst.max((mode_energy(&scaled) - k * k * e).abs() / (k * k * e).max(1.0));
        worst = worst.max((mode_entropy(&scaled) - mode_entropy(&x)).abs());
    }
    verdict(worst <= 1e-9, format!("max deviation {worst:.1e} over 200 draws"))
}

/// Mean cross-entropy plus `l2/2 * sum W^2`, evaluated layer by layer.
fn reference_loss(net: &Network, xs: &[Vec<f64>], ys: &[usize], l2: f64) -> f64 {
    let layers = net.layers();
    let mut total = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let mut a = x.clone();
        for (i, layer) in layers.iter().enumerate() {
            let mut z = layer.bias.clone();
            for (o, zo) in z.iter_mut().enumerate() {
                for (j, aj) in a.iter().enumerate() {
                    *zo += layer.weights[o * layer.inputs + j] * aj;
                }
            }
            a = if i + 1 < layers.len() { z.iter().map(|v| v.max(0.0)).collect() } else { z };
        }
        let max = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + a.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - a[y];
    }
    let sq: f64 = layers.iter().flat_map(|l| &l.weights).map(|w| w * w).sum();
    total / xs.len() as f64 + 0.5 * l2 * sq
}

fn blobs(rng: &mut ChaCha8Rng, per_class: usize) -> Dataset {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let centres = [[3.0, 0.0, 0.0, 1.0], [0.0, 3.0, 0.0, -1.0], [0.0, 0.0, 3.0, 0.0]];
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (c, centre) in centres.iter().enumerate() {
        for _ in 0..per_class {
            features.push(centre.iter().map(|m| m + normal.sample(rng)).collect());
            labels.push(c);
        }
    }
    Dataset::new(features, labels)
}

fn mlp_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut net = Network::he_init(&[6, 4, 3], &mut rng);
    let xs: Vec<Vec<f64>> = (0..8).map(|_| (0..6).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let ys: Vec<usize> = (0..8).map(|i| i % 3).collect();
    let l2 = 0.01;
    let (loss, grads) = net.loss_and_gradients(&xs, &ys, l2, None);
    let loss_gap = (loss - reference_loss(&net, &xs, &ys, l2)).abs();
    let analytic = grads.flatten();
    let params = net.flatten();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for (k, a) in analytic.iter().enumerate() {
        let mut p = params.clone();
        p[k] = params[k] + h;
        net.set_flat(&p);
        let up = reference_loss(&net, &xs, &ys, l2);
        p[k] = params[k] - h;
        net.set_flat(&p);
        let down = reference_loss(&net, &xs, &ys, l2);
        let numeric = (up - down) / (2.0 * h);
        let scale = a.abs().max(numeric.abs());
        if scale > 1e-7 {
            worst = worst.max((a - numeric).abs() / scale);
        }
    }
    net.set_flat(&params);

    let start = Instant::now();
    let train_set = blobs(&mut rng, 200);
    let val_set = blobs(&mut rng, 100);
    let (model, _) = train(&train_set, &val_set, &MlpHyper::default()).unwrap();
    let correct = val_set
        .features
        .iter()
        .zip(&val_set.labels)
        .filter(|(x, &y)| model.predict_proba(x).unwrap().argmax() == y)
        .count();
    let accuracy = correct as f64 / val_set.len() as f64;
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-4 && loss_gap <= 1e-12 && accuracy >= 0.95 && elapsed < Duration::from_secs(60),
        format!(
            "6-4-3 gradient rel error max {worst:.1e}, blob validation accuracy {accuracy:.3} in {elapsed:.2?}"
        ),
    )
}

fn random_distribution(rng: &mut ChaCha8Rng) -> ClassDistribution {
    let sharpness = rng.random_range(0.1..8.0);
    let w: Vec<f64> = (0..3).map(|_| rng.random_range(0.0f64..1.0).powf(sharpness)).collect();
    if w.iter().sum::<f64>() == 0.0 {
        return ClassDistribution::uniform(3);
    }
    ClassDistribution::normalized(w).unwrap()
}

fn max_gap(a: &ClassDistribution, b: &ClassDistribution) -> f64 {
    a.probs().iter().zip(b.probs()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn fusion_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();
    let mut gap = 0.0f64;
    for trial in 0..1000 {
        let mut sensors = Sensor::ALL.to_vec();
        sensors.shuffle(&mut rng);
        let size = rng.random_range(1..=4);
        let team: Vec<SspOutput> = sensors[..size]
            .iter()
            .map(|&sensor| SspOutput {
                sensor,
                p: random_distribution(&mut rng),
                f1: rng.random_range(0.0..=1.0),
            })
            .collect();
        let fused = fuse(&team).unwrap();

        let sum: f64 = fused.p.probs().iter().sum();
        if (sum - 1.0).abs() > 1e-9 || fused.p.probs().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            failures.push(format!("trial {trial}: invalid distribution"));
        }

        let mut shuffled = team.clone();
        shuffled.shuffle(&mut rng);
        gap = gap.max(max_gap(&fuse(&shuffled).unwrap().p, &fused.p));

        let identical: Vec<SspOutput> = team
            .iter()
            .map(|o| SspOutput { p: team[0].p.clone(), ..o.clone() })
            .collect();
        gap = gap.max(max_gap(&fuse(&identical).unwrap().p, &team[0].p));

        gap = gap.max(max_gap(&fuse(&team[..1]).unwrap().p, &team[0].p));

        if !fused.fallback {
            let mut extended = team.clone();
            extended.push(SspOutput {
                sensor: sensors[size],
                p: ClassDistribution::uniform(3),
                f1: rng.random_range(0.01..=1.0),
            });
            gap = gap.max(max_gap(&fuse(&extended).unwrap().p, &fused.p));
        }
    }

    let example = fuse(&[
        SspOutput {
            sensor: Sensor::Ecg,
            p: ClassDistribution::new(vec![0.8, 0.1, 0.1]).unwrap(),
            f1: 1.0,
        },
        SspOutput {
            sensor: Sensor::Eda,
            p: ClassDistribution::new(vec![0.4, 0.4, 0.2]).unwrap(),
            f1: 0.5,
        },
    ])
    .unwrap();
    let expected = [0.670870801546674, 0.19684689883999454, 0.13228229961333152];
    let example_gap = example
        .p
        .probs()
        .iter()
        .zip(expected)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    if gap > 1e-12 {
        failures.push(format!("identity gap {gap:.1e}"));
    }
    if example_gap > 1e-9 {
        failures.push(format!("two-member example off by {example_gap:.1e}"));
    }
    if failures.is_empty() {
        Outcome::Pass(format!(
            "1000 random teams, max identity gap {gap:.1e}, worked example off by {example_gap:.1e}"
        ))
    } else {
        Outcome::Fail(failures.join("; "))
    }
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::default();
    let start = Instant::now();
    let data = dir.path().join("data");
    if let Err(e) = synth::generate_corpus(&cfg.synth, cfg.seed, &data) {
        return Outcome::Fail(format!("synthetic corpus: {e}"));
    }
    let report = match pipeline::run_all(&cfg, &data, &dir.path().join("out")) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(format!("pipeline: {e}")),
    };
    let elapsed = start.elapsed();
    let full = report.full_team().and_then(|t| t.decision.as_ref()).map(|s| s.accuracy);
    let Some(full) = full else {
        return Outcome::Fail("no full-team result".into());
    };
    let Some(rb) = report.robustness.as_ref() else {
        return Outcome::Fail("no robustness comparison".into());
    };
    verdict(
        elapsed < Duration::from_secs(600) && full >= 0.90 && rb.decision_drop < rb.feature_drop,
        format!(
            "{} subjects in {elapsed:.1?}, full-team decision accuracy {full:.3}, \
             {} noise drop: decision {:.3} vs feature {:.3}",
            cfg.synth.subjects, rb.corrupted_sensor, rb.decision_drop, rb.feature_drop
        ),
    )
}

fn real_data() -> Outcome {
    let Some(data) = std::env::var_os("AFFECT_REAL_DATA").map(PathBuf::from) else {
        return Outcome::Skip("AFFECT_REAL_DATA not set".into());
    };
    let cfg = match std::env::var_os("AFFECT_REAL_CONFIG") {
        Some(path) => match PipelineConfig::load(&PathBuf::from(path)) {
            Ok(c) => c,
            Err(e) => return Outcome::Fail(format!("config: {e}")),
        },
        None => PipelineConfig::default(),
    };
    let out = tempfile::tempdir().unwrap();
    let report = match pipeline::run_all(&cfg, &data, out.path()) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(format!("pipeline: {e}")),
    };
    let sizes_ok = report
        .sizes
        .iter()
        .all(|s| matches!((s.mean_decision, s.mean_feature), (Some(d), Some(f)) if d >= f));
    let pct = report.cases.pct_decision_not_worse();
    verdict(
        sizes_ok && pct >= 70.0,
        format!("decision >= feature at every size: {sizes_ok}, D>=F in {pct:.1}% of cases"),
    )
}

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Outcome); 9] = [
        ("fbse-correctness", fbse_correctness),
        ("bessel-roots", bessel_roots),
        ("ewt-frame", ewt_frame),
        ("otsu-oracle", otsu_equivalence),
        ("feature-identities", feature_identities),
        ("mlp", mlp_checks),
        ("fusion-algebra", fusion_algebra),
        ("synthetic-end-to-end", end_to_end),
        ("real-data", real_data),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Outcome::Pass(d) => println!("PASS {name}: {d}"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("FAIL {name}: {d}");
            }
            Outcome::Skip(d) => println!("SKIP {name}: {d}"),
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
