use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use affect_core::pipeline::{
    self, load_features, load_models, report, run_evaluate, run_extract, run_robustness, run_train, save_models, synth,
    EvalReport, PipelineConfig, PipelineError, FEATURES_FILE,
};

/// Affect classification from wearable physiological signals.
#[derive(Debug, Parser)]
#[command(name = "affect", version, about)]
struct Cli {
    /// JSON pipeline configuration; unspecified fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Ingestion directory (one subdirectory per subject).
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Output directory for features, models and reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Root seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Leave-one-subject-out evaluation instead of a single split.
    #[arg(long, global = true)]
    loso: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic corpus in the ingestion layout to --out.
    Synth {
        /// Number of subjects; overrides the config.
        #[arg(long)]
        subjects: Option<usize>,
    },
    /// Window, decompose and featurise --data into <out>/features.csv.
    Extract,
    /// Train per-sensor and per-team models from <out>/features.csv.
    Train,
    /// Score the trained models on held-out subjects and write the report.
    Evaluate,
    /// Rewrite the CSV tables from <out>/report.json and print a summary.
    Report,
    /// Run extract, train, evaluate and report in one go.
    All {
        /// Generate a synthetic corpus into <out>/data and use it as --data.
        #[arg(long)]
        synthetic: bool,
    },
}

/// Marks errors that should exit with status 2.
#[derive(Debug)]
struct Validation(String);

impl std::fmt::Display for Validation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Validation {}

fn pipeline_err(e: PipelineError) -> anyhow::Error {
    if e.is_validation() {
        anyhow::Error::new(Validation(e.to_string()))
    } else {
        anyhow::Error::new(e)
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path).map_err(|e| Validation(e.to_string()))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.loso {
        cfg.split.loso = true;
    }
    if let Some(d) = &cli.data {
        cfg.data_dir = Some(d.clone());
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = Some(o.clone());
    }
    cfg.validate().map_err(|e| Validation(e.to_string()))?;
    Ok(cfg)
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| anyhow::Error::new(Validation(format!("{flag} is required (flag or config)"))))
}

fn print_summary(r: &EvalReport) {
    println!("{:<6}{:>16}{:>16}", "size", "decision", "feature");
    let fmt = |m: Option<f64>, s: Option<f64>| match (m, s) {
        (Some(m), Some(s)) => format!("{m:.3} ± {s:.3}"),
        _ => "-".into(),
    };
    for s in &r.sizes {
        println!(
            "{:<6}{:>16}{:>16}",
            s.size,
            fmt(s.mean_decision, s.std_decision),
            fmt(s.mean_feature, s.std_feature)
        );
    }
    let c = &r.cases;
    println!(
        "cases {}: D>F {:.2}%  D=F {:.2}%  D<F {:.2}%  (n = {})",
        c.unit, c.pct_decision_better, c.pct_equal, c.pct_feature_better, c.total
    );
    if let Some(rb) = &r.robustness {
        println!(
            "{} replaced by noise: decision {:.3} -> {:.3}, feature {:.3} -> {:.3}",
            rb.corrupted_sensor, rb.clean_decision, rb.noisy_decision, rb.clean_feature, rb.noisy_feature
        );
    }
}

fn evaluate(cfg: &PipelineConfig, out: &Path) -> Result<EvalReport> {
    let store = load_features(out).map_err(pipeline_err)?;
    let folds = load_models(out).map_err(pipeline_err)?;
    let (mut rep, audit) = run_evaluate(cfg, &folds, &store).map_err(pipeline_err)?;
    if let Some(data) = &cfg.data_dir {
        rep.robustness = run_robustness(cfg, data, &folds, &rep).map_err(pipeline_err)?;
    }
    report::emit_report(&rep, &audit, out).map_err(pipeline_err)?;
    Ok(rep)
}

fn run(cli: &Cli) -> Result<()> {
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::Synth { subjects } => {
            if let Some(n) = subjects {
                cfg.synth.subjects = *n;
                cfg.validate().map_err(|e| Validation(e.to_string()))?;
            }
            let out = required(&cfg.out_dir, "--out")?;
            let dirs = synth::generate_corpus(&cfg.synth, cfg.seed, out).map_err(|e| pipeline_err(e.into()))?;
            log::info!("wrote {} subjects to {}", dirs.len(), out.display());
        }
        Command::Extract => {
            let data = required(&cfg.data_dir, "--data")?;
            let out = required(&cfg.out_dir, "--out")?;
            std::fs::create_dir_all(out).map_err(|source| PipelineError::Io {
                path: out.to_path_buf(),
                source,
            })?;
            let store = run_extract(&cfg, data, None, None).map_err(pipeline_err)?;
            store.write_csv(&out.join(FEATURES_FILE)).map_err(pipeline_err)?;
            log::info!("{} feature rows", store.rows.len());
        }
        Command::Train => {
            let out = required(&cfg.out_dir, "--out")?;
            let store = load_features(out).map_err(pipeline_err)?;
            let folds = run_train(&cfg, &store).map_err(pipeline_err)?;
            save_models(&folds, out).map_err(pipeline_err)?;
        }
        Command::Evaluate => {
            let out = required(&cfg.out_dir, "--out")?.to_path_buf();
            print_summary(&evaluate(&cfg, &out)?);
        }
        Command::Report => {
            let out = required(&cfg.out_dir, "--out")?;
            let rep = report::read_report(&out.join(report::REPORT_FILE)).map_err(pipeline_err)?;
            report::write_sizes_csv(&rep, &out.join(report::SIZES_FILE)).map_err(pipeline_err)?;
            report::write_teams_csv(&rep, &out.join(report::TEAMS_FILE)).map_err(pipeline_err)?;
            print_summary(&rep);
        }
        Command::All { synthetic } => {
            let out = required(&cfg.out_dir, "--out")?.to_path_buf();
            if *synthetic {
                let data = out.join("data");
                synth::generate_corpus(&cfg.synth, cfg.seed, &data).map_err(|e| pipeline_err(e.into()))?;
                cfg.data_dir = Some(data);
            }
            let data = required(&cfg.data_dir, "--data")?.to_path_buf();
            let rep = pipeline::run_all(&cfg, &data, &out).map_err(pipeline_err)?;
            print_summary(&rep);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.downcast_ref::<Validation>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
