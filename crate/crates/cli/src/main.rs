//! `crvar`: synthesize cohorts, extract features, train, evaluate and
//! predict extubation readiness from the command line.

mod dump;
mod provenance;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;
use serde_json::json;

use crvar_core::config::{load_grid, RunConfig};
use crvar_core::eval::{cross_validate, grid_search, stratified_folds, write_roc_csv, EvalReport};
use crvar_core::features::{extract_patient, FeatureMatrix, PatientAnalysis};
use crvar_core::forest::CvInfo;
use crvar_core::signals::{
    load_recording, read_clinical, read_epochs, synth_cohort, write_clinical, write_epochs, write_signal_csv,
};
use crvar_core::{Error, ForestKind, ForestModel, Outcome};

use provenance::{roc_path, Provenance};

#[derive(Parser)]
#[command(name = "crvar", version, about = "Extubation-readiness prediction from cardiorespiratory variability")]
struct Cli {
    /// Worker threads; 1 runs serially. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic cohort.
    Synth(SynthArgs),
    /// Compute the feature table from signal files.
    Extract(ExtractArgs),
    /// Grid-search and cross-validate a forest, then fit it on all rows.
    Train(TrainArgs),
    /// Score a saved model on a feature table.
    Evaluate(EvaluateArgs),
    /// Write per-patient success probabilities.
    Predict(PredictArgs),
}

fn open_fraction(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("must lie strictly between 0 and 1, got {v}"))
    }
}

fn non_negative(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be a non-negative number, got {v}"))
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    patients: usize,
    #[arg(long, default_value_t = 0.15, value_parser = open_fraction)]
    failure_rate: f64,
    #[arg(long, default_value_t = 1.0, value_parser = non_negative)]
    separability: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Receives `signals/<id>.csv`, `epochs.csv` and `clinical.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    /// Directory of per-patient signal CSVs named `<patient_id>.csv`.
    #[arg(long)]
    signals: PathBuf,
    #[arg(long)]
    epochs: PathBuf,
    #[arg(long)]
    clinical: PathBuf,
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Write per-patient metric series into this directory.
    #[arg(long)]
    dump_metrics: Option<PathBuf>,
    /// Write per-patient R-peak times into this directory.
    #[arg(long)]
    dump_peaks: Option<PathBuf>,
    /// Write per-patient label tracks into this directory.
    #[arg(long)]
    dump_patterns: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    /// rf, brf or cdbrf.
    #[arg(long)]
    model: ForestKind,
    /// Hyperparameter grid, `key = v1, v2` per line. Without it the
    /// configured hyperparameters are used alone.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured fold count.
    #[arg(long)]
    folds: Option<usize>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Report JSON; the ROC curve goes next to it as `<stem>.roc.csv`.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Re-run the model's cross-validation instead of scoring the saved
    /// model directly. Reproduces the pooled metrics of its training
    /// report when given the training features.
    #[arg(long)]
    cross_validate: bool,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Extract(a) => extract(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Predict(a) => predict(a),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).with_context(|| format!("bad config {}", p.display())),
        None => Ok(RunConfig::default()),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn synth(a: SynthArgs) -> Result<()> {
    let (recordings, clinical) = synth_cohort(a.patients, a.failure_rate, a.separability, a.seed)?;
    let signals = a.out.join("signals");
    std::fs::create_dir_all(&signals).with_context(|| format!("creating {}", signals.display()))?;
    recordings.par_iter().try_for_each(|r| {
        let path = signals.join(format!("{}.csv", r.patient_id()));
        write_signal_csv(&path, r)
    })?;
    write_epochs(
        a.out.join("epochs.csv"),
        recordings.iter().map(|r| (r.patient_id(), r.epochs())),
    )?;
    write_clinical(a.out.join("clinical.csv"), &clinical)?;
    let args = json!({
        "patients": a.patients,
        "failure_rate": a.failure_rate,
        "separability": a.separability,
        "seed": a.seed,
    });
    let prov = Provenance::new("synth", None, args)?;
    write_json(&a.out.join("provenance.json"), &prov.to_value())?;
    info!("wrote {} patients to {}", recordings.len(), a.out.display());
    Ok(())
}

fn signal_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn extract(a: ExtractArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let epochs = read_epochs(&a.epochs)?;
    let clinical: BTreeMap<String, _> = read_clinical(&a.clinical)?
        .into_iter()
        .map(|c| (c.patient_id.clone(), c))
        .collect();
    let files = signal_files(&a.signals)?;
    if files.is_empty() {
        bail!("no signal files in {}", a.signals.display());
    }

    let analyse = |path: &PathBuf| -> Result<PatientAnalysis> {
        let id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let spec = epochs.get(&id).ok_or_else(|| anyhow!("no epoch markers"))?;
        let record = clinical.get(&id).ok_or_else(|| anyhow!("no clinical record"))?;
        let rec = load_recording(path, spec)?;
        Ok(extract_patient(&rec, record, &cfg.extract)?)
    };
    let results: Vec<(PathBuf, Result<PatientAnalysis>)> =
        files.par_iter().map(|p| (p.clone(), analyse(p))).collect();

    let mut matrix = FeatureMatrix::new(crvar_core::FeatureRegistry::canonical());
    let mut failed = 0;
    for (path, result) in results {
        match result {
            Ok(analysis) => {
                let outcome = clinical[&analysis.patient_id].outcome;
                info!("{}: {} missing features", analysis.patient_id, analysis.missing_count());
                if let Some(dir) = &a.dump_metrics {
                    dump::metrics(dir, &analysis)?;
                }
                if let Some(dir) = &a.dump_peaks {
                    dump::peaks(dir, &analysis)?;
                }
                if let Some(dir) = &a.dump_patterns {
                    dump::patterns(dir, &analysis)?;
                }
                matrix.push_row(analysis.patient_id, outcome, analysis.features)?;
            }
            Err(e) => {
                failed += 1;
                warn!("skipping {}: {e:#}", path.display());
            }
        }
    }
    if matrix.n_rows() == 0 {
        bail!("feature extraction failed for all {} patients", files.len());
    }
    matrix.write_csv(&a.out)?;

    let mut prov = Provenance::new("extract", Some(&cfg), json!({ "patients": files.len(), "failed": failed }))?;
    prov.input(&a.epochs)?;
    prov.input(&a.clinical)?;
    if let Some(c) = &a.config {
        prov.input(c)?;
    }
    prov.write_sidecar(&a.out)?;
    info!(
        "wrote {} rows x {} features to {} ({failed} failed)",
        matrix.n_rows(),
        matrix.n_features(),
        a.out.display()
    );
    Ok(())
}

/// Rows with a known outcome; unknown ones cannot be trained or scored.
fn labelled(matrix: FeatureMatrix) -> FeatureMatrix {
    let known: Vec<usize> = (0..matrix.n_rows())
        .filter(|&i| matrix.outcomes[i] != Outcome::Unknown)
        .collect();
    if known.len() < matrix.n_rows() {
        warn!("ignoring {} rows with unknown outcome", matrix.n_rows() - known.len());
        return matrix.subset(&known);
    }
    matrix
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(k) = a.folds {
        cfg.set("folds", &k.to_string())?;
    }
    if let Some(s) = a.seed {
        cfg.set("seed", &s.to_string())?;
    }
    cfg.validate()?;
    let grid = match &a.grid {
        Some(path) => load_grid(path, &cfg.hyperparameters)?,
        None => vec![cfg.hyperparameters],
    };
    let matrix = labelled(FeatureMatrix::read_csv_any(&a.features)?);
    let plan = stratified_folds(&matrix.outcomes, cfg.folds, cfg.seed)?;
    let outcome = grid_search(&matrix, a.model, &grid, &plan, cfg.clinical_rule)?;

    let mut prov = Provenance::new("train", Some(&cfg), json!({ "model": a.model, "grid_size": grid.len() }))?;
    prov.input(&a.features)?;
    for p in a.grid.iter().chain(&a.config) {
        prov.input(p)?;
    }
    let mut model = outcome.model;
    model.provenance = Some(prov.to_value());
    model.save(&a.out)?;
    let mut report = outcome.report;
    report.provenance = Some(prov.to_value());
    write_json(&a.report, &report)?;
    let roc = roc_path(&a.report);
    write_roc_csv(&roc, &report.roc())?;
    prov.write_sidecar(&roc)?;
    println!("{}", report.summary());
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let model = ForestModel::load(&a.model)?;
    let matrix = labelled(read_for_model(&a.features, &model)?);
    let mut report = if a.cross_validate {
        let cv = model
            .cv
            .ok_or_else(|| anyhow!("model carries no cross-validation settings"))?;
        let rule = model.clinical_rule.unwrap_or_default();
        let plan = stratified_folds(&matrix.outcomes, cv.k, cv.seed)?;
        let run = cross_validate(&matrix, model.kind, &model.hyperparameters, rule, &plan)?;
        let mut r = EvalReport::from_scores(model.kind, &matrix, &run.scores, model.threshold)?;
        r.per_fold = run.folds;
        r.cv = Some(CvInfo { k: cv.k, seed: cv.seed });
        r
    } else {
        let scores = model.predict_matrix(&matrix)?;
        EvalReport::from_scores(model.kind, &matrix, &scores, model.threshold)?
    }
    .with_importances(&model);
    report.chosen_hyperparameters = Some(model.hyperparameters);

    let config = model
        .provenance
        .as_ref()
        .and_then(|p| serde_json::from_value::<RunConfig>(p["config"].clone()).ok());
    let mut prov = Provenance::new("evaluate", config.as_ref(), json!({ "cross_validate": a.cross_validate }))?;
    prov.input(&a.features)?;
    prov.input(&a.model)?;
    report.provenance = Some(prov.to_value());
    write_json(&a.out, &report)?;
    let roc = roc_path(&a.out);
    write_roc_csv(&roc, &report.roc())?;
    prov.write_sidecar(&roc)?;
    println!("{}", report.summary());
    Ok(())
}

/// Reads a feature table and insists its columns are the model's.
fn read_for_model(path: &Path, model: &ForestModel) -> Result<FeatureMatrix> {
    let matrix = FeatureMatrix::read_csv_any(path)?;
    if matrix.registry.names() != model.registry.as_slice() {
        return Err(Error::RegistryMismatch(format!(
            "{} has {} feature columns that differ from the model's {}",
            path.display(),
            matrix.n_features(),
            model.registry.len()
        ))
        .into());
    }
    Ok(matrix)
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = ForestModel::load(&a.model)?;
    let matrix = read_for_model(&a.features, &model)?;
    let probs = model.predict_matrix(&matrix)?;
    let mut w = csv::Writer::from_path(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    w.write_record(["patient_id", "probability_success", "predicted_label"])?;
    for (id, p) in matrix.patient_ids.iter().zip(&probs) {
        w.write_record([id.as_str(), &format!("{p:?}"), model.predict_label(*p).as_str()])?;
    }
    w.flush().with_context(|| format!("writing {}", a.out.display()))?;

    let config = model
        .provenance
        .as_ref()
        .and_then(|p| serde_json::from_value::<RunConfig>(p["config"].clone()).ok());
    let mut prov = Provenance::new("predict", config.as_ref(), json!({ "threshold": model.threshold }))?;
    prov.input(&a.features)?;
    prov.input(&a.model)?;
    prov.write_sidecar(&a.out)?;
    info!("wrote {} predictions to {}", probs.len(), a.out.display());
    Ok(())
}
