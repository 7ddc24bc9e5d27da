//! `ccf` subcommands: train, predict, evaluate, cross, synth.
//!
//! Every run echoes its resolved configuration to stderr as one JSON line
//! prefixed with `ccf: config `. Failures print one line prefixed with
//! `ccf: error[<kind>]: ` and exit with 1 (usage), 2 (data or validation)
//! or 3 (numeric failure).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use ccf_core::dataset::{assemble_region_dataset, prepare, SplitSpec};
use ccf_core::forest::{train_forest, TrainConfig};
use ccf_core::io;
use ccf_core::metrics::{self, confusion_from_labels, EvalReport, ZeroUnion};
use ccf_core::synth::{bayes_accuracy, generate_scene, Preset, SyntheticSceneSpec};
use ccf_core::{CcfModel, LabelMask, MultispectralRaster};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] ccf_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_numeric() => 3,
            CliError::Core(_) => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            1 => "usage",
            3 => "numeric",
            _ => "data",
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "ccf",
    version,
    about = "Canonical correlation forests for multispectral rasters"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a forest on one or more raster/mask pairs.
    Train(TrainArgs),
    /// Label every pixel of a raster.
    Predict(PredictArgs),
    /// Score a predicted mask against ground truth.
    Evaluate(EvaluateArgs),
    /// Predict and score a region with a model trained elsewhere.
    Cross(CrossArgs),
    /// Write a synthetic raster and mask.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Raster header (`<name>.json`); repeat together with --mask.
    #[arg(long = "raster", required = true)]
    pub rasters: Vec<PathBuf>,
    /// Mask header, paired with the --raster at the same position.
    #[arg(long = "mask", required = true)]
    pub masks: Vec<PathBuf>,
    /// Output model path (`<name>.ccf.json`).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub trees: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Training fraction of each class.
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
    /// Skip the held-out evaluation report.
    #[arg(long)]
    pub no_eval: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub raster: PathBuf,
    #[arg(long)]
    pub out_mask: PathBuf,
    #[arg(long)]
    pub out_prob: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CrossArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub raster: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// blobs, oblique or ring.
    #[arg(long, default_value = "blobs")]
    pub preset: String,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 10)]
    pub bands: usize,
    #[arg(long, default_value_t = 3.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; receives raster.json/.bin and mask.json/.bin.
    #[arg(long)]
    pub out: PathBuf,
}

fn echo_config(value: serde_json::Value) {
    eprintln!("ccf: config {value}");
}

/// Region label for reports: the header file name without extensions.
fn region_name(path: &Path) -> String {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("region");
    name.split('.').next().unwrap_or(name).to_string()
}

/// `<stem>.report.json` beside a `<stem>.ccf.json` model.
pub fn holdout_report_path(model_path: &Path) -> PathBuf {
    let name = model_path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("model");
    let stem = name
        .strip_suffix(".ccf.json")
        .or_else(|| name.strip_suffix(".json"))
        .unwrap_or(name);
    model_path.with_file_name(format!("{stem}.report.json"))
}

fn summary_line(report: &EvalReport) -> String {
    format!(
        "{}: pixel accuracy {:.1}%  mean IoU {:.1}%  ({} px evaluated, {} skipped)",
        report.region,
        metrics::percent_1dp(report.pixel_accuracy),
        metrics::percent_1dp(report.mean_iou),
        report.evaluated_pixels,
        report.skipped_pixels
    )
}

pub fn cmd_train(args: &TrainArgs) -> CliResult<Option<EvalReport>> {
    if args.rasters.len() != args.masks.len() {
        return Err(CliError::Usage(format!(
            "{} --raster but {} --mask; give them in pairs",
            args.rasters.len(),
            args.masks.len()
        )));
    }
    let split = SplitSpec {
        train_fraction: args.split,
        seed: args.seed,
    };
    let config = TrainConfig {
        n_trees: args.trees,
        seed: args.seed,
        ..TrainConfig::default()
    };
    echo_config(json!({
        "command": "train",
        "rasters": args.rasters,
        "masks": args.masks,
        "out": args.out,
        "split": split,
        "forest": config,
        "eval": !args.no_eval,
        "threads": ccf_core::par::worker_count(),
    }));
    split.validate()?;

    let mut pairs = Vec::with_capacity(args.rasters.len());
    for (r, m) in args.rasters.iter().zip(&args.masks) {
        pairs.push((io::read_raster_at(r)?, io::read_mask_at(m)?));
    }
    let refs: Vec<(&MultispectralRaster, &LabelMask)> = pairs.iter().map(|(r, m)| (r, m)).collect();
    let samples = assemble_region_dataset(&refs)?;
    let data = prepare(&samples, &split)?;
    let model = train_forest(&data.train, data.scaler.clone(), &config)?;
    io::save_model(&model, &args.out)?;
    println!(
        "trained {} trees on {} samples ({} held out) -> {}",
        model.trees.len(),
        data.train.len(),
        data.test.len(),
        args.out.display()
    );

    if args.no_eval {
        return Ok(None);
    }
    let predicted = model.predict_samples(&data.test)?;
    let pred: Vec<u8> = predicted.iter().map(|&c| c as u8).collect();
    let truth: Vec<u8> = data.test.labels.iter().map(|&c| c as u8).collect();
    let confusion = confusion_from_labels(&pred, &truth, model.n_classes())?;
    let report = EvalReport::from_confusion(
        "holdout",
        model.class_names.clone(),
        confusion,
        ZeroUnion::Exclude,
    )?;
    let path = holdout_report_path(&args.out);
    io::write_report(&report, &path)?;
    println!("{}", summary_line(&report));
    Ok(Some(report))
}

pub fn cmd_predict(args: &PredictArgs) -> CliResult<()> {
    echo_config(json!({
        "command": "predict",
        "model": args.model,
        "raster": args.raster,
        "out_mask": args.out_mask,
        "out_prob": args.out_prob,
        "threads": ccf_core::par::worker_count(),
    }));
    let model = io::load_model(&args.model)?;
    let raster = io::read_raster_at(&args.raster)?;
    let prediction = model.predict_raster(&raster)?;
    io::write_mask(&prediction.mask, &args.out_mask)?;
    io::write_raster(&prediction.probability_raster()?, &args.out_prob)?;
    let informal = prediction
        .mask
        .as_slice()
        .iter()
        .filter(|&&v| v == 1)
        .count();
    println!(
        "predicted {} pixels ({} informal) -> {}",
        prediction.mask.pixel_count(),
        informal,
        args.out_mask.display()
    );
    Ok(())
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<EvalReport> {
    echo_config(json!({
        "command": "evaluate",
        "pred": args.pred,
        "truth": args.truth,
        "out": args.out,
        "zero_union": ZeroUnion::Exclude,
    }));
    let pred = io::read_mask_at(&args.pred)?;
    let truth = io::read_mask_at(&args.truth)?;
    let report = metrics::evaluate(&region_name(&args.truth), &pred, &truth)?;
    io::write_report(&report, &args.out)?;
    println!("{}", summary_line(&report));
    Ok(report)
}

/// Predicts a region with a stored model (and its training-region scaler)
/// and scores it against that region's mask.
pub fn cross_evaluate(
    model: &CcfModel,
    raster: &MultispectralRaster,
    mask: &LabelMask,
    region: &str,
) -> CliResult<EvalReport> {
    let prediction = model.predict_raster(raster)?;
    Ok(metrics::evaluate(region, &prediction.mask, mask)?)
}

pub fn cmd_cross(args: &CrossArgs) -> CliResult<EvalReport> {
    echo_config(json!({
        "command": "cross",
        "model": args.model,
        "raster": args.raster,
        "mask": args.mask,
        "out": args.out,
        "threads": ccf_core::par::worker_count(),
    }));
    let model = io::load_model(&args.model)?;
    let raster = io::read_raster_at(&args.raster)?;
    let mask = io::read_mask_at(&args.mask)?;
    let report = cross_evaluate(&model, &raster, &mask, &region_name(&args.raster))?;
    io::write_report(&report, &args.out)?;
    println!("{}", summary_line(&report));
    Ok(report)
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult<f64> {
    let preset: Preset = args
        .preset
        .parse()
        .map_err(|e: ccf_core::Error| CliError::Usage(e.to_string()))?;
    let spec = SyntheticSceneSpec {
        preset,
        width: args.width,
        height: args.height,
        bands: args.bands,
        class_separation: args.separation,
        noise_std: args.noise,
        seed: args.seed,
        unlabeled_border: 0,
    };
    echo_config(json!({ "command": "synth", "spec": spec, "out": args.out }));
    spec.validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let (raster, mask) = generate_scene(&spec)?;
    fs::create_dir_all(&args.out).map_err(|e| ccf_core::Error::Io {
        path: args.out.clone(),
        source: e,
    })?;
    io::write_raster(&raster, &args.out.join("raster.json"))?;
    io::write_mask(&mask, &args.out.join("mask.json"))?;
    let bayes = bayes_accuracy(&spec)?;
    println!("bayes_accuracy {bayes:.4}");
    Ok(bayes)
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Train(a) => cmd_train(a).map(|_| ()),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a).map(|_| ()),
        Command::Cross(a) => cmd_cross(a).map(|_| ()),
        Command::Synth(a) => cmd_synth(a).map(|_| ()),
    }
}

/// Sizes the global worker pool from `CCF_THREADS` when it is set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("CCF_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "CCF_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size thread pool: {e}")))
}
