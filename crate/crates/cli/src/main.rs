//! `milroot` command-line front end.
//!
//! Every command reads an optional JSON config (`--config`) that maps onto
//! [`PipelineConfig`]; flags given on the command line override its keys.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use milroot::bags::BagMode;
use milroot::cmap;
use milroot::eval::{pooled_roc, tpr_at_fpr, FPR_GRID};
use milroot::experiment::{
    load_dataset, load_manifest, run_bags, run_experiment, sweep, with_workers, PipelineConfig,
};
use milroot::features::{FeatureMask, FEATURE_NAMES};
use milroot::mil::{self, Algorithm, MilBag, TrainedModel};
use milroot::pipeline::confidence_map;
use milroot::postproc::{binarize, filter_components, select_threshold_for_fpr, ConfidenceMap};
use milroot::raster::Mask;
use milroot::synth::{generate_set, write_set, SynthParams};
use milroot::{seed, Parallelism};

#[derive(Parser)]
#[command(name = "milroot", version, about = "Root segmentation from image-level labels with multiple instance learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic image set with masks and a manifest.
    Synth(SynthArgs),
    /// Destripe, superpixelize and extract features; writes destriped PNGs and features.csv.
    Preprocess(Common),
    /// Train one algorithm on the training manifest and write model.json.
    Train(TrainArgs),
    /// Score the test manifest with a saved model; writes one CMAP per image.
    Predict(PredictArgs),
    /// Binarize saved confidence maps and filter components; writes mask PNGs.
    Postproc(PostprocArgs),
    /// Pixel ROC of saved confidence maps against the manifest masks.
    Eval(EvalArgs),
    /// (gamma, C) grid search scored by F-score; writes sweep.csv.
    Sweep(Common),
    /// Full multi-run experiment: bags, training, prediction, post-processing, evaluation.
    Experiment(Common),
}

/// Config file plus the flags that override its keys.
#[derive(Args, Clone, Default)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training manifest.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Test manifest (defaults to the training manifest).
    #[arg(long)]
    test: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated algorithms: miace, misvm, miforests, svm, rf.
    #[arg(long)]
    algorithms: Option<String>,
    /// image-level, small-bag[:N] or instance-level.
    #[arg(long)]
    bag_mode: Option<String>,
    /// Worker thread cap.
    #[arg(long, env = "MILROOT_WORKERS")]
    workers: Option<usize>,
    /// all, 17, 9, or a comma-separated list of feature names.
    #[arg(long)]
    features: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    positives: usize,
    #[arg(long, default_value_t = 20)]
    negatives: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON file with generator parameters.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, env = "MILROOT_WORKERS")]
    workers: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Run index whose bags and seed to use.
    #[arg(long, default_value_t = 0)]
    run: usize,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    common: Common,
    /// Model written by `train`.
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct PostprocArgs {
    #[command(flatten)]
    common: Common,
    /// Directory of CMAP files named after the manifest images.
    #[arg(long)]
    maps: PathBuf,
    /// Binarization threshold; overrides --target-fpr.
    #[arg(long)]
    threshold: Option<f64>,
    /// Pooled FPR used to choose the threshold (needs masks).
    #[arg(long, default_value_t = 0.03)]
    target_fpr: f64,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Directory of CMAP files named after the manifest images.
    #[arg(long)]
    maps: PathBuf,
}

impl Common {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p).stage("config")?,
            None => PipelineConfig::default(),
        };
        if let Some(p) = &self.train {
            cfg.train = Some(p.clone());
        }
        if let Some(p) = &self.test {
            cfg.test = Some(p.clone());
        }
        if let Some(p) = &self.out {
            cfg.out_dir = Some(p.clone());
        }
        if let Some(n) = self.runs {
            cfg.runs = n;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(list) = &self.algorithms {
            cfg.algorithms = list
                .split(',')
                .map(|a| a.parse::<Algorithm>())
                .collect::<milroot::Result<_>>()
                .stage("config")?;
        }
        if let Some(m) = &self.bag_mode {
            cfg.bags.mode = BagMode::parse(m).stage("config")?;
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        if let Some(f) = &self.features {
            cfg.features = FeatureMask::parse(f).stage("config")?;
        }
        cfg.validate().stage("config")?;
        Ok(cfg)
    }
}

trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for milroot::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at(stage).into())
    }
}

/// `a: b: c` from an error chain, skipping causes the previous message already ends with.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let s = cause.to_string();
        if !msg.ends_with(&s) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&s);
        }
    }
    msg
}

fn out_dir(cfg: &PipelineConfig) -> Result<&Path> {
    let dir = cfg.out_dir.as_deref().context("config: --out is required")?;
    std::fs::create_dir_all(dir).with_context(|| format!("output: {}", dir.display()))?;
    Ok(dir)
}

fn manifest<'a>(path: Option<&'a PathBuf>, what: &str) -> Result<&'a PathBuf> {
    path.with_context(|| format!("config: no {what} manifest (use --{what} or the config file)"))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("output: {}", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let params: SynthParams = match &a.params {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("synth: {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("synth: {}", p.display()))?
        }
        None => SynthParams::default(),
    };
    let images = with_workers(a.workers, || generate_set(&params, a.positives, a.negatives, a.seed)).stage("synth")?;
    let path = write_set(&images, &a.out).stage("output")?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_preprocess(c: &Common) -> Result<()> {
    let cfg = c.config()?;
    let dir = out_dir(&cfg)?;
    let entries = load_manifest(manifest(cfg.train.as_ref(), "train")?).stage("preprocess")?;
    let data = with_workers(cfg.workers, || load_dataset(&entries, &cfg.preprocess, Parallelism::default()))?;
    let mut csv = String::from("image,label,superpixel");
    for name in FEATURE_NAMES {
        let _ = write!(csv, ",raw:{name}");
    }
    for name in FEATURE_NAMES {
        let _ = write!(csv, ",{name}");
    }
    csv.push('\n');
    for img in &data {
        img.image
            .save_png(dir.join(format!("{}_destriped.png", img.id)))
            .stage("output")?;
        for inst in &img.instances {
            let _ = write!(csv, "{},{},{}", img.id, u8::from(img.label), inst.superpixel);
            for v in inst.raw.iter().chain(&inst.features) {
                let _ = write!(csv, ",{v}");
            }
            csv.push('\n');
        }
    }
    write(&dir.join("features.csv"), csv)?;
    log::info!("preprocessed {} images into {}", data.len(), dir.display());
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let cfg = a.common.config()?;
    let dir = out_dir(&cfg)?;
    let [algo] = cfg.algorithms[..] else {
        bail!("config: train takes exactly one algorithm (use --algorithms)");
    };
    let entries = load_manifest(manifest(cfg.train.as_ref(), "train")?).stage("preprocess")?;
    let model = with_workers(cfg.workers, || -> Result<TrainedModel> {
        let data = load_dataset(&entries, &cfg.preprocess, Parallelism::default())?;
        let bags = run_bags(&data, &cfg.bags, cfg.seed, a.run)?;
        let mil_bags: Vec<MilBag> = bags.iter().map(|b| b.to_mil(&cfg.features)).collect();
        let params = cfg.params.clone().with_parallelism(Parallelism::default());
        let seed = seed::derive(cfg.seed, a.run as u64, "train");
        Ok(mil::train(algo, &mil_bags, &params, &cfg.features, seed).map_err(|e| e.at("train"))?)
    })?;
    let path = dir.join("model.json");
    model.save(&path).stage("output")?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let cfg = a.common.config()?;
    let dir = out_dir(&cfg)?;
    let model = TrainedModel::load(&a.model).stage("predict")?;
    let path = manifest(cfg.test.as_ref().or(cfg.train.as_ref()), "test")?;
    let entries = load_manifest(path).stage("preprocess")?;
    with_workers(cfg.workers, || -> Result<()> {
        let data = load_dataset(&entries, &cfg.preprocess, Parallelism::default())?;
        for img in &data {
            let map = confidence_map(&model, img)?;
            cmap::save(&map, dir.join(format!("{}.cmap", img.id))).stage("output")?;
        }
        Ok(())
    })?;
    log::info!("wrote {} maps into {}", entries.len(), dir.display());
    Ok(())
}

/// Confidence maps from `dir` paired with the manifest masks, in manifest order.
fn maps_and_masks(cfg: &PipelineConfig, dir: &Path, need_masks: bool) -> Result<(Vec<String>, Vec<ConfidenceMap>, Vec<Option<Mask>>)> {
    let path = manifest(cfg.test.as_ref().or(cfg.train.as_ref()), "test")?;
    let entries = load_manifest(path).stage("postproc")?;
    let mut ids = Vec::new();
    let mut maps = Vec::new();
    let mut masks = Vec::new();
    for e in &entries {
        let id = stem(&e.image);
        let map = cmap::load(dir.join(format!("{id}.cmap"))).stage("postproc")?;
        let mask = match &e.mask {
            Some(m) => Some(Mask::load(m).stage("postproc")?),
            None if need_masks => bail!("eval: mask required ({})", e.image.display()),
            None => None,
        };
        ids.push(id);
        maps.push(map);
        masks.push(mask);
    }
    Ok((ids, maps, masks))
}

fn cmd_postproc(a: &PostprocArgs) -> Result<()> {
    let cfg = a.common.config()?;
    let dir = out_dir(&cfg)?;
    let (ids, maps, masks) = maps_and_masks(&cfg, &a.maps, a.threshold.is_none())?;
    let theta = match a.threshold {
        Some(t) => t,
        None => {
            let pairs: Vec<(&ConfidenceMap, &Mask)> = maps.iter().zip(masks.iter().flatten()).collect();
            select_threshold_for_fpr(&pairs, a.target_fpr).stage("postproc")?
        }
    };
    let mut csv = String::from("image,pixels,kept\n");
    for (id, map) in ids.iter().zip(&maps) {
        let bin = binarize(map, theta);
        let kept = filter_components(&bin, &cfg.postproc.filter);
        kept.save_png(dir.join(format!("{id}_mask.png"))).stage("output")?;
        let _ = writeln!(csv, "{id},{},{}", bin.count(), kept.count());
    }
    write(&dir.join("postproc.csv"), csv)?;
    println!("threshold {theta}");
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let cfg = a.common.config()?;
    let dir = out_dir(&cfg)?;
    let (_, maps, masks) = maps_and_masks(&cfg, &a.maps, true)?;
    let pairs: Vec<(&ConfidenceMap, &Mask)> = maps.iter().zip(masks.iter().flatten()).collect();
    let curve = pooled_roc(&pairs).stage("eval")?;
    write(&dir.join("roc.csv"), curve.to_csv())?;
    println!("auc {:.6}", curve.auc);
    for q in FPR_GRID {
        println!("tpr@{q} {:.6}", tpr_at_fpr(&curve, q));
    }
    Ok(())
}

fn cmd_sweep(c: &Common) -> Result<()> {
    let cfg = c.config()?;
    out_dir(&cfg)?;
    let table = sweep(&cfg)?;
    let best = table.cells[table.best];
    println!(
        "{}: best gamma 2^{} C 2^{} f-score {:.4}",
        table.algorithm, best.gamma_exp, best.c_exp, best.f_score
    );
    Ok(())
}

fn cmd_experiment(c: &Common) -> Result<()> {
    let cfg = c.config()?;
    out_dir(&cfg)?;
    let result = run_experiment(&cfg)?;
    if result.aggregate.is_empty() {
        for a in result.runs.iter().flat_map(|r| &r.algos) {
            println!("{}: auc {:.4}", a.algo, a.curve.auc);
        }
    } else {
        print!("{}", result.aggregate_csv());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Preprocess(c) => cmd_preprocess(c),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Postproc(a) => cmd_postproc(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(c) => cmd_sweep(c),
        Command::Experiment(c) => cmd_experiment(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}
