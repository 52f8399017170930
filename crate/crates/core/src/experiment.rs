//! Manifests, experiment configuration and multi-run orchestration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bags::{Bag, BagParams};
use crate::cmap;
use crate::error::{Error, Result, StageExt};
use crate::eval::{aggregate_csv, aggregate_runs, averaged_roc, f_score_counts, pooled_roc, RocCurve, RunAggregate};
use crate::exec::Parallelism;
use crate::features::FeatureMask;
use crate::learners::Kernel;
use crate::mil::{self, report_signature, signature_spread, Algorithm, MilBag, TrainParams, TrainedModel};
use crate::pipeline::{confidence_map, preprocess, PreprocessParams, ProcessedImage};
use crate::postproc::{binarize, filter_components, select_threshold_for_fpr, ConfidenceMap, FilterParams};
use crate::raster::{Mask, RasterImage};
use crate::seed;

/// One manifest row: `{"image": path, "label": 0|1, "mask": path|null}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub label: u8,
    #[serde(default)]
    pub mask: Option<PathBuf>,
}

/// Reads a manifest, resolving relative paths against its directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries: Vec<ManifestEntry> =
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    let dir = path.parent().unwrap_or(Path::new(""));
    for e in &mut entries {
        if e.label > 1 {
            return Err(Error::InvalidParams(format!(
                "{}: label must be 0 or 1, got {}",
                e.image.display(),
                e.label
            )));
        }
        e.image = dir.join(&e.image);
        e.mask = e.mask.as_ref().map(|m| dir.join(m));
    }
    if entries.is_empty() {
        return Err(Error::InvalidParams(format!("{}: empty manifest", path.display())));
    }
    Ok(entries)
}

fn image_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Loads and preprocesses every manifest image.
pub fn load_dataset(
    entries: &[ManifestEntry],
    params: &PreprocessParams,
    parallelism: Parallelism,
) -> Result<Vec<ProcessedImage>> {
    let indexed: Vec<(usize, &ManifestEntry)> = entries.iter().enumerate().collect();
    parallelism.try_map(&indexed, |&(k, e)| {
        let image = RasterImage::load(&e.image).stage("preprocess")?;
        let mask = match &e.mask {
            Some(m) => Some(Mask::load(m).stage("preprocess")?),
            None => None,
        };
        preprocess(image_id(&e.image), k, &image, e.label == 1, mask, params)
            .map_err(|err| err.at("preprocess"))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// One ROC over all test pixels.
    #[default]
    Pooled,
    /// Average of per-image ROC curves.
    PerImage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PostprocConfig {
    /// Pooled FPRs at which maps are binarized for post-processing.
    pub target_fprs: Vec<f64>,
    pub filter: FilterParams,
}

impl Default for PostprocConfig {
    fn default() -> Self {
        Self {
            target_fprs: crate::eval::FPR_GRID.to_vec(),
            filter: FilterParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub algorithm: Algorithm,
    /// Inclusive range of log₂ γ.
    pub gamma_exp: [i32; 2],
    /// Inclusive range of log₂ C.
    pub c_exp: [i32; 2],
    /// Exponent increment; 2 is a factor of 4.
    pub step: i32,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::MiSvm,
            gamma_exp: [-15, 3],
            c_exp: [-5, 15],
            step: 2,
        }
    }
}

impl SweepConfig {
    fn exps(range: [i32; 2], step: i32) -> Vec<i32> {
        (range[0]..=range[1]).step_by(step.max(1) as usize).collect()
    }

    pub fn gammas(&self) -> Vec<i32> {
        Self::exps(self.gamma_exp, self.step)
    }

    pub fn cs(&self) -> Vec<i32> {
        Self::exps(self.c_exp, self.step)
    }
}

/// Complete description of an experiment; the JSON config file maps onto it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub train: Option<PathBuf>,
    /// Defaults to the training manifest.
    pub test: Option<PathBuf>,
    /// Used by the sweep; defaults to the test manifest.
    pub validation: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub preprocess: PreprocessParams,
    pub features: FeatureMask,
    pub bags: BagParams,
    pub algorithms: Vec<Algorithm>,
    pub params: TrainParams,
    pub postproc: PostprocConfig,
    pub pooling: Pooling,
    pub sweep: SweepConfig,
    pub runs: usize,
    pub seed: u64,
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
    /// Write a CMAP file per test image, run and algorithm.
    pub save_maps: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            train: None,
            test: None,
            validation: None,
            out_dir: None,
            preprocess: PreprocessParams::default(),
            features: FeatureMask::all(),
            bags: BagParams::default(),
            algorithms: Algorithm::ALL.to_vec(),
            params: TrainParams::default(),
            postproc: PostprocConfig::default(),
            pooling: Pooling::Pooled,
            sweep: SweepConfig::default(),
            runs: 10,
            seed: 0,
            workers: None,
            save_maps: true,
        }
    }
}

impl PipelineConfig {
    /// Reads a JSON config; relative paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        let dir = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.train, &mut cfg.test, &mut cfg.validation, &mut cfg.out_dir]
            .into_iter()
            .flatten()
        {
            *p = dir.join(&*p);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidParams("runs must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidParams("no algorithms configured".into()));
        }
        if self.postproc.target_fprs.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
            return Err(Error::InvalidParams("target FPRs must lie in (0, 1)".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidParams("workers must be at least 1".into()));
        }
        self.bags.validate()
    }

    fn train_params(&self) -> TrainParams {
        self.params.clone().with_parallelism(Parallelism::default())
    }
}

/// Runs `f` on a thread pool capped at `workers` threads.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(n) = workers {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            return pool.install(f);
        }
    }
    let _ = workers;
    f()
}

/// Pixel rates after binarizing at a pooled target FPR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostprocRow {
    pub target_fpr: f64,
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
    /// Rates after eccentricity-only filtering.
    pub ecc_fpr: f64,
    pub ecc_tpr: f64,
    /// Rates after size-only filtering.
    pub size_fpr: f64,
    pub size_tpr: f64,
    /// Rates after the configured filter.
    pub filtered_fpr: f64,
    pub filtered_tpr: f64,
}

#[derive(Debug, Clone)]
pub struct AlgoRun {
    pub algo: Algorithm,
    pub model: TrainedModel,
    pub curve: RocCurve,
    pub postproc: Vec<PostprocRow>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub run: usize,
    pub algos: Vec<AlgoRun>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub runs: Vec<RunResult>,
    /// Present when at least two runs were made.
    pub aggregate: Vec<(String, RunAggregate)>,
}

impl ExperimentResult {
    pub fn curves(&self, algo: Algorithm) -> Vec<&RocCurve> {
        self.runs
            .iter()
            .flat_map(|r| r.algos.iter().filter(|a| a.algo == algo).map(|a| &a.curve))
            .collect()
    }

    pub fn aggregate_csv(&self) -> String {
        aggregate_csv(&self.aggregate)
    }
}

fn rates(preds: &[Mask], truth: &[&Mask]) -> (f64, f64) {
    let (mut tp, mut fp, mut pos, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for (p, g) in preds.iter().zip(truth) {
        for (&a, &b) in p.bits().iter().zip(g.bits()) {
            match (a, b) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                _ => {}
            }
            if b {
                pos += 1;
            } else {
                neg += 1;
            }
        }
    }
    (
        fp as f64 / neg.max(1) as f64,
        tp as f64 / pos.max(1) as f64,
    )
}

/// Binarizes maps at each target FPR and measures the effect of filtering.
pub fn postproc_rows(
    maps: &[ConfidenceMap],
    masks: &[&Mask],
    cfg: &PostprocConfig,
) -> Result<Vec<PostprocRow>> {
    let pairs: Vec<(&ConfidenceMap, &Mask)> = maps.iter().zip(masks.iter().copied()).collect();
    let mut rows = Vec::new();
    for &q in &cfg.target_fprs {
        let theta = select_threshold_for_fpr(&pairs, q)?;
        let bin: Vec<Mask> = maps.iter().map(|m| binarize(m, theta)).collect();
        let apply = |f: &FilterParams| -> Vec<Mask> {
            bin.iter().map(|b| filter_components(b, f)).collect()
        };
        let (fpr, tpr) = rates(&bin, masks);
        let (ecc_fpr, ecc_tpr) = rates(&apply(&FilterParams::eccentricity_only(cfg.filter.min_ecc)), masks);
        let (size_fpr, size_tpr) = rates(&apply(&FilterParams::size_only(cfg.filter.min_size)), masks);
        let (filtered_fpr, filtered_tpr) = rates(&apply(&cfg.filter), masks);
        rows.push(PostprocRow {
            target_fpr: q,
            threshold: theta,
            fpr,
            tpr,
            ecc_fpr,
            ecc_tpr,
            size_fpr,
            size_tpr,
            filtered_fpr,
            filtered_tpr,
        });
    }
    Ok(rows)
}

fn postproc_csv(rows: &[PostprocRow]) -> String {
    let mut s = String::from(
        "target_fpr,threshold,fpr,tpr,ecc_fpr,ecc_tpr,size_fpr,size_tpr,filtered_fpr,filtered_tpr\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.target_fpr,
            r.threshold,
            r.fpr,
            r.tpr,
            r.ecc_fpr,
            r.ecc_tpr,
            r.size_fpr,
            r.size_tpr,
            r.filtered_fpr,
            r.filtered_tpr
        );
    }
    s
}

fn test_masks(test: &[ProcessedImage]) -> Result<Vec<&Mask>> {
    test.iter()
        .map(|t| t.mask.as_ref().ok_or(Error::MissingMask))
        .collect::<Result<Vec<_>>>()
        .stage("eval")
}

/// Bags for one run; downsampling and sampling are re-drawn per run.
pub fn run_bags(train: &[ProcessedImage], params: &BagParams, base_seed: u64, run: usize) -> Result<Vec<Bag>> {
    let s = seed::derive(base_seed, run as u64, "bags");
    let per_image: Vec<(usize, &ProcessedImage)> = train.iter().enumerate().collect();
    let nested = Parallelism::default().try_map(&per_image, |&(k, img)| {
        img.bags(params, seed::child(s, k as u64))
    })?;
    Ok(nested.into_iter().flatten().collect())
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e)).stage("output")
}

fn mkdir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e)).stage("output")
}

fn run_one(
    cfg: &PipelineConfig,
    train: &[ProcessedImage],
    test: &[ProcessedImage],
    masks: &[&Mask],
    run: usize,
) -> Result<RunResult> {
    let bags = run_bags(train, &cfg.bags, cfg.seed, run)?;
    let mil_bags: Vec<MilBag> = bags.iter().map(|b| b.to_mil(&cfg.features)).collect();
    let train_seed = seed::derive(cfg.seed, run as u64, "train");
    let params = cfg.train_params();
    let run_dir = cfg.out_dir.as_ref().map(|d| d.join(format!("run_{run:03}")));

    let mut algos = Vec::new();
    for &algo in &cfg.algorithms {
        let model = mil::train(algo, &mil_bags, &params, &cfg.features, train_seed)
            .map_err(|e| e.at("train"))?;
        let maps = Parallelism::default().try_map(test, |t| confidence_map(&model, t))?;
        let pairs: Vec<(&ConfidenceMap, &Mask)> = maps.iter().zip(masks.iter().copied()).collect();
        let curve = match cfg.pooling {
            Pooling::Pooled => pooled_roc(&pairs),
            Pooling::PerImage => averaged_roc(&pairs),
        }
        .stage("eval")?;
        let postproc = postproc_rows(&maps, masks, &cfg.postproc).stage("postproc")?;

        if let Some(dir) = &run_dir {
            let dir = dir.join(algo.name());
            mkdir(&dir)?;
            write(&dir.join("model.json"), model.to_json())?;
            write(&dir.join("roc.csv"), curve.to_csv())?;
            write(&dir.join("postproc.csv"), postproc_csv(&postproc))?;
            if let Ok(report) = report_signature(&model) {
                write(&dir.join("signature.csv"), report.to_csv())?;
            }
            if cfg.save_maps {
                let maps_dir = dir.join("maps");
                mkdir(&maps_dir)?;
                for (t, m) in test.iter().zip(&maps) {
                    cmap::save(m, maps_dir.join(format!("{}.cmap", t.id))).stage("output")?;
                }
            }
        }
        algos.push(AlgoRun {
            algo,
            model,
            curve,
            postproc,
        });
    }
    Ok(RunResult { run, algos })
}

/// Runs every configured algorithm for `cfg.runs` runs on preprocessed
/// data, writing artifacts under `cfg.out_dir` when it is set.
pub fn run_with_data(
    cfg: &PipelineConfig,
    train: &[ProcessedImage],
    test: &[ProcessedImage],
) -> Result<ExperimentResult> {
    cfg.validate()?;
    if cfg.bags.mode.needs_mask() && train.iter().any(|t| t.mask.is_none()) {
        return Err(Error::MissingMask.at("bags"));
    }
    let masks = test_masks(test)?;
    if let Some(dir) = &cfg.out_dir {
        mkdir(dir)?;
        write(&dir.join(".partial"), "")?;
    }
    let runs: Vec<RunResult> = with_workers(cfg.workers, || {
        Parallelism::default()
            .map_range(cfg.runs, |r| run_one(cfg, train, test, &masks, r))
            .into_iter()
            .collect::<Result<Vec<_>>>()
    })?;

    let mut aggregate = Vec::new();
    if runs.len() >= 2 {
        for &algo in &cfg.algorithms {
            let curves: Vec<RocCurve> = runs
                .iter()
                .flat_map(|r| r.algos.iter().filter(|a| a.algo == algo).map(|a| a.curve.clone()))
                .collect();
            aggregate.push((algo.name().to_string(), aggregate_runs(&curves)?));
        }
    }
    let result = ExperimentResult { runs, aggregate };

    if let Some(dir) = &cfg.out_dir {
        if !result.aggregate.is_empty() {
            write(&dir.join("aggregate.csv"), result.aggregate_csv())?;
        }
        write(&dir.join("postproc.csv"), postproc_summary_csv(&result))?;
        if cfg.algorithms.contains(&Algorithm::MiAce) {
            let reports = result
                .runs
                .iter()
                .flat_map(|r| r.algos.iter().filter(|a| a.algo == Algorithm::MiAce))
                .map(|a| report_signature(&a.model))
                .collect::<Result<Vec<_>>>()?;
            let spread = signature_spread(&reports)?;
            let mut buf = Vec::new();
            spread.write_csv(&mut buf).expect("writing to memory");
            write(&dir.join("signature_spread.csv"), buf)?;
        }
        let resolved = serde_json::to_string_pretty(cfg).expect("config serializes");
        write(&dir.join("config.json"), resolved)?;
        let marker = dir.join(".partial");
        std::fs::remove_file(&marker).map_err(|e| Error::io(&marker, e)).stage("output")?;
    }
    Ok(result)
}

/// Mean post-processing rates over runs, one row per algorithm and target FPR.
pub fn postproc_summary_csv(result: &ExperimentResult) -> String {
    let mut s = String::from(
        "algorithm,target_fpr,fpr,tpr,ecc_fpr,ecc_tpr,size_fpr,size_tpr,filtered_fpr,filtered_tpr\n",
    );
    let Some(first) = result.runs.first() else {
        return s;
    };
    for (k, a) in first.algos.iter().enumerate() {
        for (j, row) in a.postproc.iter().enumerate() {
            let rows: Vec<&PostprocRow> = result.runs.iter().map(|r| &r.algos[k].postproc[j]).collect();
            let n = rows.len() as f64;
            let mean = |f: fn(&PostprocRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
            let _ = writeln!(
                s,
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                a.algo,
                row.target_fpr,
                mean(|r| r.fpr),
                mean(|r| r.tpr),
                mean(|r| r.ecc_fpr),
                mean(|r| r.ecc_tpr),
                mean(|r| r.size_fpr),
                mean(|r| r.size_tpr),
                mean(|r| r.filtered_fpr),
                mean(|r| r.filtered_tpr),
            );
        }
    }
    s
}

/// Loads the manifests named in `cfg` and runs the experiment.
pub fn run_experiment(cfg: &PipelineConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let train_path = cfg
        .train
        .as_ref()
        .ok_or_else(|| Error::InvalidParams("no training manifest configured".into()))?;
    with_workers(cfg.workers, || {
        let train_entries = load_manifest(train_path).stage("preprocess")?;
        let train = load_dataset(&train_entries, &cfg.preprocess, Parallelism::default())?;
        let test = match &cfg.test {
            Some(p) if p != train_path => {
                let entries = load_manifest(p).stage("preprocess")?;
                load_dataset(&entries, &cfg.preprocess, Parallelism::default())?
            }
            _ => train.clone(),
        };
        run_with_data(cfg, &train, &test)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub gamma_exp: i32,
    pub c_exp: i32,
    pub f_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub algorithm: Algorithm,
    pub cells: Vec<SweepCell>,
    /// Index of the best cell; ties go to the earliest.
    pub best: usize,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("gamma_exp,c_exp,gamma,c,f_score,best\n");
        for (k, c) in self.cells.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.6},{}",
                c.gamma_exp,
                c.c_exp,
                2f64.powi(c.gamma_exp),
                2f64.powi(c.c_exp),
                c.f_score,
                u8::from(k == self.best)
            );
        }
        s
    }
}

/// F-score grid over `(γ, C)` for an SVM-based algorithm: train on the run-0
/// bags, binarize validation maps at the algorithm's decision threshold.
pub fn sweep_with_data(
    cfg: &PipelineConfig,
    train: &[ProcessedImage],
    validation: &[ProcessedImage],
) -> Result<SweepTable> {
    cfg.validate()?;
    let algo = cfg.sweep.algorithm;
    if !matches!(algo, Algorithm::MiSvm | Algorithm::Svm) {
        return Err(Error::InvalidParams(format!(
            "the (gamma, C) sweep applies to misvm and svm, not {algo}"
        )));
    }
    let masks = test_masks(validation)?;
    let bags = run_bags(train, &cfg.bags, cfg.seed, 0)?;
    let mil_bags: Vec<MilBag> = bags.iter().map(|b| b.to_mil(&cfg.features)).collect();
    let train_seed = seed::derive(cfg.seed, 0, "train");
    let grid: Vec<(i32, i32)> = cfg
        .sweep
        .gammas()
        .into_iter()
        .flat_map(|g| cfg.sweep.cs().into_iter().map(move |c| (g, c)))
        .collect();
    if grid.is_empty() {
        return Err(Error::InvalidParams("empty sweep grid".into()));
    }
    let cells = with_workers(cfg.workers, || {
        Parallelism::default().try_map(&grid, |&(g, c)| {
            let mut params = cfg.train_params();
            params.svm.c = 2f64.powi(c);
            params.svm.kernel = Kernel::Rbf {
                gamma: 2f64.powi(g),
            };
            let model = mil::train(algo, &mil_bags, &params, &cfg.features, train_seed)
                .map_err(|e| e.at("train"))?;
            let (mut tp, mut fp, mut fneg) = (0, 0, 0);
            for (img, mask) in validation.iter().zip(&masks) {
                let map = confidence_map(&model, img)?;
                let pred = binarize(&map, algo.decision_threshold());
                for (&p, &t) in pred.bits().iter().zip(mask.bits()) {
                    match (p, t) {
                        (true, true) => tp += 1,
                        (true, false) => fp += 1,
                        (false, true) => fneg += 1,
                        _ => {}
                    }
                }
            }
            Ok::<_, Error>(SweepCell {
                gamma_exp: g,
                c_exp: c,
                f_score: f_score_counts(tp, fp, fneg),
            })
        })
    })?;
    let mut best = 0;
    for (k, c) in cells.iter().enumerate() {
        if c.f_score > cells[best].f_score {
            best = k;
        }
    }
    Ok(SweepTable {
        algorithm: algo,
        cells,
        best,
    })
}

/// Loads manifests and runs the sweep, writing `sweep.csv` under `out_dir`.
pub fn sweep(cfg: &PipelineConfig) -> Result<SweepTable> {
    cfg.validate()?;
    let train_path = cfg
        .train
        .as_ref()
        .ok_or_else(|| Error::InvalidParams("no training manifest configured".into()))?;
    let table = with_workers(cfg.workers, || {
        let train = load_dataset(&load_manifest(train_path).stage("preprocess")?, &cfg.preprocess, Parallelism::default())?;
        let val_path = cfg.validation.as_ref().or(cfg.test.as_ref());
        let validation = match val_path {
            Some(p) if p != train_path => load_dataset(
                &load_manifest(p).stage("preprocess")?,
                &cfg.preprocess,
                Parallelism::default(),
            )?,
            _ => train.clone(),
        };
        sweep_with_data(cfg, &train, &validation)
    })?;
    if let Some(dir) = &cfg.out_dir {
        mkdir(dir)?;
        write(&dir.join("sweep.csv"), table.to_csv())?;
    }
    Ok(table)
}
