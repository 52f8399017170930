//! Multiple instance learners and the persisted model format.
//!
//! Every learner consumes [`MilBag`]s (feature vectors already projected
//! through the model's [`FeatureMask`]). The two baselines, `svm` and `rf`,
//! ignore the bag structure and give every instance its bag's label.

mod ace;
mod miforests;
mod misvm;
mod signature;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use ace::{ace_confidence, miace_train, miace_train_with, AceFit, AceModel};
pub use miforests::{anneal_probability, miforests_train, AnnealSchedule, MiForestsFit};
pub use misvm::{misvm_train, MiSvmFit};
pub use signature::{report_signature, signature_spread, SignatureReport, SignatureSpread};

use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::features::{FeatureMask, FEATURE_COUNT};
use crate::learners::{forest_train, smo_train, ForestModel, ForestParams, SvmModel, SvmParams};

/// A labeled multiset of feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilBag {
    pub label: bool,
    pub instances: Vec<Vec<f64>>,
}

impl MilBag {
    pub fn new(label: bool, instances: Vec<Vec<f64>>) -> Self {
        Self { label, instances }
    }
}

/// Validates a training set and returns its dimensionality.
pub(crate) fn check_bags(bags: &[MilBag]) -> Result<usize> {
    let first = bags
        .iter()
        .flat_map(|b| b.instances.first())
        .next()
        .ok_or(Error::EmptyTrainingSet)?;
    let dim = first.len();
    if dim == 0 {
        return Err(Error::InvalidParams("instances have no features".into()));
    }
    for b in bags {
        if b.instances.is_empty() {
            return Err(Error::InvalidParams("bags must not be empty".into()));
        }
        if let Some(bad) = b.instances.iter().find(|x| x.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        if b.instances.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite feature value".into()));
        }
    }
    if !bags.iter().any(|b| b.label) || bags.iter().all(|b| b.label) {
        return Err(Error::SingleClass);
    }
    Ok(dim)
}

/// Flattens bags into instance rows with their bag labels.
pub(crate) fn flatten(bags: &[MilBag]) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for b in bags {
        for inst in &b.instances {
            x.push(inst.clone());
            y.push(b.label);
        }
    }
    (x, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "miace")]
    MiAce,
    #[serde(rename = "misvm")]
    MiSvm,
    #[serde(rename = "miforests")]
    MiForests,
    #[serde(rename = "svm")]
    Svm,
    #[serde(rename = "rf")]
    Rf,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::MiAce,
        Algorithm::MiSvm,
        Algorithm::MiForests,
        Algorithm::Svm,
        Algorithm::Rf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::MiAce => "miace",
            Algorithm::MiSvm => "misvm",
            Algorithm::MiForests => "miforests",
            Algorithm::Svm => "svm",
            Algorithm::Rf => "rf",
        }
    }

    pub fn is_mil(self) -> bool {
        matches!(self, Algorithm::MiAce | Algorithm::MiSvm | Algorithm::MiForests)
    }

    /// Threshold that turns this algorithm's confidence into a hard label.
    pub fn decision_threshold(self) -> f64 {
        match self {
            Algorithm::MiSvm | Algorithm::Svm => 0.0,
            Algorithm::MiForests | Algorithm::Rf => 0.5,
            Algorithm::MiAce => 0.0,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::InvalidParams(format!(
                    "unknown algorithm {s:?} (expected miace, misvm, miforests, svm or rf)"
                ))
            })
    }
}

/// Hyperparameters for every learner; each algorithm reads its own part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub svm: SvmParams,
    pub misvm_max_iters: usize,
    pub forest: ForestParams,
    pub schedule: AnnealSchedule,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            svm: SvmParams::default(),
            misvm_max_iters: 50,
            forest: ForestParams::default(),
            schedule: AnnealSchedule::default(),
        }
    }
}

impl TrainParams {
    pub fn with_parallelism(mut self, p: Parallelism) -> Self {
        self.svm.parallelism = p;
        self.forest.parallelism = p;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelPayload {
    Ace(AceModel),
    Svm(SvmModel),
    Forest(ForestModel),
}

impl ModelPayload {
    fn dim(&self) -> usize {
        match self {
            ModelPayload::Ace(m) => m.dim,
            ModelPayload::Svm(m) => m.dim,
            ModelPayload::Forest(m) => m.dim,
        }
    }
}

/// A trained model plus everything needed to apply it to new images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub algo: Algorithm,
    pub params: TrainParams,
    pub seed: u64,
    pub feature_mask: FeatureMask,
    /// How instance features were scaled before training.
    pub feature_scaling: String,
    pub color_space: String,
    pub payload: ModelPayload,
}

pub const FEATURE_SCALING: &str = "per-image power of ten";
pub const COLOR_SPACE: &str = "sRGB D65 -> CIELAB";

impl TrainedModel {
    pub fn new(
        algo: Algorithm,
        params: TrainParams,
        seed: u64,
        feature_mask: FeatureMask,
        payload: ModelPayload,
    ) -> Result<Self> {
        if feature_mask.len() != payload.dim() {
            return Err(Error::DimensionMismatch {
                expected: feature_mask.len(),
                got: payload.dim(),
            });
        }
        Ok(Self {
            algo,
            params,
            seed,
            feature_mask,
            feature_scaling: FEATURE_SCALING.into(),
            color_space: COLOR_SPACE.into(),
            payload,
        })
    }

    pub fn dim(&self) -> usize {
        self.payload.dim()
    }

    /// Confidence for an already projected feature vector.
    pub fn confidence(&self, x: &[f64]) -> Result<f64> {
        match &self.payload {
            ModelPayload::Ace(m) => m.confidence(x),
            ModelPayload::Svm(m) => m.decision(x),
            ModelPayload::Forest(m) => m.predict(x),
        }
    }

    /// Confidence for a full 18-feature vector, projected through the mask.
    pub fn score(&self, features: &[f64; FEATURE_COUNT]) -> f64 {
        let x = self.feature_mask.project(features);
        match &self.payload {
            ModelPayload::Ace(m) => m.confidence_unchecked(&x),
            ModelPayload::Svm(m) => m.decision_unchecked(&x),
            ModelPayload::Forest(m) => m.predict_unchecked(&x),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialize")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: TrainedModel = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        if model.feature_mask.len() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.feature_mask.len(),
                got: model.dim(),
            });
        }
        Ok(model)
    }
}

/// Trains `algo` on bags whose vectors were projected through `mask`.
pub fn train(
    algo: Algorithm,
    bags: &[MilBag],
    params: &TrainParams,
    mask: &FeatureMask,
    seed: u64,
) -> Result<TrainedModel> {
    let dim = check_bags(bags)?;
    if dim != mask.len() {
        return Err(Error::DimensionMismatch {
            expected: mask.len(),
            got: dim,
        });
    }
    let payload = match algo {
        Algorithm::MiAce => {
            ModelPayload::Ace(miace_train_with(bags, params.forest.parallelism)?.model)
        }
        Algorithm::MiSvm => {
            ModelPayload::Svm(misvm_train(bags, &params.svm, params.misvm_max_iters, seed)?.model)
        }
        Algorithm::MiForests => ModelPayload::Forest(
            miforests_train(bags, &params.forest, &params.schedule, seed)?.model,
        ),
        Algorithm::Svm => {
            let (x, y) = flatten(bags);
            ModelPayload::Svm(smo_train(&x, &y, &params.svm, seed)?)
        }
        Algorithm::Rf => {
            let (x, y) = flatten(bags);
            ModelPayload::Forest(forest_train(&x, &y, &params.forest, seed)?)
        }
    };
    TrainedModel::new(algo, params.clone(), seed, mask.clone(), payload)
}
