//! Per-image processing shared by training, prediction and evaluation.

use serde::{Deserialize, Serialize};

use crate::bags::{regroup_bags, Bag, BagParams, ImageInstances};
use crate::error::{Result, StageExt};
use crate::features::{extract_features, scale_features, FeatureScale, Instance};
use crate::mil::TrainedModel;
use crate::postproc::ConfidenceMap;
use crate::raster::{destripe, rgb_to_lab, LabImage, Mask, RasterImage};
use crate::superpixels::{slic_segment_lab, SlicParams, SuperpixelMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessParams {
    /// Target superpixel size in pixels; `K₀ = H·W / superpixel_size`.
    pub superpixel_size: usize,
    pub compactness: f64,
    pub max_iters: usize,
    pub destripe: bool,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        Self {
            superpixel_size: 100,
            compactness: 10.0,
            max_iters: 10,
            destripe: true,
        }
    }
}

impl PreprocessParams {
    pub fn slic(&self, pixels: usize) -> SlicParams {
        SlicParams::for_size(pixels, self.superpixel_size, self.compactness, self.max_iters)
    }
}

/// An image after destriping, superpixelization and feature extraction.
#[derive(Debug, Clone)]
pub struct ProcessedImage {
    pub id: String,
    pub label: bool,
    pub image: RasterImage,
    pub lab: LabImage,
    pub spmap: SuperpixelMap,
    /// Scaled instances indexed by superpixel id.
    pub instances: Vec<Instance>,
    pub scale: FeatureScale,
    pub mask: Option<Mask>,
}

impl ProcessedImage {
    pub fn bags(&self, params: &BagParams, seed: u64) -> Result<Vec<Bag>> {
        regroup_bags(
            &ImageInstances {
                id: &self.id,
                label: self.label,
                instances: &self.instances,
                spmap: &self.spmap,
                lab: &self.lab,
                mask: self.mask.as_ref(),
            },
            params,
            seed,
        )
        .stage("bags")
    }
}

pub fn preprocess(
    id: impl Into<String>,
    index: usize,
    image: &RasterImage,
    label: bool,
    mask: Option<Mask>,
    params: &PreprocessParams,
) -> Result<ProcessedImage> {
    let image = if params.destripe {
        destripe(image)
    } else {
        image.clone()
    };
    let lab = rgb_to_lab(&image);
    let spmap = slic_segment_lab(&lab, &params.slic(image.pixel_count())).stage("superpixels")?;
    let raw = extract_features(&image, &lab, &spmap, index).stage("features")?;
    let (instances, scale) = scale_features(raw).stage("features")?;
    Ok(ProcessedImage {
        id: id.into(),
        label,
        image,
        lab,
        spmap,
        instances,
        scale,
        mask,
    })
}

/// Per-superpixel confidences broadcast to pixels.
pub fn confidence_map(model: &TrainedModel, img: &ProcessedImage) -> Result<ConfidenceMap> {
    let scores: Vec<f64> = img.instances.iter().map(|i| model.score(&i.features)).collect();
    ConfidenceMap::from_superpixels(&img.spmap, &scores).stage("predict")
}
