//! Bag construction at image, small-bag and instance granularity, and the
//! green-histogram downsampling of image bags.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMask, Instance};
use crate::mil::MilBag;
use crate::raster::{LabImage, Mask};
use crate::seed;
use crate::superpixels::{slic_segment_lab, SlicParams, SuperpixelMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bag {
    pub id: String,
    pub label: bool,
    pub instances: Vec<Instance>,
}

impl Bag {
    /// Scaled features projected through `mask`.
    pub fn to_mil(&self, mask: &FeatureMask) -> MilBag {
        MilBag::new(
            self.label,
            self.instances.iter().map(|i| mask.project(&i.features)).collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum BagMode {
    /// One bag per image, labeled with the image label.
    ImageLevel,
    /// Groups of about `group_size` adjacent superpixels.
    SmallBag { group_size: usize },
    /// One sampled superpixel per bag, labeled from the root mask.
    InstanceLevel,
}

impl Default for BagMode {
    fn default() -> Self {
        BagMode::ImageLevel
    }
}

impl BagMode {
    pub fn needs_mask(self) -> bool {
        !matches!(self, BagMode::ImageLevel)
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "image" | "image-level" => Ok(BagMode::ImageLevel),
            "instance" | "instance-level" => Ok(BagMode::InstanceLevel),
            "small" | "small-bag" => Ok(BagMode::SmallBag { group_size: 10 }),
            other => {
                if let Some(n) = other.strip_prefix("small-bag:") {
                    let group_size = n.parse().map_err(|_| {
                        Error::InvalidParams(format!("bad small-bag group size {n:?}"))
                    })?;
                    return Ok(BagMode::SmallBag { group_size });
                }
                Err(Error::InvalidParams(format!(
                    "unknown bag mode {other:?} (expected image-level, small-bag[:N] or instance-level)"
                )))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BagParams {
    #[serde(flatten)]
    pub mode: BagMode,
    /// Apply green-histogram downsampling to image-level bags.
    pub downsample: bool,
    pub bins: usize,
    /// Fraction of a superpixel's pixels that must be root for it to count as root.
    pub root_fraction: f64,
    /// Root and soil singletons sampled per image in instance-level mode.
    pub instances_per_class: usize,
    /// Positive and negative small bags sampled per image.
    pub bags_per_class: usize,
    pub coarse_compactness: f64,
}

impl Default for BagParams {
    fn default() -> Self {
        Self {
            mode: BagMode::ImageLevel,
            downsample: true,
            bins: 200,
            root_fraction: 0.5,
            instances_per_class: 1000,
            bags_per_class: 100,
            coarse_compactness: 10.0,
        }
    }
}

impl BagParams {
    pub fn validate(&self) -> Result<()> {
        if let BagMode::SmallBag { group_size } = self.mode {
            if group_size < 2 {
                return Err(Error::InvalidParams(format!(
                    "small-bag group size must be at least 2, got {group_size}"
                )));
            }
        }
        if self.bins == 0 {
            return Err(Error::InvalidParams("downsampling needs at least one bin".into()));
        }
        if !(self.root_fraction > 0.0 && self.root_fraction <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "root_fraction must lie in (0, 1], got {}",
                self.root_fraction
            )));
        }
        Ok(())
    }
}

/// Green-histogram bin of a raw mean-G value: `bins` equal bins over [0, 255].
pub fn green_bin(v: f64, bins: usize) -> usize {
    let t = (v.clamp(0.0, 255.0) / 255.0 * bins as f64).floor() as usize;
    t.min(bins - 1)
}

/// Keeps one uniformly drawn instance per occupied green bin (200 bins by
/// default), ordered by bin.
pub fn downsample_bag(bag: &Bag, seed: u64) -> Bag {
    downsample_bag_bins(bag, 200, seed)
}

pub fn downsample_bag_bins(bag: &Bag, bins: usize, seed: u64) -> Bag {
    let mut by_bin: Vec<Vec<usize>> = vec![Vec::new(); bins.max(1)];
    for (k, inst) in bag.instances.iter().enumerate() {
        by_bin[green_bin(inst.raw_mean_green(), bins.max(1))].push(k);
    }
    let mut rng = seed::rng(seed);
    let instances = by_bin
        .iter()
        .filter(|members| !members.is_empty())
        .map(|members| bag.instances[members[rng.random_range(0..members.len())]].clone())
        .collect();
    Bag {
        id: bag.id.clone(),
        label: bag.label,
        instances,
    }
}

/// Root / soil label per superpixel: root when at least `fraction` of its
/// pixels are in the mask.
pub fn superpixel_root_labels(spmap: &SuperpixelMap, mask: &Mask, fraction: f64) -> Vec<bool> {
    spmap
        .iter_members()
        .map(|members| {
            let hits = members
                .iter()
                .filter(|&&(r, c)| mask.get(r as usize, c as usize))
                .count();
            hits as f64 >= fraction * members.len() as f64
        })
        .collect()
}

/// Everything bag construction needs to know about one preprocessed image.
pub struct ImageInstances<'a> {
    pub id: &'a str,
    pub label: bool,
    /// Scaled instances, indexed by superpixel id.
    pub instances: &'a [Instance],
    pub spmap: &'a SuperpixelMap,
    pub lab: &'a LabImage,
    pub mask: Option<&'a Mask>,
}

/// Builds the bags one image contributes under `params.mode`.
pub fn regroup_bags(img: &ImageInstances<'_>, params: &BagParams, seed: u64) -> Result<Vec<Bag>> {
    params.validate()?;
    if img.instances.len() != img.spmap.count() {
        return Err(Error::InvalidParams(format!(
            "{} instances for {} superpixels",
            img.instances.len(),
            img.spmap.count()
        )));
    }
    if img.instances.is_empty() {
        return Err(Error::InvalidParams(format!("image {} has no instances", img.id)));
    }
    if params.mode == BagMode::ImageLevel {
        let bag = Bag {
            id: img.id.to_string(),
            label: img.label,
            instances: img.instances.to_vec(),
        };
        return Ok(vec![if params.downsample {
            downsample_bag_bins(&bag, params.bins, seed)
        } else {
            bag
        }]);
    }

    let mask = img.mask.ok_or(Error::MissingMask)?;
    if (mask.height(), mask.width()) != (img.spmap.height(), img.spmap.width()) {
        return Err(Error::InvalidImage(format!(
            "mask for {} is {}x{}, image is {}x{}",
            img.id,
            mask.height(),
            mask.width(),
            img.spmap.height(),
            img.spmap.width()
        )));
    }
    let root = superpixel_root_labels(img.spmap, mask, params.root_fraction);
    let mut rng = seed::rng(seed);

    match params.mode {
        BagMode::InstanceLevel => {
            let mut bags = Vec::new();
            for class in [true, false] {
                let pool: Vec<usize> = (0..root.len()).filter(|&k| root[k] == class).collect();
                for k in sample(&pool, params.instances_per_class, &mut rng) {
                    bags.push(Bag {
                        id: format!("{}#sp{}", img.id, k),
                        label: class,
                        instances: vec![img.instances[k].clone()],
                    });
                }
            }
            Ok(bags)
        }
        BagMode::SmallBag { group_size } => {
            let groups = coarse_groups(img, group_size, params.coarse_compactness)?;
            let mut bags = Vec::new();
            for class in [true, false] {
                let pool: Vec<usize> = (0..groups.len())
                    .filter(|&g| groups[g].iter().any(|&k| root[k]) == class)
                    .collect();
                for g in sample(&pool, params.bags_per_class, &mut rng) {
                    bags.push(Bag {
                        id: format!("{}#group{}", img.id, g),
                        label: class,
                        instances: groups[g].iter().map(|&k| img.instances[k].clone()).collect(),
                    });
                }
            }
            Ok(bags)
        }
        BagMode::ImageLevel => unreachable!(),
    }
}

/// Up to `n` elements of `pool` drawn without replacement, in pool order.
fn sample(pool: &[usize], n: usize, rng: &mut seed::Rng) -> Vec<usize> {
    if pool.len() <= n {
        return pool.to_vec();
    }
    let mut picked = index::sample(rng, pool.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| pool[i]).collect()
}

/// Groups fine superpixels by the coarse superpixel holding most of their
/// pixels. Returns the non-empty groups in coarse-label order.
fn coarse_groups(
    img: &ImageInstances<'_>,
    group_size: usize,
    compactness: f64,
) -> Result<Vec<Vec<usize>>> {
    let fine = img.spmap.count();
    let params = SlicParams {
        target_count: (fine / group_size).max(1),
        compactness,
        max_iters: 10,
    };
    let coarse = slic_segment_lab(img.lab, &params)?;
    let mut groups = vec![Vec::new(); coarse.count()];
    for (k, members) in img.spmap.iter_members().enumerate() {
        let mut votes: Vec<(u32, usize)> = Vec::new();
        for &(r, c) in members {
            let g = coarse.label(r as usize, c as usize);
            match votes.iter_mut().find(|v| v.0 == g) {
                Some(v) => v.1 += 1,
                None => votes.push((g, 1)),
            }
        }
        let best = votes
            .iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .expect("superpixels are non-empty");
        groups[best.0 as usize].push(k);
    }
    groups.retain(|g| !g.is_empty());
    Ok(groups)
}
