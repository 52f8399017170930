//! The 18-dimensional superpixel descriptor: mean, population variance and
//! Shannon entropy of each RGB and LAB band, plus per-image scaling by order
//! of magnitude.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{LabImage, RasterImage};
use crate::superpixels::SuperpixelMap;

pub const FEATURE_COUNT: usize = 18;

/// Feature names in storage order. Training, prediction and signature
/// reports all index through this table.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "mean-R", "mean-G", "mean-B", "mean-L", "mean-a", "mean-b", //
    "var-R", "var-G", "var-B", "var-L", "var-a", "var-b", //
    "H-R", "H-G", "H-B", "H-L", "H-a", "H-b",
];

pub const MEAN_R: usize = 0;
pub const MEAN_G: usize = 1;
pub const MEAN_B: usize = 2;
pub const MEAN_L: usize = 3;
pub const MEAN_LAB_B: usize = 5;
pub const VAR_R: usize = 6;
pub const VAR_G: usize = 7;
pub const VAR_B: usize = 8;
pub const ENTROPY_A: usize = 16;
pub const ENTROPY_LAB_B: usize = 17;

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|&n| n == name)
}

/// One superpixel's descriptor. `features` holds the scaled values used by
/// the learners; `raw` keeps the unscaled values (green-histogram binning
/// needs raw mean-G).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub features: [f64; FEATURE_COUNT],
    pub raw: [f64; FEATURE_COUNT],
    pub superpixel: usize,
    pub image: usize,
}

impl Instance {
    pub fn raw_mean_green(&self) -> f64 {
        self.raw[MEAN_G]
    }
}

/// Per-feature divisors, each an integer power of ten.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScale(pub [f64; FEATURE_COUNT]);

/// Ordered subset of feature indices used for training and prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct FeatureMask(Vec<usize>);

impl FeatureMask {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidParams("feature mask is empty".into()));
        }
        let mut seen = [false; FEATURE_COUNT];
        for &i in &indices {
            if i >= FEATURE_COUNT {
                return Err(Error::InvalidParams(format!("feature index {i} out of range")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidParams(format!("feature index {i} repeated")));
            }
        }
        Ok(Self(indices))
    }

    pub fn all() -> Self {
        Self((0..FEATURE_COUNT).collect())
    }

    /// Everything except mean-b.
    pub fn drop_mean_lab_b() -> Self {
        Self((0..FEATURE_COUNT).filter(|&i| i != MEAN_LAB_B).collect())
    }

    /// Means of R, G, B, L; variances of R, G, B; entropies of a and b.
    pub fn nine() -> Self {
        Self(vec![
            MEAN_R,
            MEAN_G,
            MEAN_B,
            MEAN_L,
            VAR_R,
            VAR_G,
            VAR_B,
            ENTROPY_A,
            ENTROPY_LAB_B,
        ])
    }

    /// Parses `all`, `17`, `9`, or a comma-separated list of feature names.
    pub fn parse(spec: &str) -> Result<Self> {
        match spec.trim() {
            "all" | "18" => Ok(Self::all()),
            "17" => Ok(Self::drop_mean_lab_b()),
            "9" => Ok(Self::nine()),
            list => {
                let idx = list
                    .split(',')
                    .map(|n| {
                        feature_index(n.trim()).ok_or_else(|| {
                            Error::InvalidParams(format!("unknown feature name {n:?}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::new(idx)
            }
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.0.iter().map(|&i| FEATURE_NAMES[i]).collect()
    }

    pub fn project(&self, features: &[f64; FEATURE_COUNT]) -> Vec<f64> {
        self.0.iter().map(|&i| features[i]).collect()
    }
}

impl Default for FeatureMask {
    fn default() -> Self {
        Self::all()
    }
}

impl TryFrom<Vec<usize>> for FeatureMask {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FeatureMask> for Vec<usize> {
    fn from(m: FeatureMask) -> Self {
        m.0
    }
}

/// Maps a band value onto the [0, 255] byte range used for entropy bins.
#[inline]
fn entropy_bin(v: f64) -> usize {
    v.clamp(0.0, 255.0).floor() as usize
}

fn entropy(hist: &[u32; 256], n: usize) -> f64 {
    let n = n as f64;
    -hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>()
}

/// Raw (unscaled) descriptors for every superpixel of one image.
pub fn extract_features(
    image: &RasterImage,
    lab: &LabImage,
    spmap: &SuperpixelMap,
    image_id: usize,
) -> Result<Vec<Instance>> {
    if (image.height(), image.width()) != (spmap.height(), spmap.width())
        || (lab.height(), lab.width()) != (spmap.height(), spmap.width())
    {
        return Err(Error::InvalidParams(
            "image, LAB image and superpixel map shapes differ".into(),
        ));
    }
    let mut out = Vec::with_capacity(spmap.count());
    for (id, members) in spmap.iter_members().enumerate() {
        let n = members.len();
        let mut sum = [0.0f64; 6];
        let mut hist = [[0u32; 256]; 6];
        let mut values: Vec<[f64; 6]> = Vec::with_capacity(n);
        for &(r, c) in members {
            let rgb = image.pixel(r as usize, c as usize);
            let l = lab.pixel(r as usize, c as usize);
            let v = [rgb[0], rgb[1], rgb[2], l[0], l[1], l[2]];
            let binned = [
                rgb[0],
                rgb[1],
                rgb[2],
                l[0] * 2.55,
                l[1] + 128.0,
                l[2] + 128.0,
            ];
            for b in 0..6 {
                sum[b] += v[b];
                hist[b][entropy_bin(binned[b])] += 1;
            }
            values.push(v);
        }
        let mean = sum.map(|s| s / n as f64);
        let mut var = [0.0f64; 6];
        for v in &values {
            for b in 0..6 {
                var[b] += (v[b] - mean[b]).powi(2);
            }
        }
        let var = var.map(|s| s / n as f64);
        let mut raw = [0.0; FEATURE_COUNT];
        for b in 0..6 {
            raw[b] = mean[b];
            raw[6 + b] = var[b];
            raw[12 + b] = entropy(&hist[b], n);
        }
        out.push(Instance {
            features: raw,
            raw,
            superpixel: id,
            image: image_id,
        });
    }
    Ok(out)
}

/// Smallest integer power of ten that is ≥ `m`; 1 for `m == 0`.
pub fn order_of_magnitude(m: f64) -> f64 {
    if m <= 0.0 || !m.is_finite() {
        return 1.0;
    }
    let mut e = m.log10().ceil() as i32;
    while 10f64.powi(e) < m {
        e += 1;
    }
    while 10f64.powi(e - 1) >= m {
        e -= 1;
    }
    10f64.powi(e)
}

/// Per-image scale from the maximum absolute raw value of each feature.
pub fn feature_scale(instances: &[Instance]) -> FeatureScale {
    let mut max = [0.0f64; FEATURE_COUNT];
    for inst in instances {
        for i in 0..FEATURE_COUNT {
            max[i] = max[i].max(inst.raw[i].abs());
        }
    }
    FeatureScale(max.map(order_of_magnitude))
}

/// Divides each instance's raw features by the image scale, writing the
/// result into `features`.
pub fn scale_features(mut instances: Vec<Instance>) -> Result<(Vec<Instance>, FeatureScale)> {
    if instances.is_empty() {
        return Err(Error::InvalidParams("cannot scale an empty instance list".into()));
    }
    let scale = feature_scale(&instances);
    for inst in &mut instances {
        for i in 0..FEATURE_COUNT {
            inst.features[i] = inst.raw[i] / scale.0[i];
        }
    }
    Ok((instances, scale))
}

/// Writes `image,superpixel,<18 scaled features>` rows.
pub fn write_instances_csv(
    instances: &[Instance],
    image_names: &[String],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("image,superpixel");
    for name in FEATURE_NAMES {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for inst in instances {
        let name = image_names
            .get(inst.image)
            .cloned()
            .unwrap_or_else(|| inst.image.to_string());
        out.push_str(&format!("{name},{}", inst.superpixel));
        for v in inst.features {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}
