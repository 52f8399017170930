//! Confidence maps, thresholding, and connected-component filtering by
//! size and eccentricity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Mask;
use crate::superpixels::SuperpixelMap;

/// Per-pixel real-valued root confidence, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl ConfidenceMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || values.len() != height * width {
            return Err(Error::InvalidParams(format!(
                "confidence map of {height}x{width} needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("confidence values must be finite".into()));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    /// Broadcasts one confidence per superpixel to its member pixels.
    pub fn from_superpixels(spmap: &SuperpixelMap, confidence: &[f64]) -> Result<Self> {
        if confidence.len() != spmap.count() {
            return Err(Error::DimensionMismatch {
                expected: spmap.count(),
                got: confidence.len(),
            });
        }
        let values = spmap.labels().iter().map(|&l| confidence[l as usize]).collect();
        Self::new(spmap.height(), spmap.width(), values)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }
}

fn check_shape(map: &ConfidenceMap, mask: &Mask) -> Result<()> {
    if (map.height(), map.width()) != (mask.height(), mask.width()) {
        return Err(Error::InvalidImage(format!(
            "confidence map is {}x{} but mask is {}x{}",
            map.height(),
            map.width(),
            mask.height(),
            mask.width()
        )));
    }
    Ok(())
}

/// Smallest threshold `θ` whose pooled false positive rate `#{soil > θ} / #soil`
/// is at most `target_fpr`. The returned `θ` is always one of the soil
/// confidence values.
pub fn select_threshold_for_fpr(maps: &[(&ConfidenceMap, &Mask)], target_fpr: f64) -> Result<f64> {
    if !(target_fpr > 0.0 && target_fpr < 1.0) {
        return Err(Error::InvalidParams(format!(
            "target FPR must lie in (0, 1), got {target_fpr}"
        )));
    }
    let mut neg = Vec::new();
    for (map, mask) in maps {
        check_shape(map, mask)?;
        neg.extend(
            map.values()
                .iter()
                .zip(mask.bits())
                .filter(|(_, &root)| !root)
                .map(|(&v, _)| v),
        );
    }
    if neg.is_empty() {
        return Err(Error::NoNegativePixels);
    }
    neg.sort_by(|a, b| b.total_cmp(a));
    let n = neg.len();
    // Walk distinct values from the top; `above` counts values strictly greater.
    let mut best = neg[0];
    let mut k = 0;
    while k < n {
        let v = neg[k];
        if (k as f64 / n as f64) > target_fpr {
            break;
        }
        best = v;
        while k < n && neg[k] == v {
            k += 1;
        }
    }
    Ok(best)
}

/// Pixel set iff confidence `> θ`.
pub fn binarize(map: &ConfidenceMap, theta: f64) -> Mask {
    let bits = map.values().iter().map(|&v| v > theta).collect();
    Mask::new(map.height(), map.width(), bits).expect("shape preserved")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentStats {
    pub id: usize,
    pub size: usize,
    pub eccentricity: f64,
    /// Member pixels as (row, col), in discovery order.
    pub pixels: Vec<(u32, u32)>,
}

/// 8-connected components, numbered in raster order of their first pixel.
pub fn connected_components(mask: &Mask) -> Vec<ComponentStats> {
    let (h, w) = (mask.height(), mask.width());
    let mut seen = vec![false; h * w];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..h * w {
        if !mask.bits()[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        while let Some(p) = stack.pop() {
            let (r, c) = (p / w, p % w);
            pixels.push((r as u32, c as u32));
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                        continue;
                    }
                    let q = nr as usize * w + nc as usize;
                    if mask.bits()[q] && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        out.push(ComponentStats {
            id: out.len(),
            size: pixels.len(),
            eccentricity: component_eccentricity(&pixels),
            pixels,
        });
    }
    out
}

/// Eccentricity `sqrt(1 − λ₂/λ₁)` of the ellipse with the same second
/// central moments as the pixel coordinates (discrete covariance).
pub fn component_eccentricity(pixels: &[(u32, u32)]) -> f64 {
    if pixels.len() < 2 {
        return 0.0;
    }
    let n = pixels.len() as f64;
    let (mut sr, mut sc) = (0.0, 0.0);
    for &(r, c) in pixels {
        sr += r as f64;
        sc += c as f64;
    }
    let (mr, mc) = (sr / n, sc / n);
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for &(r, col) in pixels {
        let dr = r as f64 - mr;
        let dc = col as f64 - mc;
        a += dr * dr;
        b += dr * dc;
        c += dc * dc;
    }
    let (a, b, c) = (a / n, b / n, c / n);
    let half_tr = (a + c) / 2.0;
    let disc = (((a - c) / 2.0).powi(2) + b * b).sqrt();
    let l1 = half_tr + disc;
    let l2 = (half_tr - disc).max(0.0);
    if l1 <= 0.0 {
        return 0.0;
    }
    (1.0 - l2 / l1).clamp(0.0, 1.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterMode {
    /// Remove a component failing either criterion.
    #[default]
    Or,
    /// Remove a component only when it fails both.
    And,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterParams {
    pub min_size: usize,
    pub min_ecc: f64,
    pub mode: FilterMode,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            min_size: 300,
            min_ecc: 0.95,
            mode: FilterMode::Or,
        }
    }
}

impl FilterParams {
    pub fn size_only(min_size: usize) -> Self {
        Self {
            min_size,
            min_ecc: 0.0,
            mode: FilterMode::Or,
        }
    }

    pub fn eccentricity_only(min_ecc: f64) -> Self {
        Self {
            min_size: 0,
            min_ecc,
            mode: FilterMode::Or,
        }
    }

    fn removes(&self, c: &ComponentStats) -> bool {
        let small = c.size < self.min_size;
        let round = c.eccentricity < self.min_ecc;
        match self.mode {
            FilterMode::Or => small || round,
            FilterMode::And => small && round,
        }
    }
}

pub fn filter_components(mask: &Mask, params: &FilterParams) -> Mask {
    let mut out = Mask::empty(mask.height(), mask.width());
    for comp in connected_components(mask) {
        if !params.removes(&comp) {
            for &(r, c) in &comp.pixels {
                out.set(r as usize, c as usize, true);
            }
        }
    }
    out
}
