//! Seeded minirhizotron-like images with exact root masks.
//!
//! Soil is a brownish value-noise texture with Gaussian pixel noise and
//! per-column stripe offsets. Roots are smooth random-walk curves stamped at
//! a fixed width, brighter and less saturated than the soil under them.
//! Optional speckles add small bright, compact distractors to every image.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::ManifestEntry;
use crate::raster::{Mask, RasterImage};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub height: usize,
    pub width: usize,
    /// Roots per image; 0 makes a root-free (negative) image.
    pub n_roots: usize,
    /// Root width range in pixels, drawn per root.
    pub root_width: [f64; 2],
    /// Root length range in pixels, drawn per root.
    pub root_length: [f64; 2],
    /// Standard deviation of the heading change per pixel of length (radians).
    pub curvature: f64,
    /// Largest initial angle between a root and the horizontal (radians).
    pub max_tilt: f64,
    /// Minimum amount added to every band on root pixels.
    pub brightness: f64,
    /// Per-root brightness is drawn from `brightness + [0, brightness_jitter]`.
    pub brightness_jitter: f64,
    /// Fraction by which root bands move toward the brightest band.
    pub desaturation: f64,
    /// Fraction of the soil texture that shows through on root pixels.
    pub root_texture: f64,
    /// Pixel noise on roots, as a fraction of `noise_sigma`.
    pub root_noise: f64,
    /// Cell size of the coarsest soil noise octave, in pixels.
    pub texture_scale: f64,
    pub texture_amplitude: f64,
    /// Mean soil color before texture and jitter.
    pub soil_color: [f64; 3],
    /// Standard deviation of the per-image soil base color, per band.
    pub soil_jitter: f64,
    /// Standard deviation of per-column additive offsets.
    pub stripe_amplitude: f64,
    /// Standard deviation of per-pixel Gaussian noise, drawn per band.
    pub noise_sigma: f64,
    /// Standard deviation of per-pixel luminance grain shared by all bands.
    pub grain: f64,
    /// How much the grain fades in smooth soil patches: 0 keeps it uniform,
    /// 1 lets it vanish entirely in the smoothest patches.
    pub grain_patchiness: f64,
    /// Inclusive range for the number of bright compact blobs per image.
    pub speckles: [usize; 2],
    pub speckle_radius: [f64; 2],
    pub speckle_brightness: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            height: 128,
            width: 128,
            n_roots: 1,
            root_width: [6.0, 10.0],
            root_length: [90.0, 120.0],
            curvature: 0.003,
            max_tilt: 0.4,
            brightness: 50.0,
            brightness_jitter: 20.0,
            desaturation: 0.7,
            root_texture: 0.3,
            root_noise: 0.4,
            texture_scale: 24.0,
            texture_amplitude: 14.0,
            soil_color: [175.0, 125.0, 108.0],
            soil_jitter: 6.0,
            stripe_amplitude: 4.0,
            noise_sigma: 4.0,
            grain: 40.0,
            grain_patchiness: 1.0,
            speckles: [1, 3],
            speckle_radius: [2.5, 4.0],
            speckle_brightness: 60.0,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.height < 32 || self.width < 32 {
            return bad(format!("images must be at least 32x32, got {}x{}", self.height, self.width));
        }
        if !(self.root_width[0] >= 1.0 && self.root_width[1] >= self.root_width[0]) {
            return bad(format!("bad root width range {:?}", self.root_width));
        }
        if !(self.root_length[0] > 0.0 && self.root_length[1] >= self.root_length[0]) {
            return bad(format!("bad root length range {:?}", self.root_length));
        }
        if self.speckles[0] > self.speckles[1] {
            return bad(format!("bad speckle count range {:?}", self.speckles));
        }
        if !(self.speckle_radius[0] > 0.0 && self.speckle_radius[1] >= self.speckle_radius[0]) {
            return bad(format!("bad speckle radius range {:?}", self.speckle_radius));
        }
        let nonneg = [
            ("curvature", self.curvature),
            ("max_tilt", self.max_tilt),
            ("brightness_jitter", self.brightness_jitter),
            ("texture_amplitude", self.texture_amplitude),
            ("soil_jitter", self.soil_jitter),
            ("stripe_amplitude", self.stripe_amplitude),
            ("noise_sigma", self.noise_sigma),
            ("grain", self.grain),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(self.texture_scale >= 1.0) {
            return bad(format!("texture_scale must be at least 1, got {}", self.texture_scale));
        }
        if !(0.0..=1.0).contains(&self.desaturation) {
            return bad(format!("desaturation must lie in [0, 1], got {}", self.desaturation));
        }
        for (name, v) in [
            ("root_texture", self.root_texture),
            ("root_noise", self.root_noise),
            ("grain_patchiness", self.grain_patchiness),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthImage {
    pub image: RasterImage,
    pub mask: Mask,
    pub label: bool,
    /// Column offsets that were added, per band.
    pub stripes: Vec<[f64; 3]>,
    /// Centerline of every root, in (row, col) sample points.
    pub roots: Vec<Vec<(f64, f64)>>,
}

fn uniform(rng: &mut seed::Rng, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        rng.random_range(range[0]..range[1])
    } else {
        range[0]
    }
}

/// Smooth lattice noise: random values on a grid with `cell` spacing,
/// interpolated with a smoothstep.
fn value_noise(h: usize, w: usize, cell: f64, rng: &mut seed::Rng) -> Vec<f64> {
    let gh = (h as f64 / cell).ceil() as usize + 2;
    let gw = (w as f64 / cell).ceil() as usize + 2;
    let grid: Vec<f64> = (0..gh * gw).map(|_| rng.random_range(-1.0..1.0)).collect();
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        let fy = r as f64 / cell;
        let (y0, ty) = (fy.floor() as usize, smooth(fy.fract()));
        for c in 0..w {
            let fx = c as f64 / cell;
            let (x0, tx) = (fx.floor() as usize, smooth(fx.fract()));
            let g = |y: usize, x: usize| grid[y * gw + x];
            let top = g(y0, x0) * (1.0 - tx) + g(y0, x0 + 1) * tx;
            let bot = g(y0 + 1, x0) * (1.0 - tx) + g(y0 + 1, x0 + 1) * tx;
            out[r * w + c] = top * (1.0 - ty) + bot * ty;
        }
    }
    out
}

/// Pixels whose centers lie within `radius` of `(y, x)`.
fn stamp(h: usize, w: usize, y: f64, x: f64, radius: f64, mut f: impl FnMut(usize, usize)) {
    let r0 = (y - radius).floor().max(0.0) as usize;
    let r1 = ((y + radius).ceil() as usize).min(h - 1);
    let c0 = (x - radius).floor().max(0.0) as usize;
    let c1 = ((x + radius).ceil() as usize).min(w - 1);
    for r in r0..=r1 {
        for c in c0..=c1 {
            let (dy, dx) = (r as f64 - y, c as f64 - x);
            if dy * dy + dx * dx < radius * radius {
                f(r, c);
            }
        }
    }
}

/// A random-walk centerline sampled every half pixel, fully inside the
/// image with a margin of `margin`. Returns `None` if it leaves the image.
fn walk(
    h: usize,
    w: usize,
    length: f64,
    margin: f64,
    curvature: f64,
    max_tilt: f64,
    rng: &mut seed::Rng,
) -> Option<Vec<(f64, f64)>> {
    let mut y = rng.random_range(margin..h as f64 - 1.0 - margin);
    let mut x = rng.random_range(margin..w as f64 - 1.0 - margin);
    let flip = if rng.random_bool(0.5) { PI } else { 0.0 };
    let mut heading = flip + rng.random_range(-max_tilt..=max_tilt);
    let steps = (length / 0.5).round() as usize;
    let turn = Normal::new(0.0, curvature * 0.5f64.sqrt()).expect("finite sigma");
    let mut pts = Vec::with_capacity(steps + 1);
    pts.push((y, x));
    for _ in 0..steps {
        heading += turn.sample(rng);
        y += 0.5 * heading.sin();
        x += 0.5 * heading.cos();
        if y < margin || x < margin || y > h as f64 - 1.0 - margin || x > w as f64 - 1.0 - margin {
            return None;
        }
        pts.push((y, x));
    }
    Some(pts)
}

pub fn generate_image(params: &SynthParams) -> Result<SynthImage> {
    params.validate()?;
    let (h, w) = (params.height, params.width);
    let mut rng = seed::rng(params.seed);
    let gauss = |sigma: f64| Normal::new(0.0, sigma).expect("finite sigma");

    // Soil: per-image base color plus two octaves of value noise, with a
    // slight per-band tint in the noise.
    let base = params.soil_color;
    let jitter = gauss(params.soil_jitter);
    let base: [f64; 3] = std::array::from_fn(|b| base[b] + jitter.sample(&mut rng));
    let n1 = value_noise(h, w, params.texture_scale, &mut rng);
    let n2 = value_noise(h, w, (params.texture_scale / 3.0).max(1.0), &mut rng);
    let patches = value_noise(h, w, params.texture_scale, &mut rng);
    let tint = [1.0, 0.85, 0.7];
    let mut data = vec![0.0; h * w * 3];
    let texture: Vec<f64> = (0..h * w)
        .map(|p| params.texture_amplitude * (0.7 * n1[p] + 0.3 * n2[p]))
        .collect();
    for (p, t) in texture.iter().enumerate() {
        for b in 0..3 {
            data[p * 3 + b] = base[b] + tint[b] * t;
        }
    }

    // Roots.
    let mut mask = Mask::empty(h, w);
    let mut roots = Vec::new();
    for _ in 0..params.n_roots {
        let width = uniform(&mut rng, params.root_width);
        let offset = params.brightness
            + if params.brightness_jitter > 0.0 {
                rng.random_range(0.0..=params.brightness_jitter)
            } else {
                0.0
            };
        let mut placed = None;
        for _attempt in 0..200 {
            let length = uniform(&mut rng, params.root_length);
            let Some(pts) = walk(h, w, length, width / 2.0 + 1.0, params.curvature, params.max_tilt, &mut rng)
            else {
                continue;
            };
            // Keep roots apart so every root is its own component.
            let mut clash = false;
            for &(y, x) in &pts {
                stamp(h, w, y, x, width / 2.0 + 2.0, |r, c| clash |= mask.get(r, c));
                if clash {
                    break;
                }
            }
            if !clash {
                placed = Some(pts);
                break;
            }
        }
        let Some(pts) = placed else { continue };
        let mut own = Mask::empty(h, w);
        for &(y, x) in &pts {
            stamp(h, w, y, x, width / 2.0, |r, c| own.set(r, c, true));
        }
        for p in 0..h * w {
            if own.bits()[p] {
                let px = &mut data[p * 3..p * 3 + 3];
                for (b, v) in px.iter_mut().enumerate() {
                    *v -= (1.0 - params.root_texture) * tint[b] * texture[p];
                }
                let top = px[0].max(px[1]).max(px[2]);
                for v in px.iter_mut() {
                    *v += offset + params.desaturation * (top - *v);
                }
                mask.set(p / w, p % w, true);
            }
        }
        roots.push(pts);
    }
    if params.n_roots > 0 && roots.is_empty() {
        return Err(Error::InvalidParams(format!(
            "no root of length {:?} fits a {h}x{w} image",
            params.root_length
        )));
    }

    // Speckles: small bright blobs away from roots.
    if params.speckles[1] > 0 {
        let count = rng.random_range(params.speckles[0]..=params.speckles[1]);
        for _ in 0..count {
            let radius = uniform(&mut rng, params.speckle_radius);
            let y = rng.random_range(0.0..h as f64);
            let x = rng.random_range(0.0..w as f64);
            let mut clash = false;
            stamp(h, w, y, x, radius + 2.0, |r, c| clash |= mask.get(r, c));
            if clash {
                continue;
            }
            stamp(h, w, y, x, radius, |r, c| {
                let px = &mut data[(r * w + c) * 3..(r * w + c) * 3 + 3];
                let top = px[0].max(px[1]).max(px[2]);
                for v in px.iter_mut() {
                    *v += params.speckle_brightness + 0.8 * (top - *v);
                }
            });
        }
    }

    // Scanner artifacts: column stripes and pixel noise.
    let stripe = gauss(params.stripe_amplitude);
    let stripes: Vec<[f64; 3]> = (0..w)
        .map(|_| {
            if params.stripe_amplitude == 0.0 {
                [0.0; 3]
            } else {
                let s = stripe.sample(&mut rng);
                [s, s, s]
            }
        })
        .collect();
    let noise = gauss(params.noise_sigma);
    let grain = gauss(params.grain);
    for p in 0..h * w {
        let c = p % w;
        let damp = if mask.bits()[p] { params.root_noise } else { 1.0 };
        let fade = 1.0 - params.grain_patchiness * 0.5 * (patches[p] + 1.0);
        let g = if params.grain > 0.0 {
            grain.sample(&mut rng)
        } else {
            0.0
        };
        for b in 0..3 {
            let n = if params.noise_sigma > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            let n = damp * (n + fade * g);
            let v = data[p * 3 + b] + stripes[c][b] + n;
            // 8-bit quantization, as from a scanner
            data[p * 3 + b] = v.round().clamp(0.0, 255.0);
        }
    }

    Ok(SynthImage {
        image: RasterImage::new(h, w, data)?,
        label: params.n_roots > 0 && mask.count() > 0,
        mask,
        stripes,
        roots,
    })
}

/// A balanced synthetic set: `positives` root images then `negatives`
/// root-free images, image `i` seeded by `child(seed, i)`.
pub fn generate_set(
    base: &SynthParams,
    positives: usize,
    negatives: usize,
    seed: u64,
) -> Result<Vec<SynthImage>> {
    base.validate()?;
    let n_roots = base.n_roots.max(1);
    let jobs: Vec<SynthParams> = (0..positives + negatives)
        .map(|i| SynthParams {
            n_roots: if i < positives { n_roots } else { 0 },
            seed: seed::child(seed, i as u64),
            ..base.clone()
        })
        .collect();
    crate::exec::Parallelism::default().try_map(&jobs, generate_image)
}

/// Writes `img_XXX.png`, `mask_XXX.png` and `manifest.json` into `dir`
/// and returns the manifest path.
pub fn write_set(images: &[SynthImage], dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = Vec::with_capacity(images.len());
    for (i, s) in images.iter().enumerate() {
        let img = format!("img_{i:03}.png");
        let mask = format!("mask_{i:03}.png");
        s.image.save_png(dir.join(&img))?;
        s.mask.save_png(dir.join(&mask))?;
        manifest.push(ManifestEntry {
            image: img.into(),
            label: s.label as u8,
            mask: Some(mask.into()),
        });
    }
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::postproc::connected_components;
    use crate::raster::destripe;

    #[test]
    fn negative_images_have_no_roots() {
        let s = generate_image(&SynthParams {
            n_roots: 0,
            seed: 5,
            ..SynthParams::default()
        })
        .unwrap();
        assert_eq!(s.mask.count(), 0);
        assert!(!s.label);
    }

    #[test]
    fn same_seed_same_image() {
        let p = SynthParams {
            seed: 11,
            ..SynthParams::default()
        };
        let a = generate_image(&p).unwrap();
        let b = generate_image(&p).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.mask, b.mask);
        let c = generate_image(&SynthParams { seed: 12, ..p }).unwrap();
        assert_ne!(a.image, c.image);
    }

    #[test]
    fn zero_stripe_amplitude_adds_no_offsets() {
        let s = generate_image(&SynthParams {
            stripe_amplitude: 0.0,
            seed: 2,
            ..SynthParams::default()
        })
        .unwrap();
        assert!(s.stripes.iter().all(|o| *o == [0.0; 3]));
        let d = destripe(&s.image);
        let g = d.band_means();
        for m in d.column_means() {
            for b in 0..3 {
                assert!((m[b] - g[b]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn root_pixel_count_matches_lengths() {
        // 256², three roots of width 4 with lengths in [100, 400]
        for seed in 0..5 {
            let p = SynthParams {
                height: 256,
                width: 256,
                n_roots: 3,
                root_width: [4.0, 4.0],
                root_length: [100.0, 400.0],
                seed,
                ..SynthParams::default()
            };
            let s = generate_image(&p).unwrap();
            assert_eq!(s.roots.len(), 3);
            // oracle: pixels within 2 px of a centerline sample
            let mut oracle = Mask::empty(256, 256);
            for pts in &s.roots {
                for &(y, x) in pts {
                    for r in 0..256usize {
                        if (r as f64 - y).abs() > 2.0 {
                            continue;
                        }
                        for c in 0..256usize {
                            let (dy, dx) = (r as f64 - y, c as f64 - x);
                            if dy * dy + dx * dx < 4.0 {
                                oracle.set(r, c, true);
                            }
                        }
                    }
                }
            }
            assert_eq!(oracle, s.mask);
            let n = s.mask.count();
            assert!((3 * 4 * 100..=3 * 4 * 400).contains(&n), "seed {seed}: {n}");
        }
    }

    #[test]
    fn roots_are_elongated_and_brighter() {
        let p = SynthParams::default();
        for seed in 0..8 {
            let s = generate_image(&SynthParams {
                seed,
                noise_sigma: 0.0,
                stripe_amplitude: 0.0,
                speckles: [0, 0],
                ..p.clone()
            })
            .unwrap();
            for comp in connected_components(&s.mask) {
                assert!(comp.eccentricity >= 0.9, "seed {seed}: {}", comp.eccentricity);
            }
        }
        // band means: root vs soil over a set of images
        let set = generate_set(&p, 10, 0, 3).unwrap();
        let (mut root, mut soil) = ([0.0; 3], [0.0; 3]);
        let (mut nr, mut ns) = (0.0, 0.0);
        for s in &set {
            for r in 0..p.height {
                for c in 0..p.width {
                    let px = s.image.pixel(r, c);
                    if s.mask.get(r, c) {
                        nr += 1.0;
                        (0..3).for_each(|b| root[b] += px[b]);
                    } else {
                        ns += 1.0;
                        (0..3).for_each(|b| soil[b] += px[b]);
                    }
                }
            }
        }
        for b in 0..3 {
            assert!(root[b] / nr - soil[b] / ns >= p.brightness, "band {b}");
        }
    }

    #[test]
    fn rejects_tiny_images() {
        let p = SynthParams {
            height: 16,
            ..SynthParams::default()
        };
        assert!(generate_image(&p).is_err());
    }
}
