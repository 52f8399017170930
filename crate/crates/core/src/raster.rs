//! Image model, column destriping and sRGB → CIELAB conversion.

use std::path::Path;

use image::{ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};

pub const BANDS: usize = 3;

/// An H×W×3 raster stored as interleaved `f64` on the [0, 255] scale.
///
/// Values may leave [0, 255] after destriping; only export clamps.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl RasterImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidImage(format!(
                "{height}x{width} image has no pixels"
            )));
        }
        if data.len() != height * width * BANDS {
            return Err(Error::InvalidImage(format!(
                "expected {} values for {height}x{width}x3, got {}",
                height * width * BANDS,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!("non-finite value at index {i}")));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Image where every pixel has the same color.
    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Result<Self> {
        let data = (0..height * width).flat_map(|_| rgb).collect();
        Self::new(height, width, data)
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * BANDS);
        for r in 0..height {
            for c in 0..width {
                data.extend_from_slice(&f(r, c));
            }
        }
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, band: usize) -> f64 {
        self.data[(row * self.width + col) * BANDS + band]
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        let i = (row * self.width + col) * BANDS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Per-band mean over the whole image.
    pub fn band_means(&self) -> [f64; 3] {
        let mut sum = [0.0; 3];
        for px in self.data.chunks_exact(BANDS) {
            for b in 0..BANDS {
                sum[b] += px[b];
            }
        }
        let n = self.pixel_count() as f64;
        sum.map(|s| s / n)
    }

    /// Per-column, per-band means, indexed `[col][band]`.
    pub fn column_means(&self) -> Vec<[f64; 3]> {
        let mut sums = vec![[0.0; 3]; self.width];
        for row in self.data.chunks_exact(self.width * BANDS) {
            for (c, px) in row.chunks_exact(BANDS).enumerate() {
                for b in 0..BANDS {
                    sums[c][b] += px[b];
                }
            }
        }
        let h = self.height as f64;
        sums.into_iter().map(|s| s.map(|v| v / h)).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })?
            .to_rgb8();
        let (w, h) = img.dimensions();
        let data = img.into_raw().into_iter().map(f64::from).collect();
        Self::new(h as usize, w as usize, data)
    }

    /// Writes an 8-bit PNG, clamping to [0, 255] and rounding.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let raw: Vec<u8> = self
            .data
            .iter()
            .map(|v| v.clamp(0.0, 255.0).round() as u8)
            .collect();
        let buf: ImageBuffer<Rgb<u8>, _> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, raw)
                .expect("buffer size matches dimensions");
        buf.save(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// CIELAB image with the same shape as its source raster.
/// Bands are L ∈ [0, 100] and a, b roughly in [−128, 127].
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl LabImage {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        let i = (row * self.width + col) * BANDS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// Removes per-column offsets: each column's band mean is replaced by the
/// band's global mean. Output is not re-clamped.
pub fn destripe(image: &RasterImage) -> RasterImage {
    let global = image.band_means();
    let cols = image.column_means();
    let shift: Vec<[f64; 3]> = cols
        .iter()
        .map(|m| [global[0] - m[0], global[1] - m[1], global[2] - m[2]])
        .collect();
    let mut data = image.data.clone();
    for row in data.chunks_exact_mut(image.width * BANDS) {
        for (c, px) in row.chunks_exact_mut(BANDS).enumerate() {
            for b in 0..BANDS {
                px[b] += shift[c][b];
            }
        }
    }
    RasterImage {
        height: image.height,
        width: image.width,
        data,
    }
}

// D65 reference white.
const WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

#[inline]
fn srgb_to_linear(v: f64) -> f64 {
    let c = v.clamp(0.0, 255.0) / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// Converts one sRGB pixel on the [0, 255] scale to CIELAB (D65).
pub fn rgb_pixel_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(srgb_to_linear);
    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;
    let fx = lab_f(x / WHITE[0]);
    let fy = lab_f(y / WHITE[1]);
    let fz = lab_f(z / WHITE[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// sRGB → CIEXYZ (D65) → CIELAB, per pixel. Values outside [0, 255] are
/// clamped first.
pub fn rgb_to_lab(image: &RasterImage) -> LabImage {
    let data = image
        .data
        .chunks_exact(BANDS)
        .flat_map(|px| rgb_pixel_to_lab([px[0], px[1], px[2]]))
        .collect();
    LabImage {
        height: image.height,
        width: image.width,
        data,
    }
}

/// Binary pixel mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::InvalidImage(format!(
                "mask of {height}x{width} needs {} entries, got {}",
                height * width,
                bits.len()
            )));
        }
        Ok(Self {
            height,
            width,
            bits,
        })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            bits: vec![false; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: bool) {
        self.bits[row * self.width + col] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Any nonzero pixel of the first channel counts as set.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })?
            .to_luma8();
        let (w, h) = img.dimensions();
        let bits = img.into_raw().into_iter().map(|v| v > 0).collect();
        Self::new(h as usize, w as usize, bits)
    }

    /// Writes an 8-bit PNG with 0 / 255 values.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let raw: Vec<u8> = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        let buf: ImageBuffer<Luma<u8>, _> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, raw)
                .expect("buffer size matches dimensions");
        buf.save(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }
}
