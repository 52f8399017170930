//! SLIC oversegmentation: localized k-means in (L, a, b, row, col) space
//! followed by 4-connectivity enforcement.

use std::collections::VecDeque;
use std::path::Path;

use image::{ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{rgb_to_lab, LabImage, RasterImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlicParams {
    /// Desired number of superpixels K₀.
    pub target_count: usize,
    /// Spatial-vs-color weight m.
    pub compactness: f64,
    pub max_iters: usize,
}

impl SlicParams {
    /// Parameters giving superpixels of roughly `size` pixels on an image
    /// with `pixels` pixels.
    pub fn for_size(pixels: usize, size: usize, compactness: f64, max_iters: usize) -> Self {
        Self {
            target_count: (pixels / size.max(1)).clamp(1, pixels.max(1)),
            compactness,
            max_iters,
        }
    }

    pub fn validate(&self, pixels: usize) -> Result<()> {
        if self.target_count == 0 || self.target_count > pixels {
            return Err(Error::InvalidParams(format!(
                "target_count {} must lie in 1..={pixels}",
                self.target_count
            )));
        }
        if !(self.compactness > 0.0 && self.compactness.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "compactness must be positive, got {}",
                self.compactness
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParams("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Partition of an image into superpixels with ids `0..count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperpixelMap {
    height: usize,
    width: usize,
    labels: Vec<u32>,
    members: Vec<Vec<(u32, u32)>>,
}

impl SuperpixelMap {
    /// Builds a map from raw labels, renumbering them to a gapless range in
    /// first-appearance (row-major) order.
    pub fn from_labels(height: usize, width: usize, raw: &[u32]) -> Result<Self> {
        if raw.len() != height * width {
            return Err(Error::InvalidParams(format!(
                "label map has {} entries for a {height}x{width} image",
                raw.len()
            )));
        }
        let mut remap = std::collections::HashMap::new();
        let mut labels = Vec::with_capacity(raw.len());
        let mut members: Vec<Vec<(u32, u32)>> = Vec::new();
        for (i, &l) in raw.iter().enumerate() {
            let id = *remap.entry(l).or_insert_with(|| {
                members.push(Vec::new());
                (members.len() - 1) as u32
            });
            labels.push(id);
            members[id as usize].push(((i / width) as u32, (i % width) as u32));
        }
        Ok(Self {
            height,
            width,
            labels,
            members,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn count(&self) -> usize {
        self.members.len()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    /// Pixels `(row, col)` of superpixel `id`, in row-major order.
    pub fn members(&self, id: usize) -> &[(u32, u32)] {
        &self.members[id]
    }

    pub fn iter_members(&self) -> impl Iterator<Item = &[(u32, u32)]> {
        self.members.iter().map(Vec::as_slice)
    }

    /// Centroid `(row, col)` of superpixel `id`.
    pub fn centroid(&self, id: usize) -> (f64, f64) {
        let m = &self.members[id];
        let (sr, sc) = m
            .iter()
            .fold((0.0, 0.0), |(a, b), &(r, c)| (a + r as f64, b + c as f64));
        (sr / m.len() as f64, sc / m.len() as f64)
    }

    /// True when the superpixel's pixels form one 4-connected region.
    pub fn is_connected(&self, id: usize) -> bool {
        let m = &self.members[id];
        let Some(&(r0, c0)) = m.first() else {
            return false;
        };
        let mut seen = vec![false; self.height * self.width];
        let mut queue = VecDeque::from([(r0 as usize, c0 as usize)]);
        seen[r0 as usize * self.width + c0 as usize] = true;
        let mut reached = 0;
        while let Some((r, c)) = queue.pop_front() {
            reached += 1;
            for (nr, nc) in neighbors4(r, c, self.height, self.width) {
                let i = nr * self.width + nc;
                if !seen[i] && self.labels[i] == id as u32 {
                    seen[i] = true;
                    queue.push_back((nr, nc));
                }
            }
        }
        reached == m.len()
    }

    /// Writes the label map as a 16-bit grayscale PNG (ids saturate at 65535).
    pub fn save_labels_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let raw: Vec<u16> = self.labels.iter().map(|&l| l.min(u16::MAX as u32) as u16).collect();
        let buf: ImageBuffer<Luma<u16>, _> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, raw)
                .expect("buffer size matches dimensions");
        buf.save(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Copy of `image` with superpixel boundaries painted red.
    pub fn boundary_overlay(&self, image: &RasterImage) -> RasterImage {
        RasterImage::from_fn(self.height, self.width, |r, c| {
            let l = self.label(r, c);
            let edge = (c + 1 < self.width && self.label(r, c + 1) != l)
                || (r + 1 < self.height && self.label(r + 1, c) != l);
            if edge {
                [255.0, 0.0, 0.0]
            } else {
                image.pixel(r, c)
            }
        })
        .expect("shape preserved")
    }
}

fn neighbors4(r: usize, c: usize, h: usize, w: usize) -> impl Iterator<Item = (usize, usize)> {
    let up = (r > 0).then(|| (r - 1, c));
    let down = (r + 1 < h).then(|| (r + 1, c));
    let left = (c > 0).then(|| (r, c - 1));
    let right = (c + 1 < w).then(|| (r, c + 1));
    [up, down, left, right].into_iter().flatten()
}

#[derive(Debug, Clone, Copy)]
struct Center {
    lab: [f64; 3],
    row: f64,
    col: f64,
}

/// SLIC on an RGB raster (converted to LAB internally).
pub fn slic_segment(image: &RasterImage, params: &SlicParams) -> Result<SuperpixelMap> {
    slic_segment_lab(&rgb_to_lab(image), params)
}

pub fn slic_segment_lab(lab: &LabImage, params: &SlicParams) -> Result<SuperpixelMap> {
    let (h, w) = (lab.height(), lab.width());
    let n = h * w;
    params.validate(n)?;

    let s = (n as f64 / params.target_count as f64).sqrt();
    let ny = ((h as f64 / s).round() as usize).clamp(1, h);
    let nx = ((params.target_count as f64 / ny as f64).round() as usize).clamp(1, w);
    let step_r = h as f64 / ny as f64;
    let step_c = w as f64 / nx as f64;

    let mut centers = seed_centers(lab, ny, nx, s);

    // Search window is 2S×2S, widened when the seed grid is coarser than S
    // (strongly elongated images).
    let win_r = s.max(step_r);
    let win_c = s.max(step_c);
    let spatial = (params.compactness / s).powi(2);

    let mut labels = vec![u32::MAX; n];
    let mut dist = vec![f64::INFINITY; n];
    for _ in 0..params.max_iters {
        dist.fill(f64::INFINITY);
        let mut next = vec![u32::MAX; n];
        for (k, ctr) in centers.iter().enumerate() {
            let r0 = (ctr.row - win_r).floor().max(0.0) as usize;
            let r1 = ((ctr.row + win_r).ceil() as usize).min(h - 1);
            let c0 = (ctr.col - win_c).floor().max(0.0) as usize;
            let c1 = ((ctr.col + win_c).ceil() as usize).min(w - 1);
            for r in r0..=r1 {
                for c in c0..=c1 {
                    let d = slic_distance(lab.pixel(r, c), r, c, ctr, spatial);
                    let i = r * w + c;
                    if d < dist[i] {
                        dist[i] = d;
                        next[i] = k as u32;
                    }
                }
            }
        }
        // Pixels outside every window go to the globally nearest center.
        for i in 0..n {
            if next[i] == u32::MAX {
                let (r, c) = (i / w, i % w);
                let px = lab.pixel(r, c);
                let mut best = (f64::INFINITY, 0u32);
                for (k, ctr) in centers.iter().enumerate() {
                    let d = slic_distance(px, r, c, ctr, spatial);
                    if d < best.0 {
                        best = (d, k as u32);
                    }
                }
                next[i] = best.1;
            }
        }
        let converged = next == labels;
        labels = next;
        update_centers(lab, &labels, &mut centers);
        if converged {
            break;
        }
    }

    let min_size = s * s / 4.0;
    let merged = enforce_connectivity(h, w, &labels, min_size);
    SuperpixelMap::from_labels(h, w, &merged)
}

#[inline]
fn slic_distance(px: [f64; 3], r: usize, c: usize, ctr: &Center, spatial: f64) -> f64 {
    let dl = px[0] - ctr.lab[0];
    let da = px[1] - ctr.lab[1];
    let db = px[2] - ctr.lab[2];
    let dr = r as f64 - ctr.row;
    let dc = c as f64 - ctr.col;
    dl * dl + da * da + db * db + (dr * dr + dc * dc) * spatial
}

fn seed_centers(lab: &LabImage, ny: usize, nx: usize, s: f64) -> Vec<Center> {
    let (h, w) = (lab.height(), lab.width());
    let gradient = |r: usize, c: usize| -> f64 {
        let up = lab.pixel(r.saturating_sub(1), c);
        let down = lab.pixel((r + 1).min(h - 1), c);
        let left = lab.pixel(r, c.saturating_sub(1));
        let right = lab.pixel(r, (c + 1).min(w - 1));
        (0..3)
            .map(|b| (down[b] - up[b]).powi(2) + (right[b] - left[b]).powi(2))
            .sum()
    };
    let mut centers = Vec::with_capacity(ny * nx);
    for i in 0..ny {
        for j in 0..nx {
            let row = (i as f64 + 0.5) * h as f64 / ny as f64 - 0.5;
            let col = (j as f64 + 0.5) * w as f64 / nx as f64 - 0.5;
            let pr = row.round().clamp(0.0, (h - 1) as f64) as usize;
            let pc = col.round().clamp(0.0, (w - 1) as f64) as usize;
            let mut ctr = Center {
                lab: lab.pixel(pr, pc),
                row,
                col,
            };
            // Perturbation only makes sense when a 3×3 move stays inside the cell.
            if s >= 3.0 {
                let mut best = gradient(pr, pc);
                for r in pr.saturating_sub(1)..=(pr + 1).min(h - 1) {
                    for c in pc.saturating_sub(1)..=(pc + 1).min(w - 1) {
                        let g = gradient(r, c);
                        if g < best {
                            best = g;
                            ctr = Center {
                                lab: lab.pixel(r, c),
                                row: r as f64,
                                col: c as f64,
                            };
                        }
                    }
                }
            }
            centers.push(ctr);
        }
    }
    centers
}

fn update_centers(lab: &LabImage, labels: &[u32], centers: &mut [Center]) {
    let w = lab.width();
    let mut acc = vec![[0.0f64; 6]; centers.len()];
    for (i, &l) in labels.iter().enumerate() {
        let px = lab.pixel(i / w, i % w);
        let a = &mut acc[l as usize];
        a[0] += px[0];
        a[1] += px[1];
        a[2] += px[2];
        a[3] += (i / w) as f64;
        a[4] += (i % w) as f64;
        a[5] += 1.0;
    }
    for (ctr, a) in centers.iter_mut().zip(acc) {
        if a[5] > 0.0 {
            *ctr = Center {
                lab: [a[0] / a[5], a[1] / a[5], a[2] / a[5]],
                row: a[3] / a[5],
                col: a[4] / a[5],
            };
        }
    }
}

/// Splits every label into its 4-connected pieces, then merges pieces
/// smaller than `min_size` into their largest adjacent piece.
fn enforce_connectivity(h: usize, w: usize, labels: &[u32], min_size: f64) -> Vec<u32> {
    let n = h * w;
    let mut comp = vec![u32::MAX; n];
    let mut sizes: Vec<usize> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if comp[start] != u32::MAX {
            continue;
        }
        let id = sizes.len() as u32;
        let lab = labels[start];
        comp[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            for (nr, nc) in neighbors4(i / w, i % w, h, w) {
                let j = nr * w + nc;
                if comp[j] == u32::MAX && labels[j] == lab {
                    comp[j] = id;
                    queue.push_back(j);
                }
            }
        }
        sizes.push(size);
    }

    let k = sizes.len();
    let mut adjacent: Vec<Vec<u32>> = vec![Vec::new(); k];
    for i in 0..n {
        let (r, c) = (i / w, i % w);
        let a = comp[i];
        for j in [(c + 1 < w).then(|| i + 1), (r + 1 < h).then(|| i + w)]
            .into_iter()
            .flatten()
        {
            let b = comp[j];
            if a != b {
                adjacent[a as usize].push(b);
                adjacent[b as usize].push(a);
            }
        }
    }
    for adj in &mut adjacent {
        adj.sort_unstable();
        adj.dedup();
    }

    let mut parent: Vec<u32> = (0..k as u32).collect();
    let mut merged_size = sizes.clone();
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }
    for id in 0..k as u32 {
        if (sizes[id as usize] as f64) >= min_size {
            continue;
        }
        let root = find(&mut parent, id);
        if (merged_size[root as usize] as f64) >= min_size {
            continue;
        }
        let mut best: Option<(usize, u32)> = None;
        for &nb in &adjacent[id as usize] {
            let r = find(&mut parent, nb);
            if r == root {
                continue;
            }
            let sz = merged_size[r as usize];
            if best.is_none_or(|(bs, br)| sz > bs || (sz == bs && r < br)) {
                best = Some((sz, r));
            }
        }
        if let Some((_, target)) = best {
            parent[root as usize] = target;
            merged_size[target as usize] += merged_size[root as usize];
        }
    }
    comp.iter().map(|&c| find(&mut parent, c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(k: usize) -> SlicParams {
        SlicParams {
            target_count: k,
            compactness: 10.0,
            max_iters: 10,
        }
    }

    fn assert_valid(map: &SuperpixelMap) {
        let mut seen = vec![false; map.count()];
        for &l in map.labels() {
            seen[l as usize] = true;
        }
        assert!(seen.iter().all(|&s| s), "gap in superpixel ids");
        let total: usize = map.iter_members().map(|m| m.len()).sum();
        assert_eq!(total, map.height() * map.width());
        for id in 0..map.count() {
            assert!(!map.members(id).is_empty());
            assert!(map.is_connected(id), "superpixel {id} is fragmented");
        }
    }

    #[test]
    fn uniform_image_splits_into_quadrants() {
        let img = RasterImage::filled(12, 12, [90.0, 60.0, 40.0]).unwrap();
        let map = slic_segment(&img, &params(4)).unwrap();
        assert_valid(&map);
        assert_eq!(map.count(), 4);
        for id in 0..4 {
            let n = map.members(id).len();
            assert!((18..=54).contains(&n), "superpixel size {n}");
        }
    }

    #[test]
    fn two_tone_image_respects_edge() {
        let img =
            RasterImage::from_fn(16, 16, |_, c| if c < 8 { [0.0; 3] } else { [255.0; 3] }).unwrap();
        let map = slic_segment(&img, &params(2)).unwrap();
        assert_valid(&map);
        for id in 0..map.count() {
            let sides: Vec<bool> = map.members(id).iter().map(|&(_, c)| c < 8).collect();
            assert!(sides.iter().all(|&s| s == sides[0]), "superpixel {id} straddles the edge");
        }
    }

    #[test]
    fn one_pixel_superpixels_at_full_granularity() {
        let img = RasterImage::from_fn(5, 7, |r, c| [(r * 30) as f64, (c * 20) as f64, 7.0]).unwrap();
        let map = slic_segment(&img, &params(35)).unwrap();
        assert_eq!(map.count(), 35);
        assert!(map.iter_members().all(|m| m.len() == 1));
    }

    #[test]
    fn rejects_bad_params() {
        let img = RasterImage::filled(4, 4, [0.0; 3]).unwrap();
        assert!(slic_segment(&img, &params(17)).is_err());
        assert!(slic_segment(&img, &params(0)).is_err());
        let mut p = params(4);
        p.compactness = 0.0;
        assert!(slic_segment(&img, &p).is_err());
        p.compactness = 10.0;
        p.max_iters = 0;
        assert!(slic_segment(&img, &p).is_err());
    }

    #[test]
    fn single_row_image() {
        let img = RasterImage::from_fn(1, 64, |_, c| [(c * 4) as f64; 3]).unwrap();
        let map = slic_segment(&img, &params(8)).unwrap();
        assert_valid(&map);
    }

    #[test]
    fn from_labels_renumbers_gaplessly() {
        let map = SuperpixelMap::from_labels(2, 2, &[7, 7, 3, 9]).unwrap();
        assert_eq!(map.labels(), &[0, 0, 1, 2]);
        assert_eq!(map.members(0), &[(0, 0), (0, 1)]);
    }
}
