use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::features::GrayImage;
use crate::geometry::{AnnotationSchema, Point, Shape};

/// Length of one landmark descriptor: 4×4 cells × 8 orientation bins.
pub const DESCRIPTOR_LEN: usize = 128;

const GRID: usize = 4;
const ORIENTATIONS: usize = 8;
const CLIP: f64 = 0.2;

/// Per-sample spatial weights of a fixed-size patch. Offsets never depend on
/// the image, so they are computed once per patch size.
#[derive(Debug, Clone)]
pub struct SiftLayout {
    patch_px: usize,
    /// `(cell index, weight)` contributions for every patch sample, Gaussian
    /// window already folded in.
    taps: Vec<[(usize, f64); 4]>,
}

impl SiftLayout {
    pub fn new(patch_px: usize) -> Result<Self> {
        if patch_px == 0 || patch_px % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "patch size must be positive and even, got {patch_px}"
            )));
        }
        let half = patch_px as f64 / 2.0;
        let cell = patch_px as f64 / GRID as f64;
        let sigma = half;
        let mut taps = Vec::with_capacity(patch_px * patch_px);
        for r in 0..patch_px {
            for c in 0..patch_px {
                let u = c as f64 + 0.5 - half;
                let v = r as f64 + 0.5 - half;
                let gauss = (-(u * u + v * v) / (2.0 * sigma * sigma)).exp();
                let cx = (u + half) / cell - 0.5;
                let cy = (v + half) / cell - 0.5;
                let mut tap = [(0usize, 0.0f64); 4];
                let mut k = 0;
                for (yi, wy) in split_bin(cy) {
                    for (xi, wx) in split_bin(cx) {
                        let w = gauss * wx * wy;
                        if (0..GRID as i64).contains(&xi) && (0..GRID as i64).contains(&yi) && w > 0.0 {
                            tap[k] = (yi as usize * GRID + xi as usize, w);
                            k += 1;
                        }
                    }
                }
                taps.push(tap);
            }
        }
        Ok(Self { patch_px, taps })
    }

    pub fn patch_px(&self) -> usize {
        self.patch_px
    }

    /// Unnormalized orientation histogram around `center`.
    pub fn histogram(&self, img: &GrayImage, center: Point) -> [f64; DESCRIPTOR_LEN] {
        let n = self.patch_px;
        let g = n + 2;
        let half = n as f64 / 2.0;
        // Intensities on the patch grid plus a one-pixel ring for central differences.
        let mut grid = vec![0.0; g * g];
        let ox = center[0] - 0.5 - half;
        let oy = center[1] - 0.5 - half;
        let (fx0, fy0) = (ox.floor(), oy.floor());
        let inside =
            fx0 >= 0.0 && fy0 >= 0.0 && fx0 + (g as f64) < img.width() as f64 && fy0 + (g as f64) < img.height() as f64;
        if inside {
            // Every grid point shares the same sub-pixel offset.
            let (fx, fy) = (ox - fx0, oy - fy0);
            let (x0, y0) = (fx0 as usize, fy0 as usize);
            let w = img.width();
            let px = img.pixels();
            for r in 0..g {
                let top = &px[(y0 + r) * w + x0..(y0 + r) * w + x0 + g + 1];
                let bot = &px[(y0 + r + 1) * w + x0..(y0 + r + 1) * w + x0 + g + 1];
                for c in 0..g {
                    let t = top[c] * (1.0 - fx) + top[c + 1] * fx;
                    let b = bot[c] * (1.0 - fx) + bot[c + 1] * fx;
                    grid[r * g + c] = t * (1.0 - fy) + b * fy;
                }
            }
        } else {
            for r in 0..g {
                for c in 0..g {
                    let p = [ox + c as f64, oy + r as f64];
                    grid[r * g + c] = img.sample_bilinear(p);
                }
            }
        }
        let mut hist = [0.0; DESCRIPTOR_LEN];
        for r in 0..n {
            for c in 0..n {
                let at = |dr: usize, dc: usize| grid[(r + dr) * g + (c + dc)];
                let gx = 0.5 * (at(1, 2) - at(1, 0));
                let gy = 0.5 * (at(2, 1) - at(0, 1));
                let mag = gx.hypot(gy);
                if mag == 0.0 {
                    continue;
                }
                let mut theta = gy.atan2(gx);
                if theta < 0.0 {
                    theta += 2.0 * PI;
                }
                let o = (theta * 4.0) / PI;
                let o0 = o.floor();
                let frac = o - o0;
                let b0 = (o0 as usize) % ORIENTATIONS;
                let b1 = (b0 + 1) % ORIENTATIONS;
                for &(cell, w) in &self.taps[r * n + c] {
                    if w == 0.0 {
                        continue;
                    }
                    let m = mag * w;
                    hist[cell * ORIENTATIONS + b0] += m * (1.0 - frac);
                    if frac > 0.0 {
                        hist[cell * ORIENTATIONS + b1] += m * frac;
                    }
                }
            }
        }
        hist
    }

    /// Descriptor with fixed (image-axis) orientation.
    pub fn describe(&self, img: &GrayImage, center: Point) -> [f64; DESCRIPTOR_LEN] {
        let mut h = self.histogram(img, center);
        normalize_descriptor(&mut h);
        h
    }
}

fn split_bin(x: f64) -> [(i64, f64); 2] {
    let x0 = x.floor();
    let f = x - x0;
    [(x0 as i64, 1.0 - f), (x0 as i64 + 1, f)]
}

/// Scales to unit length. Returns `false` and zeroes the vector when it has
/// no energy.
pub(crate) fn unit_normalize(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 1e-300) {
        v.iter_mut().for_each(|x| *x = 0.0);
        return false;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    true
}

/// Normalize, clip at 0.2, renormalize.
pub(crate) fn normalize_descriptor(v: &mut [f64]) {
    if unit_normalize(v) {
        v.iter_mut().for_each(|x| *x = x.min(CLIP));
        unit_normalize(v);
    }
}

/// Fixed-orientation SIFT descriptor over a `patch_px × patch_px` window.
pub fn sift_at(img: &GrayImage, center: Point, patch_px: usize) -> Result<[f64; DESCRIPTOR_LEN]> {
    Ok(SiftLayout::new(patch_px)?.describe(img, center))
}

/// Concatenated per-landmark descriptors, `n × 128` values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn landmark_count(&self) -> usize {
        self.0.len() / DESCRIPTOR_LEN
    }

    pub fn block(&self, landmark: usize) -> &[f64] {
        &self.0[landmark * DESCRIPTOR_LEN..(landmark + 1) * DESCRIPTOR_LEN]
    }
}

/// Shape-indexed feature extraction for one landmark protocol.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    schema: Arc<AnnotationSchema>,
    layout: SiftLayout,
}

impl FeatureExtractor {
    pub fn new(schema: Arc<AnnotationSchema>, patch_px: usize) -> Result<Self> {
        Ok(Self {
            schema,
            layout: SiftLayout::new(patch_px)?,
        })
    }

    pub fn layout(&self) -> &SiftLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.schema.len() * DESCRIPTOR_LEN
    }

    pub fn extract(&self, img: &GrayImage, shape: &Shape) -> Result<FeatureVector> {
        shape.expect_schema(&self.schema)?;
        let mut out = Vec::with_capacity(self.dim());
        extract_into(&self.layout, img, shape.points(), &mut out);
        Ok(FeatureVector(out))
    }
}

/// Appends one descriptor per point, in order.
pub fn extract_into(layout: &SiftLayout, img: &GrayImage, points: &[Point], out: &mut Vec<f64>) {
    for &p in points {
        out.extend_from_slice(&layout.describe(img, p));
    }
}

/// Descriptors at every landmark of `shape`, in schema order.
pub fn extract_features(img: &GrayImage, shape: &Shape, patch_px: usize) -> Result<FeatureVector> {
    FeatureExtractor::new(shape.schema().clone(), patch_px)?.extract(img, shape)
}
