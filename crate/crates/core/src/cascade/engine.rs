//! Staged shape-increment regression shared by the plain and the guided
//! cascade. A stage extracts descriptors at the current estimates (plus an
//! optional fixed per-sample block), compresses them with PCA and regresses
//! the remaining displacement.

use faer::Mat;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cascade::CascadeConfig;
use crate::error::{Error, Result};
use crate::features::{extract_into, GrayImage, SiftLayout};
use crate::geometry::{rmse_percent_points, Point, Shape, SimilarityTransform};
use crate::regression::{pca_fit, solve_ridge, LinearMap, PcaBasis};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub pca: PcaBasis,
    pub map: LinearMap,
}

impl Stage {
    /// Shape increment predicted from a raw feature vector.
    pub fn increment(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.map.apply(&self.pca.project(features)?)
    }
}

/// Shape-indexed descriptor of one training sample.
pub trait ShapeFeatures {
    /// Appends the descriptor of `sample` with its landmarks at `points`.
    fn extract(&self, sample: usize, points: &[Point], out: &mut Vec<f64>);
}

/// SIFT blocks at every landmark of reference-frame images.
pub struct SiftFeatures<'a> {
    layout: SiftLayout,
    images: Vec<&'a GrayImage>,
}

impl<'a> SiftFeatures<'a> {
    pub fn new(images: Vec<&'a GrayImage>, patch_px: usize) -> Result<Self> {
        Ok(Self {
            layout: SiftLayout::new(patch_px)?,
            images,
        })
    }
}

impl ShapeFeatures for SiftFeatures<'_> {
    fn extract(&self, sample: usize, points: &[Point], out: &mut Vec<f64>) {
        extract_into(&self.layout, self.images[sample], points, out);
    }
}

/// Per-sample training material in the reference frame.
pub struct StageData<'a> {
    pub features: &'a dyn ShapeFeatures,
    pub truths: Vec<Vec<Point>>,
    pub interoculars: Vec<f64>,
    /// Fixed block appended to every feature vector of the sample.
    pub guidance: Option<Vec<Vec<f64>>>,
}

/// Training outcome: the stages and mean RMSE% over all training rows before
/// the first stage and after each stage.
#[derive(Debug, Clone)]
pub struct FittedStages {
    pub stages: Vec<Stage>,
    pub stage_errors: Vec<f64>,
}

pub(crate) fn points_to_flat(points: &[Point]) -> Vec<f64> {
    points.iter().flatten().copied().collect()
}

pub(crate) fn flat_to_points(flat: &[f64]) -> Vec<Point> {
    flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
}

fn features_for(features: &dyn ShapeFeatures, sample: usize, current: &[f64], guidance: Option<&[f64]>) -> Vec<f64> {
    let pts = flat_to_points(current);
    let mut out = Vec::with_capacity(pts.len() * crate::features::DESCRIPTOR_LEN + guidance.map_or(0, <[f64]>::len));
    features.extract(sample, &pts, &mut out);
    if let Some(g) = guidance {
        out.extend_from_slice(g);
    }
    out
}

fn mean_error(data: &StageData<'_>, rows: &[(usize, Vec<f64>)]) -> Result<f64> {
    let mut sum = 0.0;
    for (s, cur) in rows {
        sum += rmse_percent_points(&flat_to_points(cur), &data.truths[*s], data.interoculars[*s])?;
    }
    Ok(sum / rows.len() as f64)
}

/// PCA with a bias-only fallback when the features carry no variance.
fn fit_basis(x: &Mat<f64>, energy: f64) -> Result<PcaBasis> {
    match pca_fit(x.as_ref(), energy) {
        Err(Error::DegenerateData(_)) => {
            let d = x.ncols();
            let mean = (0..d).map(|j| x[(0, j)]).collect();
            PcaBasis::from_parts(mean, Vec::new(), Vec::new(), 1.0)
        }
        other => other,
    }
}

/// Fits `config.num_stages` stages starting from `rows`, which pair a sample
/// index with an initial flattened estimate.
pub fn fit_stages(
    data: &StageData<'_>,
    mut rows: Vec<(usize, Vec<f64>)>,
    config: &CascadeConfig,
) -> Result<FittedStages> {
    let out_dim = rows
        .first()
        .map(|r| r.1.len())
        .ok_or_else(|| Error::InsufficientData("no training rows".into()))?;
    let guidance = |s: usize| data.guidance.as_ref().map(|g| g[s].as_slice());
    let mut stage_errors = vec![mean_error(data, &rows)?];
    let mut stages = Vec::with_capacity(config.num_stages);

    for _ in 0..config.num_stages {
        let n = rows.len();
        let first = features_for(data.features, rows[0].0, &rows[0].1, guidance(rows[0].0));
        let d = first.len();
        let mut x = Mat::<f64>::zeros(n, d);
        let mut y = Mat::<f64>::zeros(n, out_dim);
        for (i, (s, cur)) in rows.iter().enumerate() {
            let feats = if i == 0 {
                first.clone()
            } else {
                features_for(data.features, *s, cur, guidance(*s))
            };
            if feats.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: feats.len(),
                });
            }
            for (j, v) in feats.into_iter().enumerate() {
                x[(i, j)] = v;
            }
            for (j, (t, c)) in points_to_flat(&data.truths[*s]).iter().zip(cur).enumerate() {
                y[(i, j)] = t - c;
            }
        }
        let pca = fit_basis(&x, config.pca_energy)?;
        let z = pca.project_rows(x.as_ref())?;
        drop(x);
        let map = solve_ridge(z.as_ref(), y.as_ref(), config.ridge_lambda)?;
        let delta = map.apply_rows(z.as_ref())?;
        for (i, (_, cur)) in rows.iter_mut().enumerate() {
            for (j, c) in cur.iter_mut().enumerate() {
                *c += delta[(i, j)];
            }
        }
        stage_errors.push(mean_error(data, &rows)?);
        stages.push(Stage { pca, map });
    }
    Ok(FittedStages { stages, stage_errors })
}

/// Runs the stages on one sample of `features`.
pub fn run_stages(
    stages: &[Stage],
    features: &dyn ShapeFeatures,
    sample: usize,
    init: Vec<f64>,
    guidance: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let mut current = init;
    for stage in stages {
        let feats = features_for(features, sample, &current, guidance);
        let delta = stage.increment(&feats)?;
        for (c, d) in current.iter_mut().zip(delta) {
            *c += d;
        }
    }
    Ok(current)
}

/// Seed for a sample's perturbation stream, derived from its ground-truth
/// coordinates so that duplicated samples draw identical initializations
/// regardless of their position in the training set.
pub(crate) fn sample_seed(seed: u64, truth: &[Point]) -> u64 {
    let mut h = splitmix(seed ^ 0x5443_5231_0000_0000);
    for v in truth.iter().flatten() {
        h = splitmix(h ^ v.to_bits());
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// `config.perturbations_per_sample` copies of `mean`, each moved by a random
/// similarity about its centroid.
pub fn perturb_initializations(mean: &Shape, config: &CascadeConfig, rng: &mut impl Rng) -> Vec<Shape> {
    let p = &config.perturbation;
    let pivot = mean.centroid();
    (0..config.perturbations_per_sample)
        .map(|_| {
            let scale = uniform(rng, p.scale_min, p.scale_max);
            let rotation = uniform(rng, -p.rotation_rad, p.rotation_rad);
            let shift = [
                uniform(rng, -p.translation_px, p.translation_px),
                uniform(rng, -p.translation_px, p.translation_px),
            ];
            mean.transformed(&SimilarityTransform::about(pivot, scale, rotation, shift))
        })
        .collect()
}

/// Perturbed initializations for every sample, seeded by its ground truth.
pub fn initial_rows(mean: &Shape, truths: &[Vec<Point>], config: &CascadeConfig) -> Vec<(usize, Vec<f64>)> {
    let mut rows = Vec::with_capacity(truths.len() * config.perturbations_per_sample);
    for (s, truth) in truths.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(config.rng_seed, truth));
        for init in perturb_initializations(mean, config, &mut rng) {
            rows.push((s, init.to_flat()));
        }
    }
    rows
}
