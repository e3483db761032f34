#![allow(dead_code)]

use std::sync::Arc;

use faer::Mat;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use tcr::cascade::engine::{fit_stages, initial_rows, run_stages, FittedStages, ShapeFeatures, StageData};
use tcr::cascade::{CascadeConfig, TrainingSample};
use tcr::geometry::{distance, mean_shape, AnnotationSchema, BBox, Point, Shape};
use tcr::synth::{face_landmarks, generate_corpus, render_face, FaceParams, SynthConfig, SynthCorpus};

pub fn small_corpus(train: usize, test: usize, seed: u64) -> SynthCorpus {
    let config = SynthConfig {
        train_per_dataset: train,
        test_per_dataset: test,
        ..SynthConfig::default()
    };
    generate_corpus(&config, seed).unwrap()
}

/// The canonical face under `schema` (a subset of the dense landmarks given
/// by `indices`), re-rendered with `n` different textures.
pub fn canonical_copies(n: usize, schema: &Arc<AnnotationSchema>, indices: &[usize]) -> Vec<TrainingSample> {
    (0..n)
        .map(|i| {
            let params = FaceParams {
                texture_seed: i as u64 + 1,
                ..FaceParams::canonical(250)
            };
            let dense = face_landmarks(&params);
            let truth = Shape::new(schema.clone(), indices.iter().map(|&k| dense[k]).collect()).unwrap();
            let bbox = BBox::around_points(&dense, 0.2).unwrap();
            TrainingSample::new(
                format!("canon_{i}"),
                Arc::new(render_face(&params).quantized()),
                truth,
                bbox,
            )
            .unwrap()
        })
        .collect()
}

/// Descriptors that are an exact affine function of the landmark positions.
pub struct AffineFeatures;

impl ShapeFeatures for AffineFeatures {
    fn extract(&self, _sample: usize, points: &[Point], out: &mut Vec<f64>) {
        for p in points {
            out.extend_from_slice(&[p[0], p[1], 0.3 * p[0] - 0.7 * p[1] + 2.0]);
        }
    }
}

/// Six landmarks; the first three are common and the private three are fixed
/// affine combinations of them, so private descriptors are an exact linear
/// function of the common ones.
pub fn affine_truth(c: [Point; 3]) -> Vec<Point> {
    let comb = |w: [f64; 3], t: Point| {
        [
            w[0] * c[0][0] + w[1] * c[1][0] + w[2] * c[2][0] + t[0],
            w[0] * c[0][1] + w[1] * c[1][1] + w[2] * c[2][1] + t[1],
        ]
    };
    vec![
        c[0],
        c[1],
        c[2],
        comb([0.5, 0.0, 0.5], [0.0, 20.0]),
        comb([0.3, 1.0, -0.3], [5.0, 0.0]),
        comb([-1.0, 0.0, 2.0], [0.0, 0.0]),
    ]
}

pub fn affine_guidance(truth: &[Point]) -> Vec<f64> {
    let mut g = Vec::new();
    AffineFeatures.extract(0, &truth[..3], &mut g);
    g
}

pub struct LinearSystem {
    pub fitted: FittedStages,
    pub mean: Shape,
    /// Held-out truths, never used in training.
    pub held_out: Vec<Vec<Point>>,
}

impl LinearSystem {
    /// Runs the guided stages from the mean shape on held-out sample `i`.
    pub fn transfer(&self, i: usize) -> Vec<f64> {
        let g = affine_guidance(&self.held_out[i]);
        run_stages(&self.fitted.stages, &AffineFeatures, 0, self.mean.to_flat(), Some(&g)).unwrap()
    }
}

/// Builds and trains the exactly linear guided regression problem.
pub fn linear_system(seed: u64) -> LinearSystem {
    let schema = Arc::new(AnnotationSchema::new("lin", (0..6).map(|i| format!("l{i}")).collect(), (0, 1)).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| -> Vec<Vec<Point>> {
        (0..n)
            .map(|_| {
                let mut j = || [rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0)];
                let (a, b, c) = (j(), j(), j());
                affine_truth([
                    [100.0 + a[0], 100.0 + a[1]],
                    [150.0 + b[0], 100.0 + b[1]],
                    [125.0 + c[0], 140.0 + c[1]],
                ])
            })
            .collect()
    };
    let truths = draw(40);
    let held_out = draw(10);
    let shapes: Vec<Shape> = truths
        .iter()
        .map(|t| Shape::new(schema.clone(), t.clone()).unwrap())
        .collect();
    let mean = mean_shape(&shapes).unwrap();
    let config = CascadeConfig {
        num_stages: 2,
        pca_energy: 1.0,
        ridge_lambda: 0.0,
        ..CascadeConfig::default()
    };
    let data = StageData {
        features: &AffineFeatures,
        interoculars: truths.iter().map(|t| distance(t[0], t[1])).collect(),
        guidance: Some(truths.iter().map(|t| affine_guidance(t)).collect()),
        truths,
    };
    let rows = initial_rows(&mean, &data.truths, &config);
    let fitted = fit_stages(&data, rows, &config).unwrap();
    LinearSystem { fitted, mean, held_out }
}

pub fn random(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<f64> {
    (0..n * d).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn faer_mat(n: usize, d: usize, v: &[f64]) -> Mat<f64> {
    Mat::from_fn(n, d, |i, j| v[i * d + j])
}

/// Bias-augmented normal equations with the bias left unpenalized:
/// (ZᵀZ + λ·diag(1..1, 0)) W = ZᵀY where Z = [X 1].
pub fn ridge_oracle(n: usize, d: usize, m: usize, x: &[f64], y: &[f64], lambda: f64) -> (DMatrix<f64>, DVector<f64>) {
    let z = DMatrix::from_fn(n, d + 1, |i, j| if j < d { x[i * d + j] } else { 1.0 });
    let y = DMatrix::from_row_slice(n, m, y);
    let mut lhs = z.transpose() * &z;
    for i in 0..d {
        lhs[(i, i)] += lambda;
    }
    let w = lhs.lu().solve(&(z.transpose() * y)).expect("oracle system is regular");
    let a = w.rows(0, d).transpose();
    let b = w.row(d).transpose();
    (a, b)
}

pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let num: f64 = got.iter().zip(want).map(|(g, w)| (g - w).powi(2)).sum::<f64>().sqrt();
    let den: f64 = want.iter().map(|w| w * w).sum::<f64>().sqrt();
    num / den.max(1e-300)
}
