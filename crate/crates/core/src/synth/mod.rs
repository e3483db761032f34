//! Deterministic synthetic corpora: paired datasets annotated under two
//! overlapping protocols, with the dense truth kept for scoring.

mod face;

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cascade::TrainingSample;
use crate::error::{Error, Result};
use crate::features::{GrayImage, SiftLayout};
use crate::geometry::{AnnotationSchema, BBox, CorrespondenceMap, Point, Shape};

pub use face::{face_landmarks, render_face, FaceParams, DENSE_LANDMARKS, DENSE_NAMES, EYE_L_CENTER, EYE_R_CENTER};

/// Name of the schema holding every dense landmark.
pub const DENSE_SCHEMA: &str = "synth_dense";

/// Descriptor energy below which a landmark patch counts as flat.
pub const GRADIENT_ENERGY_FLOOR: f64 = 1e-3;

const DEFAULT_A: [usize; 18] = [5, 6, 12, 14, 15, 17, 18, 20, 22, 23, 25, 27, 29, 30, 31, 33, 35, 39];
const DEFAULT_B: [usize; 29] = [
    0, 1, 2, 3, 4, 7, 8, 9, 10, 11, 13, 16, 18, 19, 21, 22, 24, 25, 26, 27, 28, 29, 32, 33, 34, 35, 36, 37, 39,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Size of the dense landmark set; the face model defines exactly 40.
    pub n_dense: usize,
    pub schema_a_indices: Vec<usize>,
    pub schema_b_indices: Vec<usize>,
    pub train_per_dataset: usize,
    pub test_per_dataset: usize,
    /// Standard deviation of the in-plane tilt (radians).
    pub tilt_sd: f64,
    /// Standard deviation of the pseudo out-of-plane yaw.
    pub yaw_sd: f64,
    /// Standard deviation of the horizontal stretch.
    pub aspect_sd: f64,
    /// Standard deviation of each shading slope component.
    pub light_sd: f64,
    /// Multiplier on the per-part shape variation (eyes, brows, nose, mouth).
    pub shape_jitter: f64,
    /// Bounding-box jitter as a fraction of the box size.
    pub bbox_jitter: f64,
    /// Mixed into every face's texture seed.
    pub texture_seed: u64,
    /// Shifts dataset A's tilt, stretch and lighting distributions one way
    /// and B's the other.
    pub distribution_skew: f64,
    pub image_px: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_dense: DENSE_LANDMARKS,
            schema_a_indices: DEFAULT_A.to_vec(),
            schema_b_indices: DEFAULT_B.to_vec(),
            train_per_dataset: 200,
            test_per_dataset: 50,
            tilt_sd: 0.08,
            yaw_sd: 0.12,
            aspect_sd: 0.05,
            light_sd: 0.15,
            shape_jitter: 1.0,
            bbox_jitter: 0.03,
            texture_seed: 0,
            distribution_skew: 1.0,
            image_px: 250,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if self.n_dense != DENSE_LANDMARKS {
            return bad(format!("n_dense must be {DENSE_LANDMARKS}, got {}", self.n_dense));
        }
        for (name, idx) in [("a", &self.schema_a_indices), ("b", &self.schema_b_indices)] {
            if idx.iter().any(|&i| i >= self.n_dense) {
                return bad(format!("schema_{name}_indices out of the dense range"));
            }
            let mut sorted = idx.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != idx.len() {
                return bad(format!("schema_{name}_indices repeat an index"));
            }
            if !idx.contains(&EYE_L_CENTER) || !idx.contains(&EYE_R_CENTER) {
                return bad(format!("schema_{name}_indices must contain both eye centers"));
            }
        }
        let overlap = self
            .schema_a_indices
            .iter()
            .filter(|i| self.schema_b_indices.contains(i))
            .count();
        if overlap < 2 {
            return bad(format!("schemas share {overlap} landmarks, need at least 2"));
        }
        if self.train_per_dataset < 2 {
            return bad("train_per_dataset must be at least 2".into());
        }
        let nonneg = [
            ("tilt_sd", self.tilt_sd),
            ("yaw_sd", self.yaw_sd),
            ("aspect_sd", self.aspect_sd),
            ("light_sd", self.light_sd),
            ("shape_jitter", self.shape_jitter),
            ("bbox_jitter", self.bbox_jitter),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and non-negative"));
            }
        }
        if self.bbox_jitter >= 0.2 {
            return bad("bbox_jitter must be below 0.2".into());
        }
        if !self.distribution_skew.is_finite() || self.distribution_skew.abs() > 3.0 {
            return bad("distribution_skew must lie in [-3, 3]".into());
        }
        if self.image_px < 64 {
            return bad("image_px must be at least 64".into());
        }
        Ok(())
    }

    /// Sub-protocol over the given dense indices, in the order given.
    pub fn schema(&self, name: &str, indices: &[usize]) -> Result<AnnotationSchema> {
        let names: Vec<String> = indices.iter().map(|&i| DENSE_NAMES[i].to_string()).collect();
        let pos = |d| indices.iter().position(|&i| i == d);
        let pair = pos(EYE_L_CENTER)
            .zip(pos(EYE_R_CENTER))
            .ok_or_else(|| Error::ConfigInvalid(format!("schema `{name}` lacks an eye center")))?;
        AnnotationSchema::new(name, names, pair)
    }
}

pub fn dense_schema() -> Arc<AnnotationSchema> {
    let names = DENSE_NAMES.iter().map(|s| s.to_string()).collect();
    Arc::new(
        AnnotationSchema::new(DENSE_SCHEMA, names, (EYE_L_CENTER, EYE_R_CENTER)).expect("dense names are distinct"),
    )
}

/// One dataset under one protocol, with its fixed train/test split.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub name: String,
    pub schema: Arc<AnnotationSchema>,
    pub train: Vec<TrainingSample>,
    pub test: Vec<TrainingSample>,
    /// Generator parameters, aligned with `train` then `test`.
    pub params: Vec<FaceParams>,
}

/// Datasets A and B plus the map between their protocols.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub a: SynthDataset,
    pub b: SynthDataset,
    pub dense: Arc<AnnotationSchema>,
    /// A → B.
    pub correspondence: CorrespondenceMap,
}

/// How one dataset differs from the others.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub indices: Vec<usize>,
    /// Signed distribution shift in units of the config's skew.
    pub pose_shift: f64,
    /// Distinguishes the face identities of different datasets.
    pub stream: u64,
}

fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn normal(rng: &mut impl Rng, mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return mean;
    }
    Normal::new(mean, sd).expect("finite sd").sample(rng)
}

fn draw_params(config: &SynthConfig, shift: f64, rng: &mut impl Rng) -> FaceParams {
    let base = FaceParams::canonical(config.image_px);
    let j = config.shape_jitter;
    let skew = config.distribution_skew * shift;
    let px = config.image_px as f64;
    FaceParams {
        center: [
            base.center[0] + rng.gen_range(-0.04..0.04) * px,
            base.center[1] + rng.gen_range(-0.04..0.04) * px,
        ],
        scale: base.scale * rng.gen_range(0.88..1.05),
        tilt: normal(rng, 0.1 * skew, config.tilt_sd),
        aspect: normal(rng, 1.0 + 0.05 * skew, config.aspect_sd).clamp(0.8, 1.2),
        yaw: normal(rng, 0.0, config.yaw_sd).clamp(-0.5, 0.5),
        eye_sep: normal(rng, base.eye_sep, 0.03 * j).clamp(0.32, 0.52),
        eye_open: normal(rng, base.eye_open, 0.15 * j).clamp(0.6, 1.3),
        brow_raise: normal(rng, 0.0, 0.04 * j).clamp(-0.1, 0.1),
        nose_len: normal(rng, base.nose_len, 0.04 * j).clamp(0.25, 0.45),
        mouth_width: normal(rng, base.mouth_width, 0.04 * j).clamp(0.22, 0.44),
        mouth_open: normal(rng, base.mouth_open, 0.04 * j).clamp(0.0, 0.15),
        light: [
            normal(rng, 0.15 * skew, config.light_sd),
            normal(rng, 0.0, config.light_sd),
        ],
        texture_seed: mix(config.texture_seed, rng.gen()),
        image_px: config.image_px,
    }
}

fn inside(points: &[Point], px: usize) -> bool {
    let hi = px as f64 - 1.0;
    points
        .iter()
        .all(|p| p[0] > 0.0 && p[0] < hi && p[1] > 0.0 && p[1] < hi)
}

struct Face {
    params: FaceParams,
    dense: Vec<Point>,
    image: GrayImage,
    bbox: BBox,
}

fn make_face(config: &SynthConfig, shift: f64, seed: u64) -> Result<Face> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (params, dense) = loop {
        let p = draw_params(config, shift, &mut rng);
        let d = face_landmarks(&p);
        if inside(&d, config.image_px) {
            break (p, d);
        }
    };
    let tight = BBox::around_points(&dense, 0.2)?;
    let jit = config.bbox_jitter;
    let mut u = || if jit > 0.0 { rng.gen_range(-jit..jit) } else { 0.0 };
    let (dx, dy, dw, dh) = (u(), u(), u(), u());
    let bbox = BBox::new(
        tight.x + dx * tight.w,
        tight.y + dy * tight.h,
        tight.w * (1.0 + dw),
        tight.h * (1.0 + dh),
    )?;
    Ok(Face {
        image: render_face(&params).quantized(),
        params,
        dense,
        bbox,
    })
}

/// Shapes of one face under every registered protocol.
fn views(dense: &[Point], schemas: &[(&Arc<AnnotationSchema>, &[usize])]) -> Result<Vec<Shape>> {
    schemas
        .iter()
        .map(|(s, idx)| Shape::new((*s).clone(), idx.iter().map(|&i| dense[i]).collect()))
        .collect()
}

/// Generates one dataset annotated with `spec`'s protocol. Every sample keeps
/// the dense truth and the views listed in `others` as extras.
pub fn generate_dataset(
    config: &SynthConfig,
    spec: &DatasetSpec,
    others: &[(Arc<AnnotationSchema>, Vec<usize>)],
    seed: u64,
) -> Result<SynthDataset> {
    config.validate()?;
    let schema = Arc::new(config.schema(&spec.name, &spec.indices)?);
    let dense = dense_schema();
    let all_idx: Vec<usize> = (0..DENSE_LANDMARKS).collect();
    let mut extra_schemas: Vec<(&Arc<AnnotationSchema>, &[usize])> = vec![(&dense, &all_idx)];
    for (s, idx) in others {
        extra_schemas.push((s, idx));
    }

    let stream = mix(mix(seed, 0x5359_4e54), spec.stream);
    let total = config.train_per_dataset + config.test_per_dataset;
    let mut train = Vec::with_capacity(config.train_per_dataset);
    let mut test = Vec::with_capacity(config.test_per_dataset);
    let mut params = Vec::with_capacity(total);
    for i in 0..total {
        let face = make_face(config, spec.pose_shift, mix(stream, i as u64))?;
        let truth = views(&face.dense, &[(&schema, &spec.indices)])?.remove(0);
        let split = if i < config.train_per_dataset { "train" } else { "test" };
        let mut sample = TrainingSample::new(
            format!("{}_{split}_{i:04}", spec.name),
            Arc::new(face.image),
            truth,
            face.bbox,
        )?;
        for v in views(&face.dense, &extra_schemas)? {
            sample.extra.insert(v.schema().name().to_string(), v);
        }
        params.push(face.params);
        if i < config.train_per_dataset {
            train.push(sample);
        } else {
            test.push(sample);
        }
    }
    Ok(SynthDataset {
        name: spec.name.clone(),
        schema,
        train,
        test,
        params,
    })
}

/// Datasets `synth_a` and `synth_b`, skewed in opposite directions.
pub fn generate_corpus(config: &SynthConfig, seed: u64) -> Result<SynthCorpus> {
    config.validate()?;
    let spec_a = DatasetSpec {
        name: "synth_a".into(),
        indices: config.schema_a_indices.clone(),
        pose_shift: 1.0,
        stream: 0,
    };
    let spec_b = DatasetSpec {
        name: "synth_b".into(),
        indices: config.schema_b_indices.clone(),
        pose_shift: -1.0,
        stream: 1,
    };
    let schema_a = Arc::new(config.schema(&spec_a.name, &spec_a.indices)?);
    let schema_b = Arc::new(config.schema(&spec_b.name, &spec_b.indices)?);
    let a = generate_dataset(config, &spec_a, &[(schema_b.clone(), spec_b.indices.clone())], seed)?;
    let b = generate_dataset(config, &spec_b, &[(schema_a.clone(), spec_a.indices.clone())], seed)?;
    let correspondence = CorrespondenceMap::by_names(a.schema.clone(), b.schema.clone())?;
    Ok(SynthCorpus {
        a,
        b,
        dense: dense_schema(),
        correspondence,
    })
}

/// Smallest raw descriptor energy over the landmark patches of a sample.
pub fn min_patch_energy(image: &GrayImage, points: &[Point], patch_px: usize) -> Result<f64> {
    let layout = SiftLayout::new(patch_px)?;
    Ok(points
        .iter()
        .map(|&p| layout.histogram(image, p).iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(f64::INFINITY, f64::min))
}
