use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::cascade::engine::{fit_stages, initial_rows, run_stages, SiftFeatures, StageData};
use crate::cascade::{normalize_sample, CascadeConfig, NormalizedSample, Stage, TrainingSample};
use crate::error::{Error, Result};
use crate::features::GrayImage;
use crate::geometry::{mean_shape, AnnotationSchema, BBox, Shape};

/// Trained plain cascade over one landmark protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeModel {
    pub(crate) schema: Arc<AnnotationSchema>,
    /// Initial estimate in the reference frame.
    pub(crate) mean_shape: Shape,
    pub(crate) stages: Vec<Stage>,
    pub(crate) config: CascadeConfig,
}

/// Bookkeeping from one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub samples_used: usize,
    pub samples_skipped: usize,
    /// Mean training RMSE% at the initialization and after every stage.
    pub stage_errors: Vec<f64>,
}

impl TrainingLog {
    pub fn is_monotone(&self) -> bool {
        self.stage_errors.windows(2).all(|w| w[1] <= w[0])
    }
}

impl CascadeModel {
    pub fn schema(&self) -> &Arc<AnnotationSchema> {
        &self.schema
    }

    pub fn mean_shape(&self) -> &Shape {
        &self.mean_shape
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn config(&self) -> &CascadeConfig {
        &self.config
    }

    pub fn output_dim(&self) -> usize {
        2 * self.schema.len()
    }

    /// Predicts landmarks on an already normalized (reference-frame) image.
    pub fn infer_normalized(&self, image: &GrayImage) -> Result<Shape> {
        let features = SiftFeatures::new(vec![image], self.config.patch_px)?;
        let flat = run_stages(&self.stages, &features, 0, self.mean_shape.to_flat(), None)?;
        Shape::from_flat(self.schema.clone(), &flat)
    }

    /// Predicts landmarks in original pixel coordinates.
    pub fn infer(&self, image: &GrayImage, bbox: &BBox) -> Result<Shape> {
        let to_frame = bbox.to_frame(self.config.frame_px)?;
        let framed = image.warp(&to_frame, self.config.frame_px);
        Ok(self.infer_normalized(&framed)?.transformed(&to_frame.inverse()))
    }
}

pub fn infer(model: &CascadeModel, image: &GrayImage, bbox: &BBox) -> Result<Shape> {
    model.infer(image, bbox)
}

/// Normalizes every sample, skipping (and counting) the ones that fail.
pub(crate) fn normalize_all(
    samples: &[TrainingSample],
    schema: &AnnotationSchema,
    frame_px: usize,
) -> (Vec<NormalizedSample>, usize) {
    let mut out = Vec::with_capacity(samples.len());
    let mut skipped = 0;
    for s in samples {
        if s.truth.schema().as_ref() != schema {
            warn!("sample {}: annotation is not `{}`, skipped", s.id, schema.name());
            skipped += 1;
            continue;
        }
        match normalize_sample(s, frame_px).and_then(|n| {
            n.truth.interocular_distance()?;
            Ok(n)
        }) {
            Ok(n) => out.push(n),
            Err(e) => {
                warn!("sample {}: {e}, skipped", s.id);
                skipped += 1;
            }
        }
    }
    (out, skipped)
}

/// Supervised-descent training: mean-shape initializations perturbed once,
/// then `num_stages` rounds of PCA-compressed linear regression.
pub fn train_sdm(
    samples: &[TrainingSample],
    schema: &Arc<AnnotationSchema>,
    config: &CascadeConfig,
) -> Result<(CascadeModel, TrainingLog)> {
    config.validate()?;
    let (normalized, skipped) = normalize_all(samples, schema, config.frame_px);
    if normalized.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 usable samples, got {}",
            normalized.len()
        )));
    }
    let truths: Vec<Shape> = normalized.iter().map(|n| n.truth.clone()).collect();
    let mean = mean_shape(&truths)?;
    let features = SiftFeatures::new(normalized.iter().map(|n| &n.image).collect(), config.patch_px)?;
    let data = StageData {
        features: &features,
        truths: truths.iter().map(|t| t.points().to_vec()).collect(),
        interoculars: truths.iter().map(Shape::interocular_distance).collect::<Result<_>>()?,
        guidance: None,
    };
    let rows = initial_rows(&mean, &data.truths, config);
    let fitted = fit_stages(&data, rows, config)?;
    let log = TrainingLog {
        samples_used: normalized.len(),
        samples_skipped: skipped,
        stage_errors: fitted.stage_errors,
    };
    Ok((
        CascadeModel {
            schema: schema.clone(),
            mean_shape: mean,
            stages: fitted.stages,
            config: config.clone(),
        },
        log,
    ))
}
