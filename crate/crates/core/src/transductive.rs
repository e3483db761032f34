//! Guided cascade that labels source-protocol landmarks on target images,
//! using descriptors taken at the target's annotated common landmarks.

use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::cascade::engine::{fit_stages, initial_rows, run_stages, SiftFeatures, StageData};
use crate::cascade::{normalize_all, CascadeConfig, Stage, TrainingLog, TrainingSample};
use crate::error::{Error, Result};
use crate::features::{extract_into, SiftLayout, DESCRIPTOR_LEN};
use crate::geometry::{mean_shape, rmse_percent_points, AnnotationSchema, CorrespondenceMap, Point, Shape};

/// Whether the guidance block carries descriptors or zeros (ablation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Guidance {
    #[default]
    GroundTruth,
    Zeroed,
}

#[derive(Debug, Clone)]
pub struct TransductiveModel {
    correspondence: CorrespondenceMap,
    mean_shape: Shape,
    stages: Vec<Stage>,
    config: CascadeConfig,
    guidance: Guidance,
}

/// A target image carrying a machine-transferred source-protocol annotation.
#[derive(Debug, Clone)]
pub struct PseudoLabeledSample {
    /// The target sample relabelled with the transferred shape; its original
    /// annotation moves into `extra`.
    pub sample: TrainingSample,
    /// RMSE% of the transferred common landmarks against the target's own
    /// annotation, normalized by the target interocular distance.
    pub common_residual: f64,
}

impl PseudoLabeledSample {
    pub fn transferred(&self) -> &Shape {
        &self.sample.truth
    }
}

/// Pseudo-labels that passed the ε-filter, in input order.
#[derive(Debug, Clone)]
pub struct Filtered {
    pub retained: Vec<PseudoLabeledSample>,
    pub rejected: usize,
}

impl TransductiveModel {
    pub fn schema(&self) -> &Arc<AnnotationSchema> {
        self.correspondence.source()
    }

    pub fn correspondence(&self) -> &CorrespondenceMap {
        &self.correspondence
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

    pub fn guidance(&self) -> Guidance {
        self.guidance
    }

    /// Feature dimension each stage sees before PCA.
    pub fn input_dim(&self) -> usize {
        (self.schema().len() + self.correspondence.len()) * DESCRIPTOR_LEN
    }

    pub fn output_dim(&self) -> usize {
        2 * self.schema().len()
    }

    /// Transfers onto one target sample; the result is in original pixels.
    pub fn transfer_one(&self, target: &TrainingSample) -> Result<PseudoLabeledSample> {
        let common = self.correspondence.common_from_target(&target.truth)?;
        let iod = self.correspondence.target_interocular(&target.truth)?;
        let to_frame = target.bbox.to_frame(self.config.frame_px)?;
        let image = target.image.warp(&to_frame, self.config.frame_px);
        let layout = SiftLayout::new(self.config.patch_px)?;
        let guidance = guidance_block(&layout, &image, &to_frame.apply_all(&common), self.guidance);
        let features = SiftFeatures::new(vec![&image], self.config.patch_px)?;
        let flat = run_stages(&self.stages, &features, 0, self.mean_shape.to_flat(), Some(&guidance))?;
        let shape = Shape::from_flat(self.schema().clone(), &flat)?.transformed(&to_frame.inverse());
        let moved = self.correspondence.common_from_source(&shape)?;
        let common_residual = rmse_percent_points(&moved, &common, iod)?;

        let mut sample = target.relabelled(shape);
        sample
            .extra
            .insert(target.truth.schema().name().to_string(), target.truth.clone());
        Ok(PseudoLabeledSample {
            sample,
            common_residual,
        })
    }
}

fn guidance_block(
    layout: &SiftLayout,
    image: &crate::features::GrayImage,
    common: &[Point],
    mode: Guidance,
) -> Vec<f64> {
    match mode {
        Guidance::GroundTruth => {
            let mut g = Vec::with_capacity(common.len() * DESCRIPTOR_LEN);
            extract_into(layout, image, common, &mut g);
            g
        }
        Guidance::Zeroed => vec![0.0; common.len() * DESCRIPTOR_LEN],
    }
}

/// Trains the guided cascade on source samples. Each stage regresses the
/// remaining displacement of all source landmarks from the descriptors at
/// the current estimate followed by the descriptors at the ground-truth
/// common landmarks.
pub fn train_transductive(
    source: &[TrainingSample],
    correspondence: &CorrespondenceMap,
    config: &CascadeConfig,
    guidance: Guidance,
) -> Result<(TransductiveModel, TrainingLog)> {
    config.validate()?;
    let schema = correspondence.source();
    let (normalized, skipped) = normalize_all(source, schema, config.frame_px);
    if normalized.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 usable source samples, got {}",
            normalized.len()
        )));
    }
    let truths: Vec<Shape> = normalized.iter().map(|n| n.truth.clone()).collect();
    let mean = mean_shape(&truths)?;
    let layout = SiftLayout::new(config.patch_px)?;
    let blocks = normalized
        .iter()
        .map(|n| {
            let common = correspondence.common_from_source(&n.truth)?;
            Ok(guidance_block(&layout, &n.image, &common, guidance))
        })
        .collect::<Result<Vec<_>>>()?;
    let features = SiftFeatures::new(normalized.iter().map(|n| &n.image).collect(), config.patch_px)?;
    let data = StageData {
        features: &features,
        truths: truths.iter().map(|t| t.points().to_vec()).collect(),
        interoculars: truths.iter().map(Shape::interocular_distance).collect::<Result<_>>()?,
        guidance: Some(blocks),
    };
    let rows = initial_rows(&mean, &data.truths, config);
    let fitted = fit_stages(&data, rows, config)?;
    let log = TrainingLog {
        samples_used: normalized.len(),
        samples_skipped: skipped,
        stage_errors: fitted.stage_errors,
    };
    Ok((
        TransductiveModel {
            correspondence: correspondence.clone(),
            mean_shape: mean,
            stages: fitted.stages,
            config: config.clone(),
            guidance,
        },
        log,
    ))
}

/// Labels every target sample with source-protocol landmarks, in input order.
/// The first sample that cannot be transferred aborts the call.
pub fn transfer_annotations(
    model: &TransductiveModel,
    targets: &[TrainingSample],
    correspondence: &CorrespondenceMap,
) -> Result<Vec<PseudoLabeledSample>> {
    if correspondence.source().as_ref() != model.schema().as_ref()
        || correspondence.pairs() != model.correspondence.pairs()
    {
        return Err(Error::SchemaMismatch(
            "correspondence differs from the one the model was trained with".into(),
        ));
    }
    targets.iter().map(|t| model.transfer_one(t)).collect()
}

/// Like [`transfer_annotations`] but skips samples that cannot be transferred,
/// returning how many were dropped.
pub fn transfer_annotations_lenient(
    model: &TransductiveModel,
    targets: &[TrainingSample],
) -> (Vec<PseudoLabeledSample>, usize) {
    let mut out = Vec::with_capacity(targets.len());
    let mut skipped = 0;
    for t in targets {
        match model.transfer_one(t) {
            Ok(p) => out.push(p),
            Err(e) => {
                warn!("target {}: {e}, not transferred", t.id);
                skipped += 1;
            }
        }
    }
    (out, skipped)
}

/// Keeps pseudo-labels whose common residual is at most `epsilon`.
pub fn filter_pseudo(pseudo: &[PseudoLabeledSample], epsilon: f64) -> Result<Filtered> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::InvalidArgument(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let retained: Vec<_> = pseudo
        .iter()
        .filter(|p| p.common_residual <= epsilon)
        .cloned()
        .collect();
    Ok(Filtered {
        rejected: pseudo.len() - retained.len(),
        retained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::GrayImage;
    use crate::geometry::BBox;

    fn fake(residual: f64) -> PseudoLabeledSample {
        let schema = Arc::new(AnnotationSchema::new("s", vec!["a".into(), "b".into()], (0, 1)).unwrap());
        let truth = Shape::new(schema, vec![[1.0, 1.0], [5.0, 1.0]]).unwrap();
        let img = Arc::new(GrayImage::from_fn(8, 8, |_, _| 0.5).unwrap());
        PseudoLabeledSample {
            sample: TrainingSample::new(
                format!("{residual}"),
                img,
                truth,
                BBox::new(0.0, 0.0, 8.0, 8.0).unwrap(),
            )
            .unwrap(),
            common_residual: residual,
        }
    }

    #[test]
    fn boundary_is_inclusive() {
        let p = vec![fake(3.0), fake(7.5), fake(7.6)];
        let f = filter_pseudo(&p, 7.5).unwrap();
        assert_eq!(f.retained.len(), 2);
        assert_eq!(f.rejected, 1);
        assert_eq!(f.retained[0].common_residual, 3.0);
        assert_eq!(f.retained[1].common_residual, 7.5);
    }

    #[test]
    fn infinite_and_zero_epsilon() {
        let p = vec![fake(0.0), fake(2.0), fake(40.0)];
        assert_eq!(filter_pseudo(&p, f64::INFINITY).unwrap().retained.len(), 3);
        let z = filter_pseudo(&p, 0.0).unwrap();
        assert_eq!(z.retained.len(), 1);
        assert_eq!(z.rejected, 2);
    }

    #[test]
    fn negative_epsilon_rejected() {
        assert!(matches!(filter_pseudo(&[], -1.0), Err(Error::InvalidArgument(_))));
        assert!(filter_pseudo(&[], f64::NAN).is_err());
    }
}
