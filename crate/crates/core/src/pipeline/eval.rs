use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeModel, TrainingSample};
use crate::error::{Error, Result};
use crate::geometry::{rmse_percent, AnnotationSchema, CorrespondenceMap, Shape};

/// Error above this RMSE% counts as a failure.
pub const FAILURE_THRESHOLD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    Common,
    All,
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subset::Common => "common",
            Subset::All => "all",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub subset: Subset,
    pub mean_error: f64,
    pub failure_rate: f64,
    pub per_sample_errors: Vec<f64>,
}

impl EvalReport {
    /// Summarizes per-sample RMSE% values; failures are errors strictly
    /// above `threshold`.
    pub fn from_errors(subset: Subset, errors: Vec<f64>, threshold: f64) -> Result<Self> {
        if errors.is_empty() {
            return Err(Error::EmptyInput("evaluation samples"));
        }
        let n = errors.len() as f64;
        Ok(Self {
            subset,
            mean_error: errors.iter().sum::<f64>() / n,
            failure_rate: errors.iter().filter(|&&e| e > threshold).count() as f64 / n,
            per_sample_errors: errors,
        })
    }

    pub fn sample_count(&self) -> usize {
        self.per_sample_errors.len()
    }
}

/// Ground truth of `sample` under `schema`: its own annotation, an extra one,
/// or the common landmarks assembled through `map` when `schema` is the map's
/// common protocol.
pub fn lookup_truth(
    sample: &TrainingSample,
    schema: &Arc<AnnotationSchema>,
    map: Option<&CorrespondenceMap>,
) -> Result<Shape> {
    if let Some(t) = sample.truth_for(schema.name()) {
        if t.schema().as_ref() == schema.as_ref() {
            return Ok(t.clone());
        }
    }
    if let Some(map) = map {
        if map.common_schema()? == **schema {
            let points = if let Some(src) = sample.truth_for(map.source().name()) {
                map.common_from_source(src)?
            } else if let Some(tgt) = sample.truth_for(map.target().name()) {
                map.common_from_target(tgt)?
            } else {
                return Err(Error::SchemaMismatch(format!(
                    "sample {} has no `{}` or `{}` annotation",
                    sample.id,
                    map.source().name(),
                    map.target().name()
                )));
            };
            return Shape::new(schema.clone(), points);
        }
    }
    Err(Error::SchemaMismatch(format!(
        "sample {} has no `{}` annotation",
        sample.id,
        schema.name()
    )))
}

/// Landmark indices of `schema` that count as common under `map`, or `None`
/// when every landmark does.
pub(crate) fn common_indices(schema: &AnnotationSchema, map: &CorrespondenceMap) -> Result<Option<Vec<usize>>> {
    if schema == map.source().as_ref() {
        Ok(Some(map.source_indices()))
    } else if schema == map.target().as_ref() {
        Ok(Some(map.target_indices()))
    } else if *schema == map.common_schema()? {
        Ok(None)
    } else {
        Err(Error::SchemaMismatch(format!(
            "`{}` is not part of correspondence {} -> {}",
            schema.name(),
            map.source().name(),
            map.target().name()
        )))
    }
}

/// Scores `predictions[i]` against the truth of `samples[i]`.
pub fn evaluate_predictions(
    predictions: &[Shape],
    samples: &[TrainingSample],
    subset: Subset,
    map: Option<&CorrespondenceMap>,
    threshold: f64,
) -> Result<EvalReport> {
    if predictions.len() != samples.len() {
        return Err(Error::DimensionMismatch {
            expected: samples.len(),
            got: predictions.len(),
        });
    }
    let Some(first) = predictions.first() else {
        return Err(Error::EmptyInput("evaluation samples"));
    };
    let schema = first.schema().clone();
    let indices = match subset {
        Subset::All => None,
        Subset::Common => {
            let map =
                map.ok_or_else(|| Error::InvalidArgument("common-landmark evaluation needs a correspondence".into()))?;
            common_indices(&schema, map)?
        }
    };
    let errors = predictions
        .iter()
        .zip(samples)
        .map(|(p, s)| {
            let truth = lookup_truth(s, &schema, map)?;
            rmse_percent(p, &truth, indices.as_deref())
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_errors(subset, errors, threshold)
}

pub fn predict_all(model: &CascadeModel, samples: &[TrainingSample]) -> Result<Vec<Shape>> {
    samples.iter().map(|s| model.infer(&s.image, &s.bbox)).collect()
}

/// Runs the model on every sample and scores it.
pub fn evaluate(
    model: &CascadeModel,
    samples: &[TrainingSample],
    subset: Subset,
    map: Option<&CorrespondenceMap>,
) -> Result<EvalReport> {
    evaluate_with_threshold(model, samples, subset, map, FAILURE_THRESHOLD)
}

pub fn evaluate_with_threshold(
    model: &CascadeModel,
    samples: &[TrainingSample],
    subset: Subset,
    map: Option<&CorrespondenceMap>,
    threshold: f64,
) -> Result<EvalReport> {
    evaluate_predictions(&predict_all(model, samples)?, samples, subset, map, threshold)
}
