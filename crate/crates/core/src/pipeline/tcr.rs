use std::sync::Arc;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::cascade::{train_sdm, CascadeConfig, CascadeModel, TrainingLog, TrainingSample};
use crate::error::{Error, Result};
use crate::geometry::{CorrespondenceMap, Shape};
use crate::pipeline::FAILURE_THRESHOLD;
use crate::transductive::{
    filter_pseudo, train_transductive, transfer_annotations_lenient, Guidance, PseudoLabeledSample, TransductiveModel,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Pseudo-labels with a larger common residual (RMSE%) are dropped.
    pub epsilon: f64,
    pub failure_threshold: f64,
    /// Fail instead of falling back to the source-only model when every
    /// pseudo-label is filtered out.
    pub strict_fusion: bool,
    pub guidance: Guidance,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            epsilon: 7.5,
            failure_threshold: FAILURE_THRESHOLD,
            strict_fusion: false,
            guidance: Guidance::GroundTruth,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(Error::ConfigInvalid(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        if !(self.failure_threshold.is_finite() && self.failure_threshold > 0.0) {
            return Err(Error::ConfigInvalid("failure_threshold must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of transferring and filtering.
#[derive(Debug, Clone)]
pub struct TransferOutcome {
    pub model: TransductiveModel,
    pub training: TrainingLog,
    /// Every transferred target sample, in input order.
    pub pseudo: Vec<PseudoLabeledSample>,
    /// Aligned with `pseudo`.
    pub retained: Vec<bool>,
    pub rejected: usize,
    /// Targets that could not be transferred.
    pub skipped: usize,
}

impl TransferOutcome {
    pub fn retained_samples(&self) -> impl Iterator<Item = &PseudoLabeledSample> {
        self.pseudo.iter().zip(&self.retained).filter(|p| *p.1).map(|p| p.0)
    }

    pub fn retained_count(&self) -> usize {
        self.retained.iter().filter(|&&r| r).count()
    }
}

/// Counts recorded at every step of a fusion run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcrLog {
    pub source_samples: usize,
    pub target_samples: usize,
    pub transferred: usize,
    pub transfer_skipped: usize,
    pub retained: usize,
    pub rejected: usize,
    pub union_samples: usize,
    /// Set when no pseudo-label survived and the source-only model was used.
    pub fell_back: bool,
    pub transductive: Option<TrainingLog>,
    pub final_training: TrainingLog,
}

/// Trains the guided model on the source set, labels the target set with it
/// and applies the ε-filter.
pub fn transfer_step(
    source_train: &[TrainingSample],
    target_train: &[TrainingSample],
    map: &CorrespondenceMap,
    cascade: &CascadeConfig,
    config: &PipelineConfig,
) -> Result<TransferOutcome> {
    config.validate()?;
    let (model, training) = train_transductive(source_train, map, cascade, config.guidance)?;
    let (pseudo, skipped) = transfer_annotations_lenient(&model, target_train);
    let rejected = filter_pseudo(&pseudo, config.epsilon)?.rejected;
    let retained = pseudo.iter().map(|p| p.common_residual <= config.epsilon).collect();
    Ok(TransferOutcome {
        model,
        training,
        pseudo,
        retained,
        rejected,
        skipped,
    })
}

/// Full fusion: transfer, filter, merge the retained pseudo-labels with the
/// source set and retrain a plain cascade on the union.
pub fn run_tcr(
    source_train: &[TrainingSample],
    target_train: &[TrainingSample],
    map: &CorrespondenceMap,
    cascade: &CascadeConfig,
    config: &PipelineConfig,
) -> Result<(CascadeModel, TcrLog)> {
    run_tcr_with_outcome(source_train, target_train, map, cascade, config).map(|(m, l, _)| (m, l))
}

/// [`run_tcr`] that also hands back the transfer step's outcome.
pub fn run_tcr_with_outcome(
    source_train: &[TrainingSample],
    target_train: &[TrainingSample],
    map: &CorrespondenceMap,
    cascade: &CascadeConfig,
    config: &PipelineConfig,
) -> Result<(CascadeModel, TcrLog, Option<TransferOutcome>)> {
    config.validate()?;
    let outcome = if target_train.is_empty() {
        None
    } else {
        Some(transfer_step(source_train, target_train, map, cascade, config)?)
    };
    let (model, log) = fuse(source_train, target_train.len(), outcome.as_ref(), map, cascade, config)?;
    Ok((model, log, outcome))
}

/// Steps 3 and 4 on an existing transfer outcome: merges the retained
/// pseudo-labels with the source set and trains a plain cascade on the union.
/// `None` stands for an empty target set.
pub fn fuse(
    source_train: &[TrainingSample],
    target_samples: usize,
    outcome: Option<&TransferOutcome>,
    map: &CorrespondenceMap,
    cascade: &CascadeConfig,
    config: &PipelineConfig,
) -> Result<(CascadeModel, TcrLog)> {
    let schema = map.source();
    let retained = outcome.map_or(0, TransferOutcome::retained_count);
    let transferred = outcome.map_or(0, |o| o.pseudo.len());
    if outcome.is_some() && retained == 0 {
        if config.strict_fusion {
            return Err(Error::EmptyAfterFilter);
        }
        warn!(
            "no pseudo-label within epsilon = {}, training on `{}` alone",
            config.epsilon,
            schema.name()
        );
    }
    let mut union: Vec<TrainingSample> = source_train.to_vec();
    if let Some(o) = outcome {
        union.extend(o.retained_samples().map(|p| p.sample.clone()));
    }
    info!(
        "fusion {} -> {}: {} source + {retained} retained of {transferred}",
        schema.name(),
        map.target().name(),
        source_train.len()
    );
    let (model, final_training) = train_sdm(&union, schema, cascade)?;
    let log = TcrLog {
        source_samples: source_train.len(),
        target_samples,
        transferred,
        transfer_skipped: outcome.map_or(0, |o| o.skipped),
        retained,
        rejected: outcome.map_or(0, |o| o.rejected),
        union_samples: union.len(),
        fell_back: outcome.is_some() && retained == 0,
        transductive: outcome.map(|o| o.training.clone()),
        final_training,
    };
    Ok((model, log))
}

/// Relabels both sets with their common landmarks only and trains one plain
/// cascade on the concatenation.
pub fn naive_fusion_baseline(
    source_train: &[TrainingSample],
    target_train: &[TrainingSample],
    map: &CorrespondenceMap,
    cascade: &CascadeConfig,
) -> Result<(CascadeModel, TrainingLog)> {
    let common = Arc::new(map.common_schema()?);
    let mut merged = Vec::with_capacity(source_train.len() + target_train.len());
    for s in source_train {
        let pts = map.common_from_source(&s.truth)?;
        merged.push(s.relabelled(Shape::new(common.clone(), pts)?));
    }
    for s in target_train {
        let pts = map.common_from_target(&s.truth)?;
        merged.push(s.relabelled(Shape::new(common.clone(), pts)?));
    }
    train_sdm(&merged, &common, cascade)
}
