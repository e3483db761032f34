use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use log::info;
use serde::{Deserialize, Serialize};

use crate::cascade::{train_sdm, CascadeConfig, CascadeModel, TrainingLog, TrainingSample};
use crate::error::{Error, Result};
use crate::geometry::{rmse_percent, AnnotationSchema, CorrespondenceMap};
use crate::pipeline::eval::{evaluate_predictions, lookup_truth, predict_all};
use crate::pipeline::{naive_fusion_baseline, run_tcr_with_outcome, EvalReport, PipelineConfig, Subset, TcrLog};

/// One dataset with its fixed split.
#[derive(Debug, Clone)]
pub struct MatrixDataset {
    pub name: String,
    pub schema: Arc<AnnotationSchema>,
    pub train: Vec<TrainingSample>,
    pub test: Vec<TrainingSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedWorld,
    NaiveFusion,
    Tcr,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ClosedWorld => "closed_world",
            Method::NaiveFusion => "naive_fusion",
            Method::Tcr => "tcr",
        })
    }
}

/// Accuracy of the transferred private landmarks on the target training
/// set, available when those samples also carry source-protocol truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferAudit {
    /// Private-landmark RMSE% of the guided transfer, per target sample.
    pub transductive_private: Vec<f64>,
    /// Same samples labelled by the closed-world source model.
    pub naive_private: Vec<f64>,
    pub common_residuals: Vec<f64>,
    pub retained: Vec<bool>,
    pub epsilon: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

impl TransferAudit {
    pub fn transductive_mean(&self) -> f64 {
        mean(&self.transductive_private)
    }

    pub fn naive_mean(&self) -> f64 {
        mean(&self.naive_private)
    }

    /// Whether the retained flags agree exactly with the residual threshold.
    pub fn filter_is_sound(&self) -> bool {
        self.common_residuals
            .iter()
            .zip(&self.retained)
            .all(|(&r, &kept)| kept == (r <= self.epsilon))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub method: Method,
    pub subset: Subset,
    pub report: EvalReport,
}

/// Results for one (source, target) pair. Diagonal cells only hold the
/// closed-world self-evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cell {
    pub source: String,
    pub target: String,
    pub reports: Vec<CellReport>,
    pub tcr_log: Option<TcrLog>,
    pub naive_fusion_log: Option<TrainingLog>,
    pub audit: Option<TransferAudit>,
}

impl Cell {
    pub fn is_diagonal(&self) -> bool {
        self.source == self.target
    }

    pub fn report(&self, method: Method, subset: Subset) -> Option<&EvalReport> {
        self.reports
            .iter()
            .find(|r| r.method == method && r.subset == subset)
            .map(|r| &r.report)
    }
}

/// One line of the tabular report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub source: String,
    pub target: String,
    pub method: Method,
    pub subset: Subset,
    pub mean_error: f64,
    pub failure_rate: f64,
    pub sample_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentMatrix {
    pub datasets: Vec<String>,
    pub cells: Vec<Cell>,
    /// Closed-world training log per dataset.
    pub closed_world_logs: BTreeMap<String, TrainingLog>,
}

impl ExperimentMatrix {
    pub fn cell(&self, source: &str, target: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.source == source && c.target == target)
    }

    pub fn off_diagonal(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(|c| !c.is_diagonal())
    }

    pub fn rows(&self) -> Vec<MatrixRow> {
        let mut rows = Vec::new();
        for c in &self.cells {
            for r in &c.reports {
                rows.push(MatrixRow {
                    source: c.source.clone(),
                    target: c.target.clone(),
                    method: r.method,
                    subset: r.subset,
                    mean_error: r.report.mean_error,
                    failure_rate: r.report.failure_rate,
                    sample_count: r.report.sample_count(),
                });
            }
        }
        rows
    }

    /// Every plain-cascade training log produced by the run, labelled.
    pub fn training_logs(&self) -> Vec<(String, &TrainingLog)> {
        let mut out: Vec<(String, &TrainingLog)> = self
            .closed_world_logs
            .iter()
            .map(|(k, v)| (format!("closed_world {k}"), v))
            .collect();
        for c in self.off_diagonal() {
            if let Some(l) = &c.tcr_log {
                out.push((format!("tcr {} -> {}", c.source, c.target), &l.final_training));
            }
            if let Some(l) = &c.naive_fusion_log {
                out.push((format!("naive_fusion {} -> {}", c.source, c.target), l));
            }
        }
        out
    }
}

/// Correspondence from schema `source` to schema `target`, taken as given
/// or reversed.
pub fn find_map(maps: &[CorrespondenceMap], source: &str, target: &str) -> Result<CorrespondenceMap> {
    for m in maps {
        if m.source().name() == source && m.target().name() == target {
            return Ok(m.clone());
        }
    }
    for m in maps {
        if m.source().name() == target && m.target().name() == source {
            return m.reversed();
        }
    }
    Err(Error::ConfigInvalid(format!(
        "no correspondence between `{source}` and `{target}`"
    )))
}

/// Scores that need annotations the test set may not carry are left out.
fn optional(r: Result<EvalReport>) -> Result<Option<EvalReport>> {
    match r {
        Ok(r) => Ok(Some(r)),
        Err(Error::SchemaMismatch(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Scores the guided transfer and the closed-world source model on the
/// private landmarks of the target training set. `None` when the targets
/// carry no source-protocol truth or the protocols share every landmark.
pub fn transfer_audit(
    closed: &CascadeModel,
    outcome: &crate::pipeline::TransferOutcome,
    target_train: &[TrainingSample],
    map: &CorrespondenceMap,
    epsilon: f64,
) -> Result<Option<TransferAudit>> {
    let schema = map.source();
    let private = map.source_private_indices();
    if private.is_empty() || outcome.pseudo.len() != target_train.len() {
        return Ok(None);
    }
    let mut transductive_private = Vec::with_capacity(target_train.len());
    let mut naive_private = Vec::with_capacity(target_train.len());
    for (p, s) in outcome.pseudo.iter().zip(target_train) {
        let truth = match lookup_truth(s, schema, None) {
            Ok(t) => t,
            Err(Error::SchemaMismatch(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        transductive_private.push(rmse_percent(p.transferred(), &truth, Some(&private))?);
        let naive = closed.infer(&s.image, &s.bbox)?;
        naive_private.push(rmse_percent(&naive, &truth, Some(&private))?);
    }
    Ok(Some(TransferAudit {
        transductive_private,
        naive_private,
        common_residuals: outcome.pseudo.iter().map(|p| p.common_residual).collect(),
        retained: outcome.retained.clone(),
        epsilon,
    }))
}

/// Runs every (source, target) pair. Off-diagonal cells train the
/// closed-world, naive-fusion and fused models and score them on the
/// target test split; diagonal cells score the closed-world model on its
/// own test split.
pub fn cross_matrix(
    datasets: &[MatrixDataset],
    maps: &[CorrespondenceMap],
    cascade: &CascadeConfig,
    config: &PipelineConfig,
) -> Result<ExperimentMatrix> {
    if datasets.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 datasets, got {}",
            datasets.len()
        )));
    }
    config.validate()?;
    let thr = config.failure_threshold;
    let mut closed = Vec::with_capacity(datasets.len());
    let mut closed_world_logs = BTreeMap::new();
    for d in datasets {
        info!("closed-world training on {}", d.name);
        let (m, log) = train_sdm(&d.train, &d.schema, cascade)?;
        closed_world_logs.insert(d.name.clone(), log);
        closed.push(m);
    }

    let mut cells = Vec::new();
    for (i, src) in datasets.iter().enumerate() {
        for (j, tgt) in datasets.iter().enumerate() {
            let mut reports = Vec::new();
            if i == j {
                let preds = predict_all(&closed[i], &tgt.test)?;
                let r = evaluate_predictions(&preds, &tgt.test, Subset::All, None, thr)?;
                reports.push(CellReport {
                    method: Method::ClosedWorld,
                    subset: Subset::All,
                    report: r,
                });
                cells.push(Cell {
                    source: src.name.clone(),
                    target: tgt.name.clone(),
                    reports,
                    tcr_log: None,
                    naive_fusion_log: None,
                    audit: None,
                });
                continue;
            }
            info!("cell {} -> {}", src.name, tgt.name);
            let map = find_map(maps, src.schema.name(), tgt.schema.name())?;

            let preds = predict_all(&closed[i], &tgt.test)?;
            for subset in [Subset::Common, Subset::All] {
                if let Some(r) = optional(evaluate_predictions(&preds, &tgt.test, subset, Some(&map), thr))? {
                    reports.push(CellReport {
                        method: Method::ClosedWorld,
                        subset,
                        report: r,
                    });
                }
            }

            let (naive, naive_log) = naive_fusion_baseline(&src.train, &tgt.train, &map, cascade)?;
            let preds = predict_all(&naive, &tgt.test)?;
            let r = evaluate_predictions(&preds, &tgt.test, Subset::Common, Some(&map), thr)?;
            reports.push(CellReport {
                method: Method::NaiveFusion,
                subset: Subset::Common,
                report: r,
            });

            let (tcr, tcr_log, outcome) = run_tcr_with_outcome(&src.train, &tgt.train, &map, cascade, config)?;
            let preds = predict_all(&tcr, &tgt.test)?;
            for subset in [Subset::Common, Subset::All] {
                if let Some(r) = optional(evaluate_predictions(&preds, &tgt.test, subset, Some(&map), thr))? {
                    reports.push(CellReport {
                        method: Method::Tcr,
                        subset,
                        report: r,
                    });
                }
            }
            let audit = match &outcome {
                Some(o) => transfer_audit(&closed[i], o, &tgt.train, &map, config.epsilon)?,
                None => None,
            };
            cells.push(Cell {
                source: src.name.clone(),
                target: tgt.name.clone(),
                reports,
                tcr_log: Some(tcr_log),
                naive_fusion_log: Some(naive_log),
                audit,
            });
        }
    }
    Ok(ExperimentMatrix {
        datasets: datasets.iter().map(|d| d.name.clone()).collect(),
        cells,
        closed_world_logs,
    })
}
