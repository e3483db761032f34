//! Fusion pipeline, evaluation and the cross-dataset experiment matrix.

mod eval;
mod matrix;
pub mod report;
mod tcr;

pub use eval::{
    evaluate, evaluate_predictions, evaluate_with_threshold, lookup_truth, predict_all, EvalReport, Subset,
    FAILURE_THRESHOLD,
};
pub use matrix::{
    cross_matrix, find_map, transfer_audit, Cell, CellReport, ExperimentMatrix, MatrixDataset, MatrixRow, Method,
    TransferAudit,
};
pub use tcr::{
    fuse, naive_fusion_baseline, run_tcr, run_tcr_with_outcome, transfer_step, PipelineConfig, TcrLog, TransferOutcome,
};
