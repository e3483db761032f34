//! On-disk formats: pts landmark files, TOML schemas, correspondences,
//! manifests and run configuration.

mod config;
mod corpus;
mod dataset;
mod export;
pub mod pts;

pub use config::{load_schema, write_schema, CorrespondenceFile, RunConfig};
pub use corpus::{load_corpus, write_corpus, CorpusDatasetEntry, CorpusFile, LoadedCorpus};
pub use dataset::{load_dataset, write_dataset, DatasetManifest, LoadedDataset, ManifestEntry, Split};
pub use export::{export_pseudo_labels, PseudoLabelExport};
pub use pts::{load_pts, write_pts};
