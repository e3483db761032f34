use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AnnotationSchema, CorrespondenceMap};
use crate::io::config::{load_schema, read_toml, write_toml, CorrespondenceFile};
use crate::io::dataset::{base_dir, load_dataset, write_dataset, write_schema_file, Split};
use crate::pipeline::MatrixDataset;
use crate::synth::SynthCorpus;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusDatasetEntry {
    pub name: String,
    pub train: PathBuf,
    pub test: PathBuf,
}

/// Index of a multi-dataset corpus, paths relative to the file.
///
/// ```toml
/// schemas = ["schemas/synth_dense.toml"]
/// correspondences = ["correspondence.toml"]
///
/// [[datasets]]
/// name = "synth_a"
/// train = "synth_a/train.toml"
/// test = "synth_a/test.toml"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusFile {
    /// Schemas used only by extra annotations; dataset schemas come from
    /// the manifests.
    #[serde(default)]
    pub schemas: Vec<PathBuf>,
    pub correspondences: Vec<PathBuf>,
    pub datasets: Vec<CorpusDatasetEntry>,
}

#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub datasets: Vec<MatrixDataset>,
    pub maps: Vec<CorrespondenceMap>,
    pub skipped: usize,
}

/// Loads every split and resolves the correspondences against the dataset
/// schemas.
pub fn load_corpus(path: &Path) -> Result<LoadedCorpus> {
    let file: CorpusFile = read_toml(path)?;
    let dir = base_dir(path);
    let mut schemas: Vec<Arc<AnnotationSchema>> = Vec::new();
    for p in &file.schemas {
        schemas.push(Arc::new(load_schema(&dir.join(p))?));
    }
    let mut datasets = Vec::with_capacity(file.datasets.len());
    let mut skipped = 0;
    for d in &file.datasets {
        let train = load_dataset(&dir.join(&d.train))?;
        let test = load_dataset(&dir.join(&d.test))?;
        if train.schema != test.schema {
            return Err(Error::SchemaMismatch(format!(
                "dataset `{}` uses different schemas for train and test",
                d.name
            )));
        }
        skipped += train.skipped + test.skipped;
        if !schemas.iter().any(|s| s.name() == train.schema.name()) {
            schemas.push(train.schema.clone());
        }
        datasets.push(MatrixDataset {
            name: d.name.clone(),
            schema: train.schema,
            train: train.samples,
            test: test.samples,
        });
    }
    let maps = file
        .correspondences
        .iter()
        .map(|p| CorrespondenceFile::load(&dir.join(p))?.resolve(&schemas))
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedCorpus {
        datasets,
        maps,
        skipped,
    })
}

/// Writes a synthetic corpus as schema files, one manifest per split and a
/// `corpus.toml` index. Returns the index path.
pub fn write_corpus(corpus: &SynthCorpus, dir: &Path) -> Result<PathBuf> {
    let schema_a = write_schema_file(dir, &corpus.a.schema)?;
    let schema_b = write_schema_file(dir, &corpus.b.schema)?;
    let dense = write_schema_file(dir, &corpus.dense)?;
    let up = |p: &Path| Path::new("..").join(p);
    let mut datasets = Vec::new();
    let pairs = [
        (&corpus.a, &schema_a, &corpus.b.schema, &schema_b),
        (&corpus.b, &schema_b, &corpus.a.schema, &schema_a),
    ];
    for (d, own, other, other_path) in pairs {
        let extras = BTreeMap::from([
            (corpus.dense.name().to_string(), up(&dense)),
            (other.name().to_string(), up(other_path)),
        ]);
        let sub = dir.join(&d.name);
        let train = write_dataset(&sub, &d.name, Split::Train, &up(own), &extras, &d.train)?;
        let test = write_dataset(&sub, &d.name, Split::Test, &up(own), &extras, &d.test)?;
        let rel = |p: PathBuf| p.strip_prefix(dir).map(Path::to_path_buf).unwrap_or(p);
        datasets.push(CorpusDatasetEntry {
            name: d.name.clone(),
            train: rel(train),
            test: rel(test),
        });
    }
    CorrespondenceFile::from_map(&corpus.correspondence).save(&dir.join("correspondence.toml"))?;
    let index = CorpusFile {
        schemas: vec![dense],
        correspondences: vec!["correspondence.toml".into()],
        datasets,
    };
    let path = dir.join("corpus.toml");
    write_toml(&path, &index)?;
    Ok(path)
}
