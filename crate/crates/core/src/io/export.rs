use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::config::write_schema;
use crate::io::dataset::{DatasetManifest, ManifestEntry, Split};
use crate::io::pts::write_pts;
use crate::pipeline::TransferOutcome;

/// Files written by [`export_pseudo_labels`].
#[derive(Debug, Clone)]
pub struct PseudoLabelExport {
    pub csv: PathBuf,
    /// Training manifest of the retained samples.
    pub manifest: PathBuf,
}

/// Writes every transferred annotation as a pts file in the source schema,
/// a CSV of `id,image,annotation,common_residual,retained` and a training
/// manifest holding only the retained samples. `image_paths` maps target
/// sample ids to their image files.
pub fn export_pseudo_labels(
    dir: &Path,
    outcome: &TransferOutcome,
    image_paths: &HashMap<String, PathBuf>,
) -> Result<PseudoLabelExport> {
    let ann_dir = dir.join("annotations");
    fs::create_dir_all(&ann_dir).map_err(|e| Error::io(&ann_dir, e))?;
    let schema = outcome.model.schema();
    write_schema(&dir.join("schema.toml"), schema)?;

    let csv_path = dir.join("pseudo_labels.csv");
    let file = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let mut csv = csv::Writer::from_writer(file);
    csv.write_record(["id", "image", "annotation", "common_residual", "retained"])?;
    let mut entries = Vec::new();
    for (p, &kept) in outcome.pseudo.iter().zip(&outcome.retained) {
        let id = &p.sample.id;
        let image = image_paths
            .get(id)
            .ok_or_else(|| Error::InvalidArgument(format!("no image path for sample `{id}`")))?;
        let image = std::path::absolute(image).map_err(|e| Error::io(image, e))?;
        let annotation = PathBuf::from(format!("annotations/{id}.pts"));
        write_pts(&dir.join(&annotation), p.transferred().points())?;
        csv.write_record([
            id.clone(),
            image.display().to_string(),
            annotation.display().to_string(),
            p.common_residual.to_string(),
            kept.to_string(),
        ])?;
        if kept {
            let b = p.sample.bbox;
            entries.push(ManifestEntry {
                id: Some(id.clone()),
                image,
                annotation,
                bbox: [b.x, b.y, b.w, b.h],
                extra: BTreeMap::new(),
            });
        }
    }
    csv.flush().map_err(|e| Error::io(&csv_path, e))?;

    let manifest_path = dir.join("manifest.toml");
    DatasetManifest {
        name: format!("{}_pseudo", schema.name()),
        schema: "schema.toml".into(),
        split: Split::Train,
        extra_schemas: BTreeMap::new(),
        entries,
    }
    .save(&manifest_path)?;
    Ok(PseudoLabelExport {
        csv: csv_path,
        manifest: manifest_path,
    })
}
