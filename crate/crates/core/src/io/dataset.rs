use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::cascade::TrainingSample;
use crate::error::{Error, Result};
use crate::features::GrayImage;
use crate::geometry::{AnnotationSchema, BBox, Shape};
use crate::io::config::{load_schema, read_toml, write_schema, write_toml};
use crate::io::pts::{load_pts, write_pts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Defaults to the image file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub image: PathBuf,
    pub annotation: PathBuf,
    /// x, y, w, h in image pixels.
    pub bbox: [f64; 4],
    /// Annotations of the same face under other protocols, by schema name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, PathBuf>,
}

/// One split of one dataset. Relative paths are resolved against the
/// manifest's directory.
///
/// ```toml
/// name = "lfpw"
/// schema = "schemas/lfpw.toml"
/// split = "train"
///
/// [extra_schemas]
/// helen = "schemas/helen.toml"
///
/// [[entries]]
/// image = "images/0001.png"
/// annotation = "annotations/0001.pts"
/// bbox = [12.0, 30.5, 140.0, 150.0]
/// extra = { helen = "annotations/0001.helen.pts" }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    pub schema: PathBuf,
    pub split: Split,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra_schemas: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        read_toml(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_toml(path, self)
    }
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub name: String,
    pub split: Split,
    pub schema: Arc<AnnotationSchema>,
    pub samples: Vec<TrainingSample>,
    /// Resolved image path of each sample.
    pub image_paths: Vec<PathBuf>,
    /// Entries dropped because an annotation did not fit its schema.
    pub skipped: usize,
}

pub(crate) fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn load_shape(path: &Path, schema: &Arc<AnnotationSchema>) -> Result<Shape> {
    Shape::new(schema.clone(), load_pts(path)?).map_err(|e| match e {
        Error::SchemaMismatch(m) => Error::SchemaMismatch(format!("{}: {m}", path.display())),
        e => e,
    })
}

fn load_entry(
    entry: &ManifestEntry,
    dir: &Path,
    schema: &Arc<AnnotationSchema>,
    extra_schemas: &BTreeMap<String, Arc<AnnotationSchema>>,
    images: &mut HashMap<PathBuf, Arc<GrayImage>>,
) -> Result<(TrainingSample, PathBuf)> {
    let image_path = dir.join(&entry.image);
    let truth = load_shape(&dir.join(&entry.annotation), schema)?;
    let mut extra = BTreeMap::new();
    for (name, rel) in &entry.extra {
        let s = extra_schemas
            .get(name)
            .ok_or_else(|| Error::ConfigInvalid(format!("entry annotation refers to undeclared schema `{name}`")))?;
        extra.insert(name.clone(), load_shape(&dir.join(rel), s)?);
    }
    let [x, y, w, h] = entry.bbox;
    let bbox = BBox::new(x, y, w, h)?;
    let image = match images.get(&image_path) {
        Some(i) => i.clone(),
        None => {
            let i = Arc::new(GrayImage::load(&image_path)?);
            images.insert(image_path.clone(), i.clone());
            i
        }
    };
    let id = match &entry.id {
        Some(id) => id.clone(),
        None => entry
            .image
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let mut sample = TrainingSample::new(id, image, truth, bbox)?;
    sample.extra = extra;
    Ok((sample, image_path))
}

/// Loads every entry of a manifest with its image decoded. Entries whose
/// annotations do not match their schema are skipped with a warning; any
/// other problem fails the whole load.
pub fn load_dataset(manifest_path: &Path) -> Result<LoadedDataset> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let dir = base_dir(manifest_path);
    let schema = Arc::new(load_schema(&dir.join(&manifest.schema))?);
    let mut extra_schemas = BTreeMap::new();
    for (name, rel) in &manifest.extra_schemas {
        let s = load_schema(&dir.join(rel))?;
        if s.name() != name {
            return Err(Error::ConfigInvalid(format!(
                "extra schema key `{name}` names a schema called `{}`",
                s.name()
            )));
        }
        extra_schemas.insert(name.clone(), Arc::new(s));
    }

    let mut images = HashMap::new();
    let mut samples = Vec::with_capacity(manifest.entries.len());
    let mut image_paths = Vec::with_capacity(manifest.entries.len());
    let mut skipped = 0;
    for (i, entry) in manifest.entries.iter().enumerate() {
        match load_entry(entry, &dir, &schema, &extra_schemas, &mut images) {
            Ok((s, p)) => {
                samples.push(s);
                image_paths.push(p);
            }
            Err(Error::SchemaMismatch(m)) => {
                warn!("{}: skipping entry {i}: {m}", manifest_path.display());
                skipped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if skipped > 0 {
        warn!(
            "{}: skipped {skipped} of {} entries",
            manifest_path.display(),
            manifest.entries.len()
        );
    }
    Ok(LoadedDataset {
        name: manifest.name,
        split: manifest.split,
        schema,
        samples,
        image_paths,
        skipped,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn relative(path: &Path) -> PathBuf {
    PathBuf::from(path.to_string_lossy().replace('\\', "/"))
}

/// Writes `samples` as PNG images, pts annotations and a manifest at
/// `dir/<split>.toml`. Schema paths are recorded as given, relative to `dir`.
pub fn write_dataset(
    dir: &Path,
    name: &str,
    split: Split,
    schema_path: &Path,
    extra_schema_paths: &BTreeMap<String, PathBuf>,
    samples: &[TrainingSample],
) -> Result<PathBuf> {
    create_dir(&dir.join("images"))?;
    create_dir(&dir.join("annotations"))?;
    let mut entries = Vec::with_capacity(samples.len());
    for s in samples {
        let image = PathBuf::from(format!("images/{}.png", s.id));
        s.image.save_png(&dir.join(&image))?;
        let annotation = PathBuf::from(format!("annotations/{}.pts", s.id));
        write_pts(&dir.join(&annotation), s.truth.points())?;
        let mut extra = BTreeMap::new();
        for (schema, shape) in &s.extra {
            if !extra_schema_paths.contains_key(schema) {
                continue;
            }
            let p = PathBuf::from(format!("annotations/{}.{schema}.pts", s.id));
            write_pts(&dir.join(&p), shape.points())?;
            extra.insert(schema.clone(), p);
        }
        entries.push(ManifestEntry {
            id: Some(s.id.clone()),
            image,
            annotation,
            bbox: [s.bbox.x, s.bbox.y, s.bbox.w, s.bbox.h],
            extra,
        });
    }
    let manifest = DatasetManifest {
        name: name.to_string(),
        schema: relative(schema_path),
        split,
        extra_schemas: extra_schema_paths
            .iter()
            .map(|(k, v)| (k.clone(), relative(v)))
            .collect(),
        entries,
    };
    let path = dir.join(format!("{}.toml", split.as_str()));
    manifest.save(&path)?;
    Ok(path)
}

/// Writes a schema file under `dir/schemas/` and returns its path relative
/// to `dir`.
pub(crate) fn write_schema_file(dir: &Path, schema: &AnnotationSchema) -> Result<PathBuf> {
    create_dir(&dir.join("schemas"))?;
    let rel = PathBuf::from(format!("schemas/{}.toml", schema.name()));
    write_schema(&dir.join(&rel), schema)?;
    Ok(rel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    fn write_fixture(dir: &Path, n: usize, bad: &[usize]) -> PathBuf {
        let schema = AnnotationSchema::new("s", names(3), (0, 1)).unwrap();
        write_schema(&dir.join("s.toml"), &schema).unwrap();
        let img = GrayImage::from_fn(40, 30, |x, y| ((x + 2 * y) % 7) as f64 / 7.0).unwrap();
        img.save_png(&dir.join("face.png")).unwrap();
        let mut entries = Vec::new();
        for i in 0..n {
            let count = if bad.contains(&i) { 2 } else { 3 };
            let pts: Vec<_> = (0..count).map(|k| [10.0 + k as f64 * 5.0, 12.0 + i as f64]).collect();
            let ann = PathBuf::from(format!("{i}.pts"));
            write_pts(&dir.join(&ann), &pts).unwrap();
            entries.push(ManifestEntry {
                id: None,
                image: "face.png".into(),
                annotation: ann,
                bbox: [5.0, 5.0, 30.0, 20.0],
                extra: BTreeMap::new(),
            });
        }
        let m = DatasetManifest {
            name: "fixture".into(),
            schema: "s.toml".into(),
            split: Split::Train,
            extra_schemas: BTreeMap::new(),
            entries,
        };
        let path = dir.join("train.toml");
        m.save(&path).unwrap();
        path
    }

    #[test]
    fn ten_valid_entries() {
        let dir = tempfile::tempdir().unwrap();
        let d = load_dataset(&write_fixture(dir.path(), 10, &[])).unwrap();
        assert_eq!(d.samples.len(), 10);
        assert_eq!(d.skipped, 0);
        assert_eq!(d.samples[3].truth.points()[0], [10.0, 15.0]);
        assert_eq!(d.samples[0].id, "face");
        assert!(Arc::ptr_eq(&d.samples[0].image, &d.samples[9].image));
    }

    #[test]
    fn wrong_landmark_count_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let d = load_dataset(&write_fixture(dir.path(), 10, &[4])).unwrap();
        assert_eq!(d.samples.len(), 9);
        assert_eq!(d.skipped, 1);
    }

    #[test]
    fn missing_image_fails() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_fixture(dir.path(), 2, &[]);
        fs::remove_file(dir.path().join("face.png")).unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::Image { .. })));
    }

    #[test]
    fn degenerate_bbox_fails() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_fixture(dir.path(), 1, &[]);
        let mut m = DatasetManifest::load(&path).unwrap();
        m.entries[0].bbox[2] = 0.0;
        m.save(&path).unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::DegenerateBBox(_))));
    }

    #[test]
    fn nan_coordinates_fail() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_fixture(dir.path(), 1, &[]);
        fs::write(
            dir.path().join("0.pts"),
            "version: 1\nn_points: 3\n{\n1 2\nNaN 3\n4 5\n}\n",
        )
        .unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::Parse { line: 5, .. })));
    }
}
