use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cascade::CascadeConfig;
use crate::error::{Error, Result};
use crate::geometry::{AnnotationSchema, CorrespondenceMap};
use crate::pipeline::PipelineConfig;
use crate::synth::SynthConfig;

pub(crate) fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::ConfigInvalid(format!("{}: {}", path.display(), e.message())))
}

pub(crate) fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Everything that determines a run apart from the input files.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds corpus generation and replaces `cascade.rng_seed`.
    pub seed: u64,
    pub cascade: CascadeConfig,
    pub synth: SynthConfig,
    pub pipeline: PipelineConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let c: RunConfig = read_toml(path)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.cascade.validate()?;
        self.synth.validate()?;
        self.pipeline.validate()
    }

    /// Cascade settings with the run seed applied.
    pub fn seeded_cascade(&self) -> CascadeConfig {
        CascadeConfig {
            rng_seed: self.seed,
            ..self.cascade.clone()
        }
    }
}

/// ```toml
/// name = "lfpw"
/// landmark_names = ["eye_l", "eye_r", "nose"]
/// interocular_pair = [0, 1]
/// ```
pub fn load_schema(path: &Path) -> Result<AnnotationSchema> {
    read_toml(path)
}

pub fn write_schema(path: &Path, schema: &AnnotationSchema) -> Result<()> {
    write_toml(path, schema)
}

/// Correspondence between two schemas, named rather than embedded.
///
/// ```toml
/// source = "lfpw"
/// target = "helen"
/// pairs = [[0, 3], [1, 4]]
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrespondenceFile {
    pub source: String,
    pub target: String,
    pub pairs: Vec<(usize, usize)>,
}

impl CorrespondenceFile {
    pub fn load(path: &Path) -> Result<Self> {
        read_toml(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_toml(path, self)
    }

    pub fn from_map(map: &CorrespondenceMap) -> Self {
        Self {
            source: map.source().name().to_string(),
            target: map.target().name().to_string(),
            pairs: map.pairs().to_vec(),
        }
    }

    /// Resolves both schema names among `schemas`.
    pub fn resolve(&self, schemas: &[Arc<AnnotationSchema>]) -> Result<CorrespondenceMap> {
        let find = |name: &str| {
            schemas
                .iter()
                .find(|s| s.name() == name)
                .cloned()
                .ok_or_else(|| Error::SchemaMismatch(format!("correspondence refers to unknown schema `{name}`")))
        };
        CorrespondenceMap::new(find(&self.source)?, find(&self.target)?, self.pairs.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_run_config_is_default() {
        let c: RunConfig = toml::from_str("").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn run_config_round_trip() {
        let mut c = RunConfig::default();
        c.seed = 4;
        c.pipeline.epsilon = 5.0;
        c.cascade.num_stages = 3;
        c.synth.train_per_dataset = 7;
        let back: RunConfig = toml::from_str(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.seeded_cascade().rng_seed, 4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sed = 1").is_err());
        assert!(toml::from_str::<RunConfig>("[cascade]\nstages = 3").is_err());
    }

    #[test]
    fn schema_file() {
        let s: AnnotationSchema =
            toml::from_str("name = \"x\"\nlandmark_names = [\"a\", \"b\", \"c\"]\ninterocular_pair = [0, 2]").unwrap();
        assert_eq!(s.interocular_pair(), (0, 2));
        let bad =
            toml::from_str::<AnnotationSchema>("name = \"x\"\nlandmark_names = [\"a\"]\ninterocular_pair = [0, 1]");
        assert!(bad.is_err());
    }

    #[test]
    fn correspondence_resolution() {
        let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        let a = Arc::new(AnnotationSchema::new("a", names(&["l", "r", "n"]), (0, 1)).unwrap());
        let b = Arc::new(AnnotationSchema::new("b", names(&["n", "l", "r", "m"]), (1, 2)).unwrap());
        let f = CorrespondenceFile {
            source: "a".into(),
            target: "b".into(),
            pairs: vec![(0, 1), (1, 2), (2, 0)],
        };
        let m = f.resolve(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(m, CorrespondenceMap::by_names(a.clone(), b).unwrap());
        assert_eq!(CorrespondenceFile::from_map(&m), f);
        assert!(matches!(f.resolve(&[a]), Err(Error::SchemaMismatch(_))));
    }
}
