//! `TCR1` binary model container and its JSON mirror.
//!
//! All integers are little-endian `u32` unless noted, all reals little-endian
//! IEEE-754 `f64`, strings are a `u32` byte length followed by UTF-8.
//!
//! ```text
//! magic            4 bytes  "TCR1"
//! version          u32      1
//! config           u32 num_stages, u32 perturbations_per_sample,
//!                  f64 pca_energy, f64 ridge_lambda, u32 patch_px, u32 frame_px,
//!                  f64 translation_px, f64 scale_min, f64 scale_max,
//!                  f64 rotation_rad, u64 rng_seed
//! schema           str name, u32 n, n × str landmark, u32 eye_a, u32 eye_b
//! mean shape       n × (f64 x, f64 y)
//! stage count      u32
//! per stage        u32 dim, u32 k, f64 retained_energy, dim × f64 mean,
//!                  k × f64 variance, k·dim × f64 components (row-major),
//!                  u32 out, u32 in, out·in × f64 matrix (row-major), out × f64 bias
//! ```

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeConfig, CascadeModel, PerturbationRanges, Stage};
use crate::error::{Error, Result};
use crate::geometry::{AnnotationSchema, Point, Shape};
use crate::regression::{LinearMap, PcaBasis};

pub const MAGIC: &[u8; 4] = b"TCR1";
pub const VERSION: u32 = 1;

struct Writer<W: Write> {
    inner: W,
}

impl<W: Write> Writer<W> {
    fn bytes(&mut self, b: &[u8]) -> std::io::Result<()> {
        self.inner.write_all(b)
    }
    fn u32(&mut self, v: usize) -> std::io::Result<()> {
        let v = u32::try_from(v).map_err(|_| std::io::Error::other("value exceeds u32"))?;
        self.bytes(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> std::io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> std::io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn f64s(&mut self, vs: &[f64]) -> std::io::Result<()> {
        vs.iter().try_for_each(|&v| self.f64(v))
    }
    fn str(&mut self, s: &str) -> std::io::Result<()> {
        self.u32(s.len())?;
        self.bytes(s.as_bytes())
    }
}

struct Reader<R: Read> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| Error::ModelFormat(format!("truncated file: {e}")))?;
        Ok(buf)
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.array()?) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()?;
        let mut buf = vec![0u8; n];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| Error::ModelFormat(format!("truncated string: {e}")))?;
        String::from_utf8(buf).map_err(|e| Error::ModelFormat(format!("invalid UTF-8: {e}")))
    }
}

impl CascadeModel {
    pub fn write_binary(&self, out: impl Write) -> std::io::Result<()> {
        let mut w = Writer { inner: out };
        w.bytes(MAGIC)?;
        w.u32(VERSION as usize)?;
        let c = &self.config;
        w.u32(c.num_stages)?;
        w.u32(c.perturbations_per_sample)?;
        w.f64(c.pca_energy)?;
        w.f64(c.ridge_lambda)?;
        w.u32(c.patch_px)?;
        w.u32(c.frame_px)?;
        w.f64(c.perturbation.translation_px)?;
        w.f64(c.perturbation.scale_min)?;
        w.f64(c.perturbation.scale_max)?;
        w.f64(c.perturbation.rotation_rad)?;
        w.u64(c.rng_seed)?;

        w.str(self.schema.name())?;
        w.u32(self.schema.len())?;
        for n in self.schema.landmark_names() {
            w.str(n)?;
        }
        let (a, b) = self.schema.interocular_pair();
        w.u32(a)?;
        w.u32(b)?;
        w.f64s(&self.mean_shape.to_flat())?;

        w.u32(self.stages.len())?;
        for s in &self.stages {
            w.u32(s.pca.input_dim())?;
            w.u32(s.pca.k())?;
            w.f64(s.pca.retained_energy())?;
            w.f64s(s.pca.mean())?;
            w.f64s(s.pca.variances())?;
            w.f64s(s.pca.components())?;
            w.u32(s.map.out_dim())?;
            w.u32(s.map.in_dim())?;
            w.f64s(s.map.matrix())?;
            w.f64s(s.map.bias())?;
        }
        w.inner.flush()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_binary(&mut buf).expect("writing to memory cannot fail");
        buf
    }

    pub fn read_binary(input: impl Read) -> Result<Self> {
        let mut r = Reader { inner: input };
        if &r.array::<4>()? != MAGIC {
            return Err(Error::ModelFormat("bad magic, expected TCR1".into()));
        }
        let version = r.u32()?;
        if version != VERSION as usize {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let config = CascadeConfig {
            num_stages: r.u32()?,
            perturbations_per_sample: r.u32()?,
            pca_energy: r.f64()?,
            ridge_lambda: r.f64()?,
            patch_px: r.u32()?,
            frame_px: r.u32()?,
            perturbation: PerturbationRanges {
                translation_px: r.f64()?,
                scale_min: r.f64()?,
                scale_max: r.f64()?,
                rotation_rad: r.f64()?,
            },
            rng_seed: r.u64()?,
        };
        let name = r.str()?;
        let n = r.u32()?;
        let names = (0..n).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
        let pair = (r.u32()?, r.u32()?);
        let schema = Arc::new(AnnotationSchema::new(name, names, pair)?);
        let mean_shape = Shape::from_flat(schema.clone(), &r.f64s(2 * n)?)?;

        let count = r.u32()?;
        let mut stages = Vec::with_capacity(count);
        for _ in 0..count {
            let dim = r.u32()?;
            let k = r.u32()?;
            let energy = r.f64()?;
            let mean = r.f64s(dim)?;
            let variances = r.f64s(k)?;
            let components = r.f64s(k * dim)?;
            let pca = PcaBasis::from_parts(mean, components, variances, energy)?;
            let out = r.u32()?;
            let inp = r.u32()?;
            let matrix = r.f64s(out * inp)?;
            let bias = r.f64s(out)?;
            let map = LinearMap::new(out, inp, matrix, bias)?;
            stages.push(Stage { pca, map });
        }
        let mut trailing = [0u8; 1];
        if r.inner
            .read(&mut trailing)
            .map_err(|e| Error::ModelFormat(e.to_string()))?
            != 0
        {
            return Err(Error::ModelFormat("trailing bytes after last stage".into()));
        }
        let model = CascadeModel {
            schema,
            mean_shape,
            stages,
            config,
        };
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        self.config.validate()?;
        if self.stages.len() != self.config.num_stages {
            return Err(Error::ModelFormat(format!(
                "{} stages stored, config says {}",
                self.stages.len(),
                self.config.num_stages
            )));
        }
        for s in &self.stages {
            if s.map.out_dim() != self.output_dim() || s.map.in_dim() != s.pca.k() {
                return Err(Error::ModelFormat("stage dimensions are inconsistent".into()));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::read_binary(bytes.as_slice())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelRecord::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: ModelRecord = serde_json::from_str(text)?;
        rec.try_into()
    }
}

/// Inspection form of a model; round-trips losslessly through JSON.
#[derive(Debug, Serialize, Deserialize)]
struct ModelRecord {
    format: String,
    version: u32,
    config: CascadeConfig,
    schema: AnnotationSchema,
    mean_shape: Vec<Point>,
    stages: Vec<Stage>,
}

impl From<&CascadeModel> for ModelRecord {
    fn from(m: &CascadeModel) -> Self {
        Self {
            format: "TCR1".into(),
            version: VERSION,
            config: m.config.clone(),
            schema: m.schema.as_ref().clone(),
            mean_shape: m.mean_shape.points().to_vec(),
            stages: m.stages.clone(),
        }
    }
}

impl TryFrom<ModelRecord> for CascadeModel {
    type Error = Error;

    fn try_from(rec: ModelRecord) -> Result<Self> {
        if rec.format != "TCR1" || rec.version != VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported model {} v{}",
                rec.format, rec.version
            )));
        }
        let schema = Arc::new(rec.schema);
        let model = CascadeModel {
            mean_shape: Shape::new(schema.clone(), rec.mean_shape)?,
            schema,
            stages: rec.stages,
            config: rec.config,
        };
        model.check()?;
        Ok(model)
    }
}
