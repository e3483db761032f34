use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Shape};

/// Named, ordered landmark protocol of one dataset.
///
/// The interocular pair is part of the schema because protocols disagree on
/// which eye landmarks exist (pupils in one, eye corners in another).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema")]
pub struct AnnotationSchema {
    name: String,
    landmark_names: Vec<String>,
    interocular_pair: (usize, usize),
}

#[derive(Deserialize)]
struct RawSchema {
    name: String,
    landmark_names: Vec<String>,
    interocular_pair: (usize, usize),
}

impl TryFrom<RawSchema> for AnnotationSchema {
    type Error = Error;

    fn try_from(raw: RawSchema) -> Result<Self> {
        AnnotationSchema::new(raw.name, raw.landmark_names, raw.interocular_pair)
    }
}

impl AnnotationSchema {
    pub fn new(name: impl Into<String>, landmark_names: Vec<String>, interocular_pair: (usize, usize)) -> Result<Self> {
        let name = name.into();
        if landmark_names.is_empty() {
            return Err(Error::ConfigInvalid(format!("schema `{name}` has no landmarks")));
        }
        let mut seen = HashSet::new();
        for lm in &landmark_names {
            if !seen.insert(lm.as_str()) {
                return Err(Error::ConfigInvalid(format!("schema `{name}` repeats landmark `{lm}`")));
            }
        }
        let (a, b) = interocular_pair;
        let n = landmark_names.len();
        if a >= n || b >= n || a == b {
            return Err(Error::ConfigInvalid(format!(
                "schema `{name}` has invalid interocular pair ({a}, {b}) for {n} landmarks"
            )));
        }
        Ok(Self {
            name,
            landmark_names,
            interocular_pair,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn landmark_names(&self) -> &[String] {
        &self.landmark_names
    }

    /// Number of landmarks in the protocol.
    pub fn len(&self) -> usize {
        self.landmark_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmark_names.is_empty()
    }

    pub fn interocular_pair(&self) -> (usize, usize) {
        self.interocular_pair
    }

    pub fn index_of(&self, landmark: &str) -> Option<usize> {
        self.landmark_names.iter().position(|n| n == landmark)
    }

    /// Sub-protocol made of `indices` (in the given order). Both interocular
    /// landmarks must be kept.
    pub fn subset(&self, name: impl Into<String>, indices: &[usize]) -> Result<Self> {
        let (a, b) = self.interocular_pair;
        let pos = |i: usize| indices.iter().position(|&j| j == i);
        let (Some(pa), Some(pb)) = (pos(a), pos(b)) else {
            return Err(Error::ConfigInvalid(format!(
                "subset of `{}` drops an interocular landmark",
                self.name
            )));
        };
        let mut names = Vec::with_capacity(indices.len());
        for &i in indices {
            let lm = self
                .landmark_names
                .get(i)
                .ok_or_else(|| Error::ConfigInvalid(format!("index {i} out of range for `{}`", self.name)))?;
            names.push(lm.clone());
        }
        Self::new(name, names, (pa, pb))
    }
}

/// Pairing of landmarks that carry the same semantic definition in two
/// protocols.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceMap {
    source: Arc<AnnotationSchema>,
    target: Arc<AnnotationSchema>,
    pairs: Vec<(usize, usize)>,
}

impl CorrespondenceMap {
    pub fn new(
        source: Arc<AnnotationSchema>,
        target: Arc<AnnotationSchema>,
        pairs: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if pairs.len() < 2 {
            return Err(Error::ConfigInvalid(format!(
                "correspondence {} -> {} needs at least 2 pairs, got {}",
                source.name(),
                target.name(),
                pairs.len()
            )));
        }
        let mut seen_s = HashSet::new();
        let mut seen_t = HashSet::new();
        for &(s, t) in &pairs {
            if s >= source.len() || t >= target.len() {
                return Err(Error::ConfigInvalid(format!(
                    "correspondence pair ({s}, {t}) out of range"
                )));
            }
            if !seen_s.insert(s) || !seen_t.insert(t) {
                return Err(Error::ConfigInvalid(format!(
                    "correspondence repeats an index in pair ({s}, {t})"
                )));
            }
        }
        let (a, b) = source.interocular_pair();
        if !seen_s.contains(&a) || !seen_s.contains(&b) {
            return Err(Error::ConfigInvalid(format!(
                "interocular landmarks of `{}` must be common landmarks",
                source.name()
            )));
        }
        Ok(Self { source, target, pairs })
    }

    /// Pairs every landmark name that occurs in both protocols, in source
    /// order.
    pub fn by_names(source: Arc<AnnotationSchema>, target: Arc<AnnotationSchema>) -> Result<Self> {
        let pairs = source
            .landmark_names()
            .iter()
            .enumerate()
            .filter_map(|(i, n)| target.index_of(n).map(|j| (i, j)))
            .collect();
        Self::new(source, target, pairs)
    }

    pub fn source(&self) -> &Arc<AnnotationSchema> {
        &self.source
    }

    pub fn target(&self) -> &Arc<AnnotationSchema> {
        &self.target
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn source_indices(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    pub fn target_indices(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.1).collect()
    }

    /// Source landmarks with no counterpart in the target protocol.
    pub fn source_private_indices(&self) -> Vec<usize> {
        let common: HashSet<usize> = self.pairs.iter().map(|p| p.0).collect();
        (0..self.source.len()).filter(|i| !common.contains(i)).collect()
    }

    /// Same map seen from the other side. Fails if the target's interocular
    /// landmarks are not common.
    pub fn reversed(&self) -> Result<Self> {
        Self::new(
            self.target.clone(),
            self.source.clone(),
            self.pairs.iter().map(|&(s, t)| (t, s)).collect(),
        )
    }

    /// Source-schema sub-protocol holding only the common landmarks.
    pub fn common_schema(&self) -> Result<AnnotationSchema> {
        self.source.subset(
            format!("{}∩{}", self.source.name(), self.target.name()),
            &self.source_indices(),
        )
    }

    pub fn common_from_source(&self, shape: &Shape) -> Result<Vec<Point>> {
        shape.expect_schema(&self.source)?;
        Ok(self.pairs.iter().map(|&(s, _)| shape.points()[s]).collect())
    }

    pub fn common_from_target(&self, shape: &Shape) -> Result<Vec<Point>> {
        if shape.schema().as_ref() != self.target.as_ref() {
            return Err(Error::MissingCommonLandmark(format!(
                "expected `{}` annotation, got `{}`",
                self.target.name(),
                shape.schema().name()
            )));
        }
        Ok(self.pairs.iter().map(|&(_, t)| shape.points()[t]).collect())
    }

    /// Positions of the source interocular landmarks inside the common list.
    pub fn interocular_in_common(&self) -> (usize, usize) {
        let (a, b) = self.source.interocular_pair();
        let pos = |i| self.pairs.iter().position(|p| p.0 == i).expect("validated");
        (pos(a), pos(b))
    }

    /// Interocular distance of a target-schema shape, measured on the landmarks
    /// that correspond to the source's interocular pair.
    pub fn target_interocular(&self, target_shape: &Shape) -> Result<f64> {
        let common = self.common_from_target(target_shape)?;
        let (a, b) = self.interocular_in_common();
        crate::geometry::checked_distance(common[a], common[b])
    }
}
