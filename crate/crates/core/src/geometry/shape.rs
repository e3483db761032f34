use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{AnnotationSchema, Point, SimilarityTransform};

/// Landmark coordinates of one face under one protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    points: Vec<Point>,
    schema: Arc<AnnotationSchema>,
}

impl Shape {
    pub fn new(schema: Arc<AnnotationSchema>, points: Vec<Point>) -> Result<Self> {
        if points.len() != schema.len() {
            return Err(Error::SchemaMismatch(format!(
                "`{}` expects {} landmarks, got {}",
                schema.name(),
                schema.len(),
                points.len()
            )));
        }
        if !points.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite landmark coordinate".into()));
        }
        Ok(Self { points, schema })
    }

    /// Builds a shape from the interleaved `[x0, y0, x1, y1, ...]` layout.
    pub fn from_flat(schema: Arc<AnnotationSchema>, flat: &[f64]) -> Result<Self> {
        if flat.len() != 2 * schema.len() {
            return Err(Error::DimensionMismatch {
                expected: 2 * schema.len(),
                got: flat.len(),
            });
        }
        Self::new(schema, flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.points.iter().flatten().copied().collect()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn schema(&self) -> &Arc<AnnotationSchema> {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Vec<Point> {
        indices.iter().map(|&i| self.points[i]).collect()
    }

    pub fn transformed(&self, t: &SimilarityTransform) -> Shape {
        Shape {
            points: t.apply_all(&self.points),
            schema: self.schema.clone(),
        }
    }

    /// Re-labels the same coordinates under an equal-length protocol.
    pub fn with_schema(&self, schema: Arc<AnnotationSchema>) -> Result<Shape> {
        Shape::new(schema, self.points.clone())
    }

    pub fn centroid(&self) -> Point {
        let n = self.points.len() as f64;
        let (x, y) = self.points.iter().fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
        [x / n, y / n]
    }

    pub(crate) fn expect_schema(&self, schema: &AnnotationSchema) -> Result<()> {
        if self.schema.as_ref() != schema {
            return Err(Error::SchemaMismatch(format!(
                "expected `{}`, got `{}`",
                schema.name(),
                self.schema.name()
            )));
        }
        Ok(())
    }

    pub fn interocular_distance(&self) -> Result<f64> {
        let (a, b) = self.schema.interocular_pair();
        crate::geometry::checked_distance(self.points[a], self.points[b])
    }
}
