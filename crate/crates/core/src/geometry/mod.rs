//! Shapes, annotation protocols, similarity transforms and the interocular
//! error metric.

mod schema;
mod shape;
mod transform;

pub use schema::{AnnotationSchema, CorrespondenceMap};
pub use shape::Shape;
pub use transform::{fit_similarity, BBox, SimilarityTransform};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

const MIN_INTEROCULAR_PX: f64 = 1e-6;

#[inline]
pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub(crate) fn checked_distance(a: Point, b: Point) -> Result<f64> {
    let d = distance(a, b);
    if !(d >= MIN_INTEROCULAR_PX) {
        return Err(Error::DegenerateFace { distance: d });
    }
    Ok(d)
}

pub fn interocular_distance(shape: &Shape) -> Result<f64> {
    shape.interocular_distance()
}

/// RMS point error over the selected landmarks (all when `indices` is
/// `None`), as a percentage of the truth's interocular distance.
pub fn rmse_percent(estimate: &Shape, truth: &Shape, indices: Option<&[usize]>) -> Result<f64> {
    if estimate.schema() != truth.schema() {
        return Err(Error::SchemaMismatch(format!(
            "estimate `{}` vs truth `{}`",
            estimate.schema().name(),
            truth.schema().name()
        )));
    }
    let iod = truth.interocular_distance()?;
    match indices {
        None => rmse_percent_points(estimate.points(), truth.points(), iod),
        Some(idx) => {
            if let Some(&bad) = idx.iter().find(|&&i| i >= truth.len()) {
                return Err(Error::InvalidArgument(format!("landmark index {bad} out of range")));
            }
            rmse_percent_points(&estimate.select(idx), &truth.select(idx), iod)
        }
    }
}

/// Same metric on raw point lists with an explicit normalizer.
pub fn rmse_percent_points(estimate: &[Point], truth: &[Point], interocular: f64) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: estimate.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput("landmark subset"));
    }
    if !(interocular >= MIN_INTEROCULAR_PX) {
        return Err(Error::DegenerateFace { distance: interocular });
    }
    let sq: f64 = estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| (e[0] - t[0]).powi(2) + (e[1] - t[1]).powi(2))
        .sum();
    Ok(100.0 * (sq / truth.len() as f64).sqrt() / interocular)
}

/// Coordinate-wise mean of shapes that already live in the reference frame.
///
/// Accumulates offsets from the first shape so that identical inputs
/// reproduce it bit for bit.
pub fn mean_shape(shapes: &[Shape]) -> Result<Shape> {
    let first = shapes.first().ok_or(Error::EmptyInput("shapes for mean"))?;
    for s in &shapes[1..] {
        s.expect_schema(first.schema())?;
    }
    let n = shapes.len() as f64;
    let points = first
        .points()
        .iter()
        .enumerate()
        .map(|(i, &p0)| {
            let mut d = [0.0, 0.0];
            for s in shapes {
                let p = s.points()[i];
                d[0] += p[0] - p0[0];
                d[1] += p[1] - p0[1];
            }
            [p0[0] + d[0] / n, p0[1] + d[1] / n]
        })
        .collect();
    Shape::new(first.schema().clone(), points)
}

/// Maps each shape into the `frame_px` square through its face box and
/// averages there.
pub fn normalized_mean_shape(shapes: &[(&Shape, &BBox)], frame_px: usize) -> Result<Shape> {
    let normalized = shapes
        .iter()
        .map(|(s, b)| Ok(s.transformed(&b.to_frame(frame_px)?)))
        .collect::<Result<Vec<_>>>()?;
    mean_shape(&normalized)
}
