use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::Result;
use crate::features::GrayImage;
use crate::geometry::{BBox, Shape, SimilarityTransform};

/// One annotated face: image, protocol-native ground truth and face box.
///
/// `extra` carries annotations of the same face under other protocols
/// (keyed by schema name); they are only used for scoring.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub id: String,
    pub image: Arc<GrayImage>,
    pub truth: Shape,
    pub bbox: BBox,
    pub extra: BTreeMap<String, Shape>,
}

impl TrainingSample {
    pub fn new(id: impl Into<String>, image: Arc<GrayImage>, truth: Shape, bbox: BBox) -> Result<Self> {
        bbox.validate()?;
        Ok(Self {
            id: id.into(),
            image,
            truth,
            bbox,
            extra: BTreeMap::new(),
        })
    }

    /// Ground truth under protocol `schema`, native or extra.
    pub fn truth_for(&self, schema: &str) -> Option<&Shape> {
        if self.truth.schema().name() == schema {
            Some(&self.truth)
        } else {
            self.extra.get(schema)
        }
    }

    /// Same face with a different primary annotation.
    pub fn relabelled(&self, truth: Shape) -> Self {
        Self {
            id: self.id.clone(),
            image: self.image.clone(),
            truth,
            bbox: self.bbox,
            extra: self.extra.clone(),
        }
    }
}

/// A sample resampled into the square reference frame.
#[derive(Debug, Clone)]
pub struct NormalizedSample {
    pub image: GrayImage,
    pub truth: Shape,
    /// Original pixels → reference frame.
    pub transform: SimilarityTransform,
}

/// Maps the face box onto the `frame_px` square and resamples the image and
/// ground truth with the same transform.
pub fn normalize_sample(sample: &TrainingSample, frame_px: usize) -> Result<NormalizedSample> {
    let transform = sample.bbox.to_frame(frame_px)?;
    let truth = sample.truth.transformed(&transform);
    Ok(NormalizedSample {
        image: sample.image.warp(&transform, frame_px),
        truth,
        transform,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::geometry::AnnotationSchema;

    fn sample(bbox: BBox) -> TrainingSample {
        let schema = Arc::new(AnnotationSchema::new("s", vec!["a".into(), "b".into(), "c".into()], (0, 1)).unwrap());
        let truth = Shape::new(schema, vec![[40.0, 50.0], [80.0, 52.0], [61.0, 90.0]]).unwrap();
        let img = GrayImage::from_fn(120, 140, |x, y| ((x + 2 * y) % 17) as f64 / 16.0).unwrap();
        TrainingSample::new("x", Arc::new(img), truth, bbox).unwrap()
    }

    #[test]
    fn frame_sized_box_is_identity() {
        let s = sample(BBox::new(0.0, 0.0, 250.0, 250.0).unwrap());
        let n = normalize_sample(&s, 250).unwrap();
        assert_eq!(n.transform, SimilarityTransform::identity());
        assert_eq!(n.truth, s.truth);
    }

    #[test]
    fn half_size_box_doubles() {
        let b = BBox::new(10.0, 20.0, 125.0, 125.0).unwrap();
        let s = sample(b);
        let n = normalize_sample(&s, 250).unwrap();
        assert!((n.transform.scale - 2.0).abs() < 1e-15);
        let c = n.transform.apply(b.center());
        assert!((c[0] - 125.0).abs() < 1e-12 && (c[1] - 125.0).abs() < 1e-12);
    }

    #[test]
    fn round_trip_to_original_pixels() {
        let b = BBox::new(17.3, 8.9, 97.1, 121.4).unwrap();
        let s = sample(b);
        let n = normalize_sample(&s, 250).unwrap();
        let back = n.truth.transformed(&n.transform.inverse());
        for (p, q) in back.points().iter().zip(s.truth.points()) {
            assert!((p[0] - q[0]).abs() < 1e-6 && (p[1] - q[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn degenerate_box_is_rejected() {
        let mut s = sample(BBox::new(0.0, 0.0, 10.0, 10.0).unwrap());
        s.bbox.w = 0.0;
        assert!(matches!(normalize_sample(&s, 250), Err(Error::DegenerateBBox(_))));
    }
}
