use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// `p ↦ scale · R(rotation) · p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: f64,
    pub translation: [f64; 2],
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: 0.0,
            translation: [0.0, 0.0],
        }
    }

    pub fn new(scale: f64, rotation: f64, translation: [f64; 2]) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "similarity scale must be positive, got {scale}"
            )));
        }
        if !rotation.is_finite() || !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite similarity parameter".into()));
        }
        Ok(Self {
            scale,
            rotation,
            translation,
        })
    }

    /// Linear part as `(a, b)` with matrix `[[a, -b], [b, a]]`.
    #[inline]
    fn linear(&self) -> (f64, f64) {
        let (s, c) = self.rotation.sin_cos();
        (self.scale * c, self.scale * s)
    }

    #[inline]
    pub fn apply(&self, p: Point) -> Point {
        let (a, b) = self.linear();
        [
            a * p[0] - b * p[1] + self.translation[0],
            b * p[0] + a * p[1] + self.translation[1],
        ]
    }

    pub fn apply_all(&self, points: &[Point]) -> Vec<Point> {
        points.iter().map(|&p| self.apply(p)).collect()
    }

    pub fn inverse(&self) -> Self {
        let inv_scale = 1.0 / self.scale;
        let rotation = -self.rotation;
        let (s, c) = rotation.sin_cos();
        let (a, b) = (inv_scale * c, inv_scale * s);
        let [tx, ty] = self.translation;
        Self {
            scale: inv_scale,
            rotation,
            translation: [-(a * tx - b * ty), -(b * tx + a * ty)],
        }
    }

    /// `self ∘ inner`: applies `inner` first.
    pub fn compose(&self, inner: &Self) -> Self {
        Self {
            scale: self.scale * inner.scale,
            rotation: self.rotation + inner.rotation,
            translation: self.apply(inner.translation),
        }
    }

    /// Similarity about a pivot point rather than the origin.
    pub fn about(pivot: Point, scale: f64, rotation: f64, shift: [f64; 2]) -> Self {
        let lin = Self {
            scale,
            rotation,
            translation: [0.0, 0.0],
        };
        let r = lin.apply(pivot);
        Self {
            scale,
            rotation,
            translation: [pivot[0] - r[0] + shift[0], pivot[1] - r[1] + shift[1]],
        }
    }
}

/// Least-squares similarity transform taking `src` onto `dst`.
pub fn fit_similarity(src: &[Point], dst: &[Point]) -> Result<SimilarityTransform> {
    if src.len() != dst.len() {
        return Err(Error::DimensionMismatch {
            expected: src.len(),
            got: dst.len(),
        });
    }
    if src.len() < 2 {
        return Err(Error::DegenerateConfiguration(format!(
            "need at least 2 point pairs, got {}",
            src.len()
        )));
    }
    let n = src.len() as f64;
    let centroid = |pts: &[Point]| {
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
        [sx / n, sy / n]
    };
    let cs = centroid(src);
    let cd = centroid(dst);

    let mut dot = 0.0;
    let mut cross = 0.0;
    let mut norm = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let (sx, sy) = (s[0] - cs[0], s[1] - cs[1]);
        let (dx, dy) = (d[0] - cd[0], d[1] - cd[1]);
        dot += sx * dx + sy * dy;
        cross += sx * dy - sy * dx;
        norm += sx * sx + sy * sy;
    }
    let spread = norm.sqrt() / n.sqrt();
    if spread < 1e-12 {
        return Err(Error::DegenerateConfiguration("all source points coincide".into()));
    }
    let a = dot / norm;
    let b = cross / norm;
    let scale = a.hypot(b);
    if scale < 1e-12 {
        return Err(Error::DegenerateConfiguration(
            "destination points carry no similarity signal".into(),
        ));
    }
    let rotation = b.atan2(a);
    let lin = SimilarityTransform {
        scale,
        rotation,
        translation: [0.0, 0.0],
    };
    let r = lin.apply(cs);
    Ok(SimilarityTransform {
        scale,
        rotation,
        translation: [cd[0] - r[0], cd[1] - r[1]],
    })
}

/// Axis-aligned face box in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let b = Self { x, y, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite());
        if !finite || !(self.w > 0.0) || !(self.h > 0.0) {
            return Err(Error::DegenerateBBox(format!("{self:?}")));
        }
        Ok(())
    }

    pub fn center(&self) -> Point {
        [self.x + 0.5 * self.w, self.y + 0.5 * self.h]
    }

    /// Extents of `points` grown by `margin` (fraction of width/height, split
    /// evenly between both sides).
    pub fn around_points(points: &[Point], margin: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("points for bounding box"));
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let w = hi[0] - lo[0];
        let h = hi[1] - lo[1];
        Self::new(
            lo[0] - 0.5 * margin * w,
            lo[1] - 0.5 * margin * h,
            w * (1.0 + margin),
            h * (1.0 + margin),
        )
    }

    /// Maps the box into a `frame_px` square: longer side fills the frame,
    /// aspect ratio kept, box center at the frame center.
    pub fn to_frame(&self, frame_px: usize) -> Result<SimilarityTransform> {
        self.validate()?;
        let frame = frame_px as f64;
        let scale = frame / self.w.max(self.h);
        let c = self.center();
        SimilarityTransform::new(scale, 0.0, [0.5 * frame - scale * c[0], 0.5 * frame - scale * c[1]])
    }
}
