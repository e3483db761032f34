//! Parametric face: 40 dense landmarks tied to rasterized parts.
//!
//! Geometry is defined in face units (x right, y down, face half-width 1),
//! then mapped to pixels by `center + scale · R(tilt) · (aspect · x, y)`.

use serde::{Deserialize, Serialize};

use crate::features::GrayImage;
use crate::geometry::Point;

pub const DENSE_LANDMARKS: usize = 40;

/// Dense landmark names, in index order.
pub const DENSE_NAMES: [&str; DENSE_LANDMARKS] = [
    "contour_00",
    "contour_01",
    "contour_02",
    "contour_03",
    "contour_04",
    "contour_05",
    "contour_06",
    "contour_07",
    "contour_08",
    "contour_09",
    "contour_10",
    "contour_11",
    "brow_l_outer",
    "brow_l_mid",
    "brow_l_inner",
    "brow_r_inner",
    "brow_r_mid",
    "brow_r_outer",
    "eye_l_outer",
    "eye_l_top",
    "eye_l_inner",
    "eye_l_bottom",
    "eye_l_center",
    "eye_r_inner",
    "eye_r_top",
    "eye_r_outer",
    "eye_r_bottom",
    "eye_r_center",
    "nose_bridge",
    "nose_tip",
    "nostril_l",
    "nostril_r",
    "nose_bottom",
    "mouth_l",
    "lip_top",
    "mouth_r",
    "lip_bottom",
    "mouth_inner_top",
    "mouth_inner_bottom",
    "mouth_center",
];

pub const EYE_L_CENTER: usize = 22;
pub const EYE_R_CENTER: usize = 27;

const FACE_CENTER_Y: f64 = 0.1;
const FACE_A: f64 = 1.0;
const FACE_B: f64 = 1.25;

/// Everything that determines one rendered face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceParams {
    /// Face origin in image pixels.
    pub center: Point,
    /// Pixels per face unit.
    pub scale: f64,
    /// In-plane rotation (radians).
    pub tilt: f64,
    /// Horizontal stretch of the face.
    pub aspect: f64,
    /// Pseudo out-of-plane rotation: inner parts slide sideways with depth.
    pub yaw: f64,
    pub eye_sep: f64,
    pub eye_open: f64,
    pub brow_raise: f64,
    pub nose_len: f64,
    pub mouth_width: f64,
    pub mouth_open: f64,
    /// Shading slope across the face (per face unit, x and y).
    pub light: [f64; 2],
    /// Only affects skin and background texture, never geometry.
    pub texture_seed: u64,
    pub image_px: usize,
}

impl FaceParams {
    /// Zero-variation face centred in an `image_px` square.
    pub fn canonical(image_px: usize) -> Self {
        let c = image_px as f64 / 2.0;
        Self {
            center: [c, c - 0.1 * image_px as f64 * 0.25],
            scale: image_px as f64 * 0.27,
            tilt: 0.0,
            aspect: 1.0,
            yaw: 0.0,
            eye_sep: 0.42,
            eye_open: 1.0,
            brow_raise: 0.0,
            nose_len: 0.35,
            mouth_width: 0.33,
            mouth_open: 0.02,
            light: [0.0, 0.0],
            texture_seed: 0,
            image_px,
        }
    }

    /// Face units → image pixels.
    #[inline]
    pub fn to_image(&self, p: Point) -> Point {
        let (s, c) = self.tilt.sin_cos();
        let x = self.aspect * p[0];
        let y = p[1];
        [
            self.center[0] + self.scale * (c * x - s * y),
            self.center[1] + self.scale * (s * x + c * y),
        ]
    }

    #[inline]
    fn to_face(&self, q: Point) -> Point {
        let (s, c) = self.tilt.sin_cos();
        let dx = (q[0] - self.center[0]) / self.scale;
        let dy = (q[1] - self.center[1]) / self.scale;
        [(c * dx + s * dy) / self.aspect, -s * dx + c * dy]
    }
}

#[derive(Debug, Clone, Copy)]
struct Ellipse {
    c: Point,
    a: f64,
    b: f64,
}

impl Ellipse {
    /// Area coverage of the pixel at face point `p`; `w` is one pixel in face
    /// units.
    #[inline]
    fn coverage(&self, p: Point, w: f64) -> f64 {
        if self.a < 1e-9 || self.b < 1e-9 {
            return 0.0;
        }
        let u = (p[0] - self.c[0]) / self.a;
        let v = (p[1] - self.c[1]) / self.b;
        let f = (u * u + v * v).sqrt();
        if f < 1e-9 {
            return 1.0;
        }
        let gx = u / (self.a * f);
        let gy = v / (self.b * f);
        let dist = (f - 1.0) / gx.hypot(gy);
        (0.5 - dist / w).clamp(0.0, 1.0)
    }

    fn point(&self, angle: f64) -> Point {
        [self.c[0] + self.a * angle.cos(), self.c[1] + self.b * angle.sin()]
    }
}

/// All rasterized parts, in paint order, with their intensities.
struct Layout {
    face: Ellipse,
    brows: [Ellipse; 2],
    eyes: [Ellipse; 2],
    irises: [Ellipse; 2],
    bridge: Ellipse,
    tip: Ellipse,
    nostrils: [Ellipse; 2],
    lips: Ellipse,
    opening: Ellipse,
}

impl Layout {
    fn new(p: &FaceParams) -> Self {
        let depth = |d: f64| p.yaw * d;
        let eye_b = 0.075 * p.eye_open;
        let eye = |side: f64| Ellipse {
            c: [side * p.eye_sep + depth(0.25), -0.2],
            a: 0.17,
            b: eye_b,
        };
        let iris = |side: f64| {
            let r = 0.06f64.min(eye_b * 0.95);
            Ellipse {
                c: [side * p.eye_sep + depth(0.25), -0.2],
                a: r,
                b: r,
            }
        };
        let brow = |side: f64| Ellipse {
            c: [side * p.eye_sep + depth(0.22), -0.48 - p.brow_raise],
            a: 0.2,
            b: 0.045,
        };
        let bridge_top = -0.12;
        let tip_y = bridge_top + p.nose_len;
        let nostril = |side: f64| Ellipse {
            c: [depth(0.4) + side * 0.11, tip_y + 0.06],
            a: 0.035,
            b: 0.03,
        };
        let mouth_c = [depth(0.3), 0.62];
        let half_open = 0.5 * p.mouth_open;
        Self {
            face: Ellipse {
                c: [0.0, FACE_CENTER_Y],
                a: FACE_A,
                b: FACE_B,
            },
            brows: [brow(-1.0), brow(1.0)],
            eyes: [eye(-1.0), eye(1.0)],
            irises: [iris(-1.0), iris(1.0)],
            bridge: Ellipse {
                c: [0.5 * (depth(0.3) + depth(0.45)), 0.5 * (bridge_top + tip_y)],
                a: 0.035,
                b: 0.5 * p.nose_len,
            },
            tip: Ellipse {
                c: [depth(0.45), tip_y],
                a: 0.09,
                b: 0.07,
            },
            nostrils: [nostril(-1.0), nostril(1.0)],
            lips: Ellipse {
                c: mouth_c,
                a: p.mouth_width,
                b: 0.07 + half_open,
            },
            opening: Ellipse {
                c: mouth_c,
                a: 0.8 * p.mouth_width,
                b: half_open,
            },
        }
    }

    fn landmarks(&self, p: &FaceParams) -> Vec<Point> {
        let mut out = Vec::with_capacity(DENSE_LANDMARKS);
        for i in 0..12 {
            let angle = (-20.0 + i as f64 * 220.0 / 11.0).to_radians();
            out.push(self.face.point(angle));
        }
        let [bl, br] = self.brows;
        out.extend([
            [bl.c[0] - bl.a, bl.c[1]],
            bl.c,
            [bl.c[0] + bl.a, bl.c[1]],
            [br.c[0] - br.a, br.c[1]],
            br.c,
            [br.c[0] + br.a, br.c[1]],
        ]);
        let [el, er] = self.eyes;
        out.extend([
            [el.c[0] - el.a, el.c[1]],
            [el.c[0], el.c[1] - el.b],
            [el.c[0] + el.a, el.c[1]],
            [el.c[0], el.c[1] + el.b],
            el.c,
            [er.c[0] - er.a, er.c[1]],
            [er.c[0], er.c[1] - er.b],
            [er.c[0] + er.a, er.c[1]],
            [er.c[0], er.c[1] + er.b],
            er.c,
        ]);
        let bridge_top = [self.bridge.c[0], self.bridge.c[1] - self.bridge.b];
        out.extend([
            bridge_top,
            self.tip.c,
            self.nostrils[0].c,
            self.nostrils[1].c,
            [self.tip.c[0], self.tip.c[1] + self.tip.b],
        ]);
        let (m, o) = (self.lips, self.opening);
        out.extend([
            [m.c[0] - m.a, m.c[1]],
            [m.c[0], m.c[1] - m.b],
            [m.c[0] + m.a, m.c[1]],
            [m.c[0], m.c[1] + m.b],
            [o.c[0], o.c[1] - o.b],
            [o.c[0], o.c[1] + o.b],
            m.c,
        ]);
        debug_assert_eq!(out.len(), DENSE_LANDMARKS);
        out.into_iter().map(|q| p.to_image(q)).collect()
    }
}

/// Dense landmark positions in image pixels.
pub fn face_landmarks(params: &FaceParams) -> Vec<Point> {
    Layout::new(params).landmarks(params)
}

fn hash2(seed: u64, i: i64, j: i64) -> f64 {
    let mut z = seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (j as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

/// Smooth value noise in `[0, 1]` on a lattice of unit spacing.
fn value_noise(seed: u64, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let sx = fx * fx * (3.0 - 2.0 * fx);
    let sy = fy * fy * (3.0 - 2.0 * fy);
    let (i, j) = (x0 as i64, y0 as i64);
    let top = hash2(seed, i, j) * (1.0 - sx) + hash2(seed, i + 1, j) * sx;
    let bottom = hash2(seed, i, j + 1) * (1.0 - sx) + hash2(seed, i + 1, j + 1) * sx;
    top * (1.0 - sy) + bottom * sy
}

#[inline]
fn paint(base: f64, value: f64, alpha: f64) -> f64 {
    base + (value - base) * alpha
}

/// Rasterizes the face with anti-aliased part boundaries.
pub fn render_face(params: &FaceParams) -> GrayImage {
    let layout = Layout::new(params);
    let n = params.image_px;
    let w = 1.0 / (params.scale * params.aspect.min(1.0));
    let seed = params.texture_seed;
    let mut pixels = Vec::with_capacity(n * n);
    for y in 0..n {
        for x in 0..n {
            let q = [x as f64, y as f64];
            let p = params.to_face(q);
            let bg = 0.12 + 0.16 * value_noise(seed, q[0] / 23.0, q[1] / 23.0);
            let mut f = 0.6 + 0.03 * (value_noise(seed ^ 0xA5A5, p[0] / 0.12, p[1] / 0.12) - 0.5);
            for e in &layout.brows {
                f = paint(f, 0.2, e.coverage(p, w));
            }
            for (e, iris) in layout.eyes.iter().zip(&layout.irises) {
                f = paint(f, 0.93, e.coverage(p, w));
                f = paint(f, 0.1, iris.coverage(p, w));
            }
            f = paint(f, 0.48, layout.bridge.coverage(p, w));
            f = paint(f, 0.78, layout.tip.coverage(p, w));
            for e in &layout.nostrils {
                f = paint(f, 0.22, e.coverage(p, w));
            }
            f = paint(f, 0.34, layout.lips.coverage(p, w));
            f = paint(f, 0.06, layout.opening.coverage(p, w));
            let shade = (1.0 + params.light[0] * p[0] + params.light[1] * p[1]).max(0.2);
            let v = paint(bg, f * shade, layout.face.coverage(p, w));
            pixels.push(v.clamp(0.0, 1.0));
        }
    }
    GrayImage::new(n, n, pixels).expect("rendered pixels lie in [0, 1]")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let set: std::collections::HashSet<_> = DENSE_NAMES.iter().collect();
        assert_eq!(set.len(), DENSE_LANDMARKS);
        assert_eq!(DENSE_NAMES[EYE_L_CENTER], "eye_l_center");
        assert_eq!(DENSE_NAMES[EYE_R_CENTER], "eye_r_center");
    }

    #[test]
    fn tilt_rotates_about_face_center() {
        let base = FaceParams::canonical(250);
        let theta = 0.37;
        let tilted = FaceParams { tilt: theta, ..base };
        let (s, c) = theta.sin_cos();
        for (p, q) in face_landmarks(&base).iter().zip(face_landmarks(&tilted)) {
            let dx = p[0] - base.center[0];
            let dy = p[1] - base.center[1];
            let r = [base.center[0] + c * dx - s * dy, base.center[1] + s * dx + c * dy];
            assert!((r[0] - q[0]).abs() < 1e-9 && (r[1] - q[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn texture_does_not_move_landmarks() {
        let a = FaceParams::canonical(250);
        let b = FaceParams { texture_seed: 99, ..a };
        assert_eq!(face_landmarks(&a), face_landmarks(&b));
        assert_ne!(render_face(&a), render_face(&b));
    }

    #[test]
    fn landmarks_inside_image() {
        let p = FaceParams::canonical(250);
        for q in face_landmarks(&p) {
            assert!(q[0] > 0.0 && q[0] < 249.0 && q[1] > 0.0 && q[1] < 249.0);
        }
    }
}
