use std::sync::Arc;

use image::{DynamicImage, Rgb, RgbImage};
use proptest::prelude::*;

use tcr::features::{extract_features, sift_at, to_gray, GrayImage, SiftLayout, DESCRIPTOR_LEN};
use tcr::geometry::{AnnotationSchema, Point, Shape};

/// Smooth random texture with intensities in [0.25, 0.75].
fn texture(w: usize, h: usize, freq: [f64; 4], phase: [f64; 2]) -> GrayImage {
    GrayImage::from_fn(w, h, |x, y| {
        let (x, y) = (x as f64, y as f64);
        0.5 + 0.15 * (freq[0] * x + freq[1] * y + phase[0]).sin() + 0.1 * (freq[2] * x - freq[3] * y + phase[1]).cos()
    })
    .unwrap()
}

fn map_pixels(img: &GrayImage, f: impl Fn(f64) -> f64) -> GrayImage {
    GrayImage::new(img.width(), img.height(), img.pixels().iter().map(|&v| f(v)).collect()).unwrap()
}

fn texture_strategy() -> impl Strategy<Value = GrayImage> {
    (prop::array::uniform4(0.05f64..0.6), prop::array::uniform2(0.0f64..6.3)).prop_map(|(f, p)| texture(64, 64, f, p))
}

fn center() -> impl Strategy<Value = Point> {
    prop::array::uniform2(-5.0f64..70.0)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unit_or_zero_norm(img in texture_strategy(), c in center()) {
        let d = sift_at(&img, c, 20).unwrap();
        prop_assert_eq!(d.len(), DESCRIPTOR_LEN);
        let n = norm(&d);
        prop_assert!(n == 0.0 || (n - 1.0).abs() < 1e-9);
        prop_assert!(d.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn brightness_invariance(img in texture_strategy(), c in center(), shift in -0.2f64..0.2) {
        let shifted = map_pixels(&img, |v| v + shift);
        let a = sift_at(&img, c, 20).unwrap();
        let b = sift_at(&shifted, c, 20).unwrap();
        prop_assert!(max_diff(&a, &b) <= 1e-9);
    }

    #[test]
    fn contrast_invariance(img in texture_strategy(), c in center(), k in 0.3f64..1.3) {
        let scaled = map_pixels(&img, |v| v * k);
        let a = sift_at(&img, c, 20).unwrap();
        let b = sift_at(&scaled, c, 20).unwrap();
        prop_assert!(max_diff(&a, &b) <= 1e-6);
    }

    #[test]
    fn clip_rule(img in texture_strategy(), c in center()) {
        let h = SiftLayout::new(20).unwrap().histogram(&img, c);
        let n = norm(&h);
        prop_assume!(n > 0.0);
        let first: Vec<f64> = h.iter().map(|v| (v / n).min(0.2)).collect();
        prop_assert!(first.iter().all(|&v| v <= 0.2 + 1e-9));
    }

    #[test]
    fn locality(img in texture_strategy(), cx in 22.0f64..42.0, cy in 22.0f64..42.0, noise in 0.0f64..1.0) {
        let schema = Arc::new(AnnotationSchema::new("one", vec!["a".into(), "b".into()], (0, 1)).unwrap());
        let shape = Shape::new(schema, vec![[cx, cy], [cx + 1.0, cy]]).unwrap();
        let far = GrayImage::from_fn(img.width(), img.height(), |x, y| {
            let d = (x as f64 - cx).abs().max((y as f64 - cy).abs());
            if d > 21.0 { noise } else { img.get(x, y) }
        })
        .unwrap();
        let a = extract_features(&img, &shape, 20).unwrap();
        let b = extract_features(&far, &shape, 20).unwrap();
        prop_assert_eq!(a.as_slice(), b.as_slice());
    }
}

#[test]
fn vertical_step_edge_fills_only_horizontal_bins() {
    let img = GrayImage::from_fn(60, 60, |x, _| if x < 30 { 0.2 } else { 0.8 }).unwrap();
    for c in [[30.0, 30.0], [29.5, 17.0], [33.0, 40.25]] {
        let d = sift_at(&img, c, 20).unwrap();
        assert!(norm(&d) > 0.5);
        for (i, &v) in d.iter().enumerate() {
            if v != 0.0 {
                assert!(i % 8 == 0 || i % 8 == 4, "bin {} of cell {} holds {v}", i % 8, i / 8);
            }
        }
    }
}

#[test]
fn extraction_is_deterministic_and_brightness_stable() {
    let schema = Arc::new(AnnotationSchema::new("ten", (0..10).map(|i| format!("p{i}")).collect(), (0, 1)).unwrap());
    let pts: Vec<Point> = (0..10)
        .map(|i| [8.0 + 5.0 * i as f64, 20.0 + (i % 3) as f64 * 9.0])
        .collect();
    let shape = Shape::new(schema, pts).unwrap();
    let img = texture(64, 64, [0.3, 0.11, 0.07, 0.21], [0.4, 1.1]);
    let a = extract_features(&img, &shape, 20).unwrap();
    let b = extract_features(&img, &shape, 20).unwrap();
    assert_eq!(a.len(), 1280);
    assert_eq!(a.as_slice(), b.as_slice());
    let brighter = extract_features(&map_pixels(&img, |v| v + 0.1), &shape, 20).unwrap();
    assert!(max_diff(a.as_slice(), brighter.as_slice()) <= 1e-9);
    for l in 0..10 {
        let n = norm(a.block(l));
        assert!(n == 0.0 || (n - 1.0).abs() < 1e-9);
    }
}

#[test]
fn luminance() {
    let solid = |c: [u8; 3]| DynamicImage::ImageRgb8(RgbImage::from_pixel(3, 2, Rgb(c)));
    assert!(to_gray(&solid([255, 255, 255]))
        .unwrap()
        .pixels()
        .iter()
        .all(|&v| (v - 1.0).abs() < 1e-12));
    assert!(to_gray(&solid([0, 0, 0])).unwrap().pixels().iter().all(|&v| v == 0.0));
    assert!(to_gray(&solid([0, 255, 0]))
        .unwrap()
        .pixels()
        .iter()
        .all(|&v| (v - 0.587).abs() < 1e-12));
}

#[test]
fn png_round_trip_of_quantized_image_is_exact() {
    let img = texture(33, 21, [0.2, 0.3, 0.1, 0.05], [0.0, 2.0]).quantized();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.png");
    img.save_png(&path).unwrap();
    assert_eq!(GrayImage::load(&path).unwrap(), img);
}
