use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::geometry::{Point, SimilarityTransform};

/// Row-major grayscale raster with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                got: pixels.len(),
            });
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("pixel intensity {v} outside [0, 1]")));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Bilinear interpolation with coordinates clamped to the border.
    #[inline]
    pub fn sample_bilinear(&self, p: Point) -> f64 {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let x = p[0].clamp(0.0, max_x);
        let y = p[1].clamp(0.0, max_y);
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let x0 = x0 as usize;
        let y0 = y0 as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Resamples into a `size × size` raster; `to_output` maps this image's
    /// coordinates to the output's.
    pub fn warp(&self, to_output: &SimilarityTransform, size: usize) -> GrayImage {
        let back = to_output.inverse();
        let mut pixels = Vec::with_capacity(size * size);
        for y in 0..size {
            for x in 0..size {
                pixels.push(self.sample_bilinear(back.apply([x as f64, y as f64])));
            }
        }
        GrayImage {
            width: size,
            height: size,
            pixels,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        match img {
            DynamicImage::ImageLuma8(buf) => {
                let (w, h) = buf.dimensions();
                let pixels = buf.into_raw().into_iter().map(|v| v as f64 / 255.0).collect();
                Self::new(w as usize, h as usize, pixels)
            }
            other => to_gray(&other),
        }
    }

    /// Writes an 8-bit grayscale PNG (intensities rounded to 1/255).
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let raw: Vec<u8> = self.pixels.iter().map(|v| (v * 255.0).round() as u8).collect();
        let buf: ImageBuffer<Luma<u8>, _> = ImageBuffer::from_raw(self.width as u32, self.height as u32, raw)
            .expect("buffer length matches dimensions");
        buf.save(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Rounds to the 8-bit levels a PNG round trip reproduces exactly.
    pub fn quantized(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|v| (v * 255.0).round() / 255.0).collect(),
        }
    }
}

/// ITU-R 601 luma of an RGB image, scaled to `[0, 1]`.
pub fn to_gray(img: &DynamicImage) -> Result<GrayImage> {
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::EmptyImage);
    }
    let pixels = rgb
        .pixels()
        .map(|p| {
            let [r, g, b] = p.0;
            ((0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0).clamp(0.0, 1.0)
        })
        .collect();
    GrayImage::new(w as usize, h as usize, pixels)
}

pub fn sample_bilinear(img: &GrayImage, p: Point) -> f64 {
    img.sample_bilinear(p)
}

#[cfg(test)]
mod tests {
    use image::{Rgb, RgbImage};

    use super::*;

    fn solid(rgb: [u8; 3]) -> DynamicImage {
        DynamicImage::ImageRgb8(RgbImage::from_pixel(4, 3, Rgb(rgb)))
    }

    #[test]
    fn luminance_examples() {
        let white = to_gray(&solid([255, 255, 255])).unwrap();
        assert!(white.pixels().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let black = to_gray(&solid([0, 0, 0])).unwrap();
        assert!(black.pixels().iter().all(|&v| v == 0.0));
        let green = to_gray(&solid([0, 255, 0])).unwrap();
        assert!(green.pixels().iter().all(|&v| (v - 0.587).abs() < 1e-12));
        assert!(matches!(
            to_gray(&DynamicImage::ImageRgb8(RgbImage::new(0, 0))),
            Err(Error::EmptyImage)
        ));
    }

    #[test]
    fn bilinear_examples() {
        let img = GrayImage::new(2, 2, vec![0.0, 1.0, 0.25, 0.75]).unwrap();
        assert_eq!(img.sample_bilinear([1.0, 0.0]), 1.0);
        assert_eq!(img.sample_bilinear([0.0, 1.0]), 0.25);
        assert_eq!(img.sample_bilinear([0.5, 0.0]), 0.5);
        assert_eq!(img.sample_bilinear([-100.0, -3.0]), 0.0);
        assert_eq!(img.sample_bilinear([50.0, 80.0]), 0.75);
    }

    #[test]
    fn rejects_out_of_range_pixels() {
        assert!(GrayImage::new(1, 1, vec![1.5]).is_err());
        assert!(GrayImage::new(1, 1, vec![f64::NAN]).is_err());
        assert!(matches!(GrayImage::new(0, 1, vec![]), Err(Error::EmptyImage)));
    }

    #[test]
    fn identity_warp_is_exact() {
        let img = GrayImage::from_fn(7, 7, |x, y| ((x * 3 + y) % 5) as f64 / 4.0).unwrap();
        let w = img.warp(&SimilarityTransform::identity(), 7);
        assert_eq!(w, img);
    }
}
