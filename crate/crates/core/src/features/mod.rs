//! Rasters and shape-indexed SIFT descriptors.

mod image;
mod sift;

pub use self::image::{sample_bilinear, to_gray, GrayImage};
pub use sift::{extract_features, extract_into, sift_at, FeatureExtractor, FeatureVector, SiftLayout, DESCRIPTOR_LEN};
