use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Random similarity jitter applied to the mean shape when building training
/// initializations, in reference-frame units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationRanges {
    /// Uniform shift in `[-translation_px, translation_px]` per axis.
    pub translation_px: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    /// Uniform rotation in `[-rotation_rad, rotation_rad]`.
    pub rotation_rad: f64,
}

impl Default for PerturbationRanges {
    fn default() -> Self {
        Self {
            translation_px: 15.0,
            scale_min: 0.9,
            scale_max: 1.1,
            rotation_rad: 0.15,
        }
    }
}

impl PerturbationRanges {
    pub fn zero() -> Self {
        Self {
            translation_px: 0.0,
            scale_min: 1.0,
            scale_max: 1.0,
            rotation_rad: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeConfig {
    pub num_stages: usize,
    pub perturbations_per_sample: usize,
    pub pca_energy: f64,
    pub ridge_lambda: f64,
    pub patch_px: usize,
    pub frame_px: usize,
    pub perturbation: PerturbationRanges,
    pub rng_seed: u64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            num_stages: 5,
            perturbations_per_sample: 10,
            pca_energy: 0.98,
            ridge_lambda: 1e-3,
            patch_px: 20,
            frame_px: 250,
            perturbation: PerturbationRanges::default(),
            rng_seed: 0,
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if self.num_stages == 0 {
            return bad("num_stages must be positive".into());
        }
        if self.perturbations_per_sample == 0 {
            return bad("perturbations_per_sample must be positive".into());
        }
        if !(self.pca_energy > 0.0 && self.pca_energy <= 1.0) {
            return bad(format!("pca_energy {} outside (0, 1]", self.pca_energy));
        }
        if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) {
            return bad(format!("ridge_lambda {} must be >= 0", self.ridge_lambda));
        }
        if self.patch_px == 0 || self.patch_px % 2 != 0 {
            return bad(format!("patch_px {} must be positive and even", self.patch_px));
        }
        if self.frame_px <= self.patch_px {
            return bad(format!(
                "frame_px {} must exceed patch_px {}",
                self.frame_px, self.patch_px
            ));
        }
        let p = &self.perturbation;
        if !(p.translation_px >= 0.0 && p.rotation_rad >= 0.0) {
            return bad("perturbation half-widths must be non-negative".into());
        }
        if !(p.scale_min > 0.0 && p.scale_min <= p.scale_max && p.scale_max.is_finite()) {
            return bad(format!(
                "perturbation scale range [{}, {}] is not well ordered",
                p.scale_min, p.scale_max
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        CascadeConfig::default().validate().unwrap();
    }

    #[test]
    fn catches_bad_ranges() {
        let mut c = CascadeConfig::default();
        c.perturbation.scale_min = 1.2;
        assert!(c.validate().is_err());
        let mut c = CascadeConfig::default();
        c.frame_px = 20;
        assert!(c.validate().is_err());
        let mut c = CascadeConfig::default();
        c.num_stages = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let c: CascadeConfig = toml::from_str("num_stages = 3\n[perturbation]\nrotation_rad = 0.0\n").unwrap();
        assert_eq!(c.num_stages, 3);
        assert_eq!(c.perturbation.rotation_rad, 0.0);
        assert_eq!(c.perturbation.translation_px, 15.0);
        assert_eq!(c.frame_px, 250);
    }
}
