//! PCA compression and linear least-squares used by every cascade stage.

mod pca;
mod ridge;

pub use pca::{pca_fit, pca_fit_with, pca_project, pca_reconstruct, PcaBasis, PcaRoute};
pub use ridge::{solve_ridge, LinearMap};

/// faer's vectorized kernels can leave the upper halves of the vector
/// registers dirty. Scalar code compiled for the baseline target then pays a
/// state-transition penalty on every floating-point instruction (about 5×
/// slower SIFT extraction) until they are cleared.
pub(crate) fn clear_upper_registers() {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx") {
        // SAFETY: the feature was detected at runtime.
        unsafe { zero_upper() }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
unsafe fn zero_upper() {
    std::arch::x86_64::_mm256_zeroupper();
}
