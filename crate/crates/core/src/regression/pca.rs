use faer::{Mat, MatRef, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-12;

/// Which eigenproblem produced the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcaRoute {
    /// `D × D` covariance eigensolve.
    Covariance,
    /// `N × N` Gram eigensolve, components lifted back through the data.
    Gram,
    /// Covariance when `D ≤ N`, Gram otherwise.
    Auto,
}

/// Mean-centred orthonormal projection retaining a fixed energy fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaBasis {
    mean: Vec<f64>,
    /// `k × D`, row-major.
    components: Vec<f64>,
    /// Variance captured by each component, descending.
    variances: Vec<f64>,
    retained_energy: f64,
}

impl PcaBasis {
    pub(crate) fn from_parts(
        mean: Vec<f64>,
        components: Vec<f64>,
        variances: Vec<f64>,
        retained_energy: f64,
    ) -> Result<Self> {
        let d = mean.len();
        let k = variances.len();
        if components.len() != k * d {
            return Err(Error::DimensionMismatch {
                expected: k * d,
                got: components.len(),
            });
        }
        Ok(Self {
            mean,
            components,
            variances,
            retained_energy,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn k(&self) -> usize {
        self.variances.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn component(&self, i: usize) -> &[f64] {
        let d = self.input_dim();
        &self.components[i * d..(i + 1) * d]
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn retained_energy(&self) -> f64 {
        self.retained_energy
    }

    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: v.len(),
            });
        }
        let centred: Vec<f64> = v.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        Ok((0..self.k()).map(|i| dot(self.component(i), &centred)).collect())
    }

    pub fn reconstruct(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                got: coeffs.len(),
            });
        }
        let mut out = self.mean.clone();
        for (i, &c) in coeffs.iter().enumerate() {
            for (o, &p) in out.iter_mut().zip(self.component(i)) {
                *o += c * p;
            }
        }
        Ok(out)
    }

    /// Projects every row of `samples` (`N × D`) to `N × k`.
    pub fn project_rows(&self, samples: MatRef<'_, f64>) -> Result<Mat<f64>> {
        if samples.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: samples.ncols(),
            });
        }
        let centred = Mat::from_fn(samples.nrows(), samples.ncols(), |i, j| samples[(i, j)] - self.mean[j]);
        let z = &centred * self.components_mat().transpose();
        super::clear_upper_registers();
        Ok(z)
    }

    fn components_mat(&self) -> Mat<f64> {
        let d = self.input_dim();
        Mat::from_fn(self.k(), d, |i, j| self.components[i * d + j])
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Column means, accumulated as offsets from the first row so constant
/// columns centre to exact zeros.
pub(crate) fn column_means(x: MatRef<'_, f64>) -> Vec<f64> {
    let n = x.nrows() as f64;
    (0..x.ncols())
        .map(|j| {
            let x0 = x[(0, j)];
            let d: f64 = (0..x.nrows()).map(|i| x[(i, j)] - x0).sum();
            x0 + d / n
        })
        .collect()
}

pub(crate) fn centred(x: MatRef<'_, f64>, mean: &[f64]) -> Mat<f64> {
    Mat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - mean[j])
}

/// Principal components of the rows of `samples`, keeping the smallest `k`
/// whose eigenvalue mass reaches `energy`.
pub fn pca_fit(samples: MatRef<'_, f64>, energy: f64) -> Result<PcaBasis> {
    pca_fit_with(samples, energy, PcaRoute::Auto)
}

pub fn pca_fit_with(samples: MatRef<'_, f64>, energy: f64, route: PcaRoute) -> Result<PcaBasis> {
    let (n, d) = (samples.nrows(), samples.ncols());
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "PCA needs at least 2 samples, got {n}"
        )));
    }
    if d == 0 {
        return Err(Error::DegenerateData("zero-dimensional samples".into()));
    }
    if !(energy > 0.0 && energy <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "energy must lie in (0, 1], got {energy}"
        )));
    }
    if samples.row_iter().any(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(Error::DegenerateData("non-finite sample value".into()));
    }
    let mean = column_means(samples);
    let xc = centred(samples, &mean);
    let route = match route {
        PcaRoute::Auto if d <= n => PcaRoute::Covariance,
        PcaRoute::Auto => PcaRoute::Gram,
        r => r,
    };
    let scatter = match route {
        PcaRoute::Covariance => xc.transpose() * &xc,
        _ => &xc * xc.transpose(),
    };
    let eig = scatter
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::DegenerateData(format!("eigensolver failed: {e:?}")))?;
    let values = eig.S().column_vector();
    let vectors = eig.U();
    let m = values.nrows();

    // Descending order, numerically-zero directions dropped.
    let largest = values[m - 1].max(0.0);
    if !(largest > f64::MIN_POSITIVE) {
        return Err(Error::DegenerateData("total variance is zero".into()));
    }
    let order: Vec<usize> = (0..m).rev().take_while(|&i| values[i] > RANK_TOL * largest).collect();
    let total: f64 = order.iter().map(|&i| values[i]).sum();
    let mut k = 0;
    let mut acc = 0.0;
    for &i in &order {
        acc += values[i];
        k += 1;
        if acc / total >= energy {
            break;
        }
    }
    let kept = &order[..k];
    let retained_energy = acc / total;
    let norm = 1.0 / (n as f64 - 1.0);
    let variances: Vec<f64> = kept.iter().map(|&i| values[i] * norm).collect();

    let mut components = Vec::with_capacity(k * d);
    match route {
        PcaRoute::Covariance => {
            for &i in kept {
                let col = vectors.col(i);
                components.extend((0..d).map(|j| col[j]));
            }
        }
        _ => {
            // v = Xcᵀ u / sqrt(λ)
            let mut u = Mat::<f64>::zeros(n, k);
            for (c, &i) in kept.iter().enumerate() {
                let s = 1.0 / values[i].sqrt();
                for r in 0..n {
                    u[(r, c)] = vectors[(r, i)] * s;
                }
            }
            let v = xc.transpose() * &u;
            for c in 0..k {
                components.extend((0..d).map(|j| v[(j, c)]));
            }
        }
    }
    super::clear_upper_registers();
    canonicalize_signs(&mut components, d);
    PcaBasis::from_parts(mean, components, variances, retained_energy)
}

/// Flips each component so its largest-magnitude entry is positive.
fn canonicalize_signs(components: &mut [f64], d: usize) {
    for row in components.chunks_exact_mut(d) {
        let pivot = row
            .iter()
            .copied()
            .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
    }
}

pub fn pca_project(basis: &PcaBasis, v: &[f64]) -> Result<Vec<f64>> {
    basis.project(v)
}

pub fn pca_reconstruct(basis: &PcaBasis, coeffs: &[f64]) -> Result<Vec<f64>> {
    basis.reconstruct(coeffs)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random(n: usize, d: usize, seed: u64) -> Mat<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn line_data_is_rank_one() {
        let x = Mat::from_fn(20, 3, |i, j| {
            (i as f64 - 4.0) * [1.0, -2.0, 0.5][j] + [3.0, 1.0, 7.0][j]
        });
        let b = pca_fit(x.as_ref(), 0.98).unwrap();
        assert_eq!(b.k(), 1);
        assert!((b.retained_energy() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_energy_keeps_full_rank() {
        let x = random(10, 4, 1);
        assert_eq!(pca_fit(x.as_ref(), 1.0).unwrap().k(), 4);
        let x = random(6, 15, 2);
        assert_eq!(pca_fit(x.as_ref(), 1.0).unwrap().k(), 5);
    }

    #[test]
    fn constant_data_is_degenerate() {
        let x = Mat::from_fn(5, 3, |_, j| j as f64 * 0.1);
        assert!(matches!(pca_fit(x.as_ref(), 0.98), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn rejects_bad_arguments() {
        let x = random(1, 3, 3);
        assert!(matches!(pca_fit(x.as_ref(), 0.9), Err(Error::InsufficientData(_))));
        let x = random(4, 3, 3);
        assert!(pca_fit(x.as_ref(), 0.0).is_err());
        assert!(pca_fit(x.as_ref(), 1.5).is_err());
    }

    #[test]
    fn project_and_reconstruct() {
        let x = random(30, 6, 4);
        let b = pca_fit(x.as_ref(), 1.0).unwrap();
        assert!(b.project(b.mean()).unwrap().iter().all(|v| v.abs() < 1e-12));
        let row: Vec<f64> = (0..6).map(|j| x[(3, j)]).collect();
        let back = b.reconstruct(&b.project(&row).unwrap()).unwrap();
        for (a, r) in back.iter().zip(&row) {
            assert!((a - r).abs() < 1e-10);
        }
        assert!(matches!(b.project(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(b.reconstruct(&[1.0]).is_err());
    }

    #[test]
    fn routes_agree() {
        for (n, d, seed) in [(40, 12, 5), (12, 40, 6), (25, 25, 7)] {
            let mut x = random(n, d, seed);
            // Skewed spectrum so components are well separated.
            for j in 0..d {
                let s = 1.0 / (1.0 + j as f64);
                for i in 0..n {
                    x[(i, j)] *= s;
                }
            }
            let a = pca_fit_with(x.as_ref(), 0.95, PcaRoute::Covariance).unwrap();
            let b = pca_fit_with(x.as_ref(), 0.95, PcaRoute::Gram).unwrap();
            assert_eq!(a.k(), b.k());
            for (p, q) in a.components().iter().zip(b.components()) {
                assert!((p - q).abs() < 1e-7, "{p} vs {q}");
            }
            for (p, q) in a.variances().iter().zip(b.variances()) {
                assert!((p - q).abs() < 1e-7 * a.variances()[0]);
            }
        }
    }
}
