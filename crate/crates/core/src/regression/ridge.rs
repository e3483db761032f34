use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regression::pca::{centred, column_means};

/// `y = A x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMap {
    out_dim: usize,
    in_dim: usize,
    /// Row-major `out_dim × in_dim`.
    matrix: Vec<f64>,
    bias: Vec<f64>,
}

impl LinearMap {
    pub fn new(out_dim: usize, in_dim: usize, matrix: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if matrix.len() != out_dim * in_dim {
            return Err(Error::DimensionMismatch {
                expected: out_dim * in_dim,
                got: matrix.len(),
            });
        }
        if bias.len() != out_dim {
            return Err(Error::DimensionMismatch {
                expected: out_dim,
                got: bias.len(),
            });
        }
        if !matrix.iter().chain(&bias).all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite regression coefficient".into()));
        }
        Ok(Self {
            out_dim,
            in_dim,
            matrix,
            bias,
        })
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.in_dim..(i + 1) * self.in_dim]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim,
                got: x.len(),
            });
        }
        Ok((0..self.out_dim)
            .map(|i| self.bias[i] + self.row(i).iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .collect())
    }

    /// Applies the map to every row of `x` (`N × in_dim`), giving `N × out_dim`.
    pub fn apply_rows(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        if x.ncols() != self.in_dim {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim,
                got: x.ncols(),
            });
        }
        let a = Mat::from_fn(self.in_dim, self.out_dim, |j, i| self.matrix[i * self.in_dim + j]);
        let mut y = x * &a;
        super::clear_upper_registers();
        for i in 0..y.nrows() {
            for j in 0..self.out_dim {
                y[(i, j)] += self.bias[j];
            }
        }
        Ok(y)
    }
}

/// Minimizes `Σ‖A xᵢ + b − yᵢ‖² + λ‖A‖²_F` with an unpenalized bias.
pub fn solve_ridge(x: MatRef<'_, f64>, y: MatRef<'_, f64>, lambda: f64) -> Result<LinearMap> {
    let (n, d) = (x.nrows(), x.ncols());
    let m = y.ncols();
    if n == 0 {
        return Err(Error::InsufficientData("ridge regression needs samples".into()));
    }
    if y.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.nrows(),
        });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "ridge lambda must be finite and non-negative, got {lambda}"
        )));
    }
    if lambda == 0.0 && d >= n {
        return Err(Error::SingularSystem(format!(
            "unregularized problem with {d} inputs and only {n} samples"
        )));
    }
    let x_mean = column_means(x);
    let y_mean = column_means(y);
    if d == 0 {
        return LinearMap::new(m, 0, Vec::new(), y_mean);
    }
    let xc = centred(x, &x_mean);
    let yc = centred(y, &y_mean);

    let mut gram = xc.transpose() * &xc;
    for i in 0..d {
        gram[(i, i)] += lambda;
    }
    let llt = gram
        .llt(Side::Lower)
        .map_err(|e| Error::SingularSystem(format!("normal equations not positive definite: {e:?}")))?;
    let diag: Vec<f64> = (0..d).map(|i| llt.L()[(i, i)]).collect();
    let hi = diag.iter().copied().fold(0.0, f64::max);
    let lo = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if lambda == 0.0 && lo * lo <= 1e-14 * hi * hi {
        return Err(Error::SingularSystem("centred Gram matrix is rank-deficient".into()));
    }
    let mut w = xc.transpose() * &yc;
    llt.solve_in_place(&mut w);
    super::clear_upper_registers();

    let mut matrix = Vec::with_capacity(m * d);
    for i in 0..m {
        matrix.extend((0..d).map(|j| w[(j, i)]));
    }
    let bias = (0..m)
        .map(|i| y_mean[i] - (0..d).map(|j| w[(j, i)] * x_mean[j]).sum::<f64>())
        .collect();
    LinearMap::new(m, d, matrix, bias)
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

    fn residual(map: &LinearMap, x: MatRef<'_, f64>, y: MatRef<'_, f64>) -> f64 {
        let p = map.apply_rows(x).unwrap();
        let mut s = 0.0;
        for i in 0..y.nrows() {
            for j in 0..y.ncols() {
                s += (p[(i, j)] - y[(i, j)]).powi(2);
            }
        }
        s
    }

    #[test]
    fn square_interpolation() {
        // d + 1 samples determine A and b exactly.
        let x = random(6, 5, 1);
        let y = random(6, 2, 2);
        let map = solve_ridge(x.as_ref(), y.as_ref(), 0.0).unwrap();
        assert!(residual(&map, x.as_ref(), y.as_ref()) < 1e-16);
    }

    #[test]
    fn shrinkage_limit() {
        let x = random(30, 4, 3);
        let y = random(30, 3, 4);
        let free = solve_ridge(x.as_ref(), y.as_ref(), 0.0).unwrap();
        let shrunk = solve_ridge(x.as_ref(), y.as_ref(), 1e12).unwrap();
        assert!(shrunk.frobenius_norm() <= 1e-6 * free.frobenius_norm());
        let means = column_means(y.as_ref());
        for (b, m) in shrunk.bias().iter().zip(&means) {
            assert!((b - m).abs() < 1e-9);
        }
    }

    #[test]
    fn singular_without_regularization() {
        let x = random(5, 8, 5);
        let y = random(5, 1, 6);
        assert!(matches!(
            solve_ridge(x.as_ref(), y.as_ref(), 0.0),
            Err(Error::SingularSystem(_))
        ));
        assert!(solve_ridge(x.as_ref(), y.as_ref(), 0.1).is_ok());

        // Duplicated column: rank-deficient even with many samples.
        let base = random(20, 2, 7);
        let x = Mat::from_fn(20, 3, |i, j| base[(i, j.min(1))]);
        let y = random(20, 1, 8);
        assert!(matches!(
            solve_ridge(x.as_ref(), y.as_ref(), 0.0),
            Err(Error::SingularSystem(_))
        ));
    }

    #[test]
    fn rejects_negative_lambda() {
        let x = random(5, 2, 9);
        let y = random(5, 1, 10);
        assert!(matches!(
            solve_ridge(x.as_ref(), y.as_ref(), -1.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn apply_matches_apply_rows() {
        let x = random(7, 3, 11);
        let y = random(7, 2, 12);
        let map = solve_ridge(x.as_ref(), y.as_ref(), 0.5).unwrap();
        let rows = map.apply_rows(x.as_ref()).unwrap();
        for i in 0..7 {
            let v: Vec<f64> = (0..3).map(|j| x[(i, j)]).collect();
            let out = map.apply(&v).unwrap();
            for j in 0..2 {
                assert!((out[j] - rows[(i, j)]).abs() < 1e-12);
            }
        }
    }
}
