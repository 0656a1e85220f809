//! Per-dimension normalization, covariance estimation and symmetric matrix
//! square roots.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::store::VectorSet;

/// Standard deviations below this are raised to it.
pub const STD_FLOOR: f64 = 1e-8;

/// Default lower bound applied to eigenvalues before taking powers.
pub const DEFAULT_EIGEN_FLOOR: f64 = 1e-10;

const SYMMETRY_TOL: f64 = 1e-9;

/// Location, scale and normalized-space covariance of a vector sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainStats {
    pub mean: DVector<f64>,
    pub std: DVector<f64>,
    /// Covariance of the z-normalized sample, plus `lambda * I`.
    pub covariance: DMatrix<f64>,
    pub sample_count: usize,
}

impl DomainStats {
    pub fn dimension(&self) -> usize {
        self.mean.len()
    }
}

/// Rows of `set` as an `n x d` matrix.
pub fn to_matrix(set: &VectorSet) -> DMatrix<f64> {
    let d = set.dimension();
    DMatrix::from_fn(set.len(), d, |i, j| set.vectors()[i].values()[j])
}

/// Fits mean, std (denominator `n - 1`, floored at [`STD_FLOOR`]) and the
/// covariance of the z-normalized sample, regularized as `C + lambda * I`.
pub fn fit_stats(sample: &VectorSet, lambda: f64) -> Result<DomainStats> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!(
            "regularization must be finite and nonnegative, got {lambda}"
        )));
    }
    let n = sample.len();
    if n < 2 {
        return Err(Error::TooFewVectors {
            required: 2,
            actual: n,
        });
    }
    let d = sample.dimension();
    let data = to_matrix(sample);

    let mut mean = DVector::<f64>::zeros(d);
    for row in data.row_iter() {
        for j in 0..d {
            mean[j] += row[j];
        }
    }
    mean /= n as f64;

    let mut std = DVector::<f64>::zeros(d);
    for row in data.row_iter() {
        for j in 0..d {
            let c = row[j] - mean[j];
            std[j] += c * c;
        }
    }
    for j in 0..d {
        std[j] = (std[j] / (n - 1) as f64).sqrt().max(STD_FLOOR);
    }

    let z = DMatrix::from_fn(n, d, |i, j| (data[(i, j)] - mean[j]) / std[j]);
    let mut covariance = z.transpose() * &z / (n - 1) as f64;
    for j in 0..d {
        covariance[(j, j)] += lambda;
    }
    let covariance = symmetrize(&covariance);

    Ok(DomainStats {
        mean,
        std,
        covariance,
        sample_count: n,
    })
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// `(v - mean) / std`, elementwise.
pub fn znorm(v: &[f64], stats: &DomainStats) -> Result<DVector<f64>> {
    check_dim(stats.dimension(), v.len())?;
    Ok(DVector::from_fn(v.len(), |j, _| {
        (v[j] - stats.mean[j]) / stats.std[j]
    }))
}

/// `v * std + mean`, elementwise; inverse of [`znorm`].
pub fn denorm(v: &[f64], stats: &DomainStats) -> Result<DVector<f64>> {
    check_dim(stats.dimension(), v.len())?;
    Ok(DVector::from_fn(v.len(), |j, _| {
        v[j] * stats.std[j] + stats.mean[j]
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exponent {
    /// `M^(1/2)`
    Half,
    /// `M^(-1/2)`
    NegHalf,
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Symmetric eigendecomposition with eigenvalues sorted descending.
pub fn sorted_eigen(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 1000 * n.max(1))
        .ok_or(Error::EigenNotConverged)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// `Q diag(max(l, floor)^p) Q^T` for `m = Q diag(l) Q^T`, `p = +-1/2`.
pub fn sym_power(m: &DMatrix<f64>, exponent: Exponent, eigen_floor: f64) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            actual: m.ncols(),
        });
    }
    let scale = m.amax().max(1.0);
    let asym = max_asymmetry(m);
    if asym > SYMMETRY_TOL * scale || !asym.is_finite() {
        return Err(Error::Asymmetric(asym));
    }
    let eig = SymmetricEigen::try_new(symmetrize(m), f64::EPSILON, 1000 * m.nrows().max(1))
        .ok_or(Error::EigenNotConverged)?;
    let powered = eig.eigenvalues.map(|l| {
        let l = l.max(eigen_floor);
        match exponent {
            Exponent::Half => l.sqrt(),
            Exponent::NegHalf => 1.0 / l.sqrt(),
        }
    });
    let q = &eig.eigenvectors;
    let out = q * DMatrix::from_diagonal(&powered) * q.transpose();
    Ok(symmetrize(&out))
}

/// `||a - b||_F / ||b||_F`.
pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}
