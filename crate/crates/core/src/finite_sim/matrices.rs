//! Dense finite-n matrices: Toeplitz covariances, banded kernels and the
//! eigen/Cholesky factorizations used by the exact oracles and the sampler.
//!
//! Everything here is deliberately plain dense linear algebra.

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::spectra::{NoiseModel, Spectrum};

/// Largest dimension accepted for covariance construction and sampling.
pub const COVARIANCE_MAX_N: usize = 4096;

/// Symmetric Toeplitz matrix with first row `row`.
pub fn symmetric_toeplitz(row: &[f64]) -> Mat<f64> {
    let n = row.len();
    Mat::from_fn(n, n, |i, j| row[i.abs_diff(j)])
}

/// `Σ_{s,n} = [r(i − j)]` from the spectrum's autocorrelation.
pub fn signal_covariance(spectrum: &Spectrum, n: usize) -> Mat<f64> {
    let row: Vec<f64> = (0..n as i64).map(|k| spectrum.autocorrelation(k)).collect();
    symmetric_toeplitz(&row)
}

/// `Σ₀ = σ²I` and `Σ₁ = σ²I + θ²Σ_{s,n}`, both checked positive definite.
pub fn toeplitz_covariances(
    spectrum: &Spectrum,
    noise: &NoiseModel,
    n: usize,
) -> Result<(Mat<f64>, Mat<f64>)> {
    if n == 0 {
        return Err(Error::Domain("sample size must be positive".into()));
    }
    if n > crate::cgf::FINITE_CGF_MAX_N {
        return Err(Error::Resource(format!(
            "covariance dimension {n} exceeds cap"
        )));
    }
    let (s2, th2) = (noise.sigma2(), noise.theta2());
    let row: Vec<f64> = (0..n as i64).map(|k| spectrum.autocorrelation(k)).collect();
    let sigma0 = Mat::from_fn(n, n, |i, j| if i == j { s2 } else { 0.0 });
    let sigma1 = Mat::from_fn(n, n, |i, j| {
        let d = if i == j { s2 } else { 0.0 };
        d + th2 * row[i.abs_diff(j)]
    });
    cholesky_lower(&sigma0)?;
    cholesky_lower(&sigma1)?;
    Ok((sigma0, sigma1))
}

/// Banded symmetric Toeplitz kernel with `b_l` on the `±l` diagonals.
pub fn banded_toeplitz(b: &[f64], n: usize) -> Mat<f64> {
    Mat::from_fn(n, n, |i, j| b.get(i.abs_diff(j)).copied().unwrap_or(0.0))
}

/// Closed-form eigenvalues `b₀ + 2b₁cos(kπ/(n+1))`, `k = 1..n`, of a
/// tridiagonal Toeplitz kernel; `None` for wider bands.
pub fn banded_toeplitz_eigenvalues(b: &[f64], n: usize) -> Option<Vec<f64>> {
    let (b0, b1) = match b {
        [b0] => (*b0, 0.0),
        [b0, b1] => (*b0, *b1),
        _ => return None,
    };
    let mut eig: Vec<f64> = (1..=n)
        .map(|k| b0 + 2.0 * b1 * (k as f64 * std::f64::consts::PI / (n + 1) as f64).cos())
        .collect();
    eig.sort_by(f64::total_cmp);
    Some(eig)
}

pub fn symmetric_eigenvalues(mat: &Mat<f64>) -> Vec<f64> {
    let mut eig = mat.selfadjoint_eigenvalues(Side::Lower);
    eig.sort_by(f64::total_cmp);
    eig
}

/// Lower Cholesky factor `L` with `A = LLᵀ`.
pub fn cholesky_lower(mat: &Mat<f64>) -> Result<Mat<f64>> {
    mat.cholesky(Side::Lower)
        .map(|c| c.compute_l())
        .map_err(|_| {
            Error::numerical(
                "Cholesky factorization failed: matrix is not positive definite",
                0.0,
            )
        })
}

/// Eigenvalues of `W·Σ` for symmetric `W` and SPD `Σ`, computed as the
/// eigenvalues of the symmetric congruence `LᵀWL` with `Σ = LLᵀ`.
pub fn congruence_eigenvalues(w: &Mat<f64>, sigma: &Mat<f64>) -> Result<Vec<f64>> {
    let l = cholesky_lower(sigma)?;
    let inner = l.transpose() * w * &l;
    // Symmetrize against rounding before the eigensolve.
    let sym = Mat::from_fn(inner.nrows(), inner.ncols(), |i, j| {
        0.5 * (inner.read(i, j) + inner.read(j, i))
    });
    Ok(symmetric_eigenvalues(&sym))
}

/// Lower-triangular factor stored row-major for fast repeated mat-vecs.
#[derive(Debug, Clone)]
pub(crate) struct PackedLower {
    n: usize,
    data: Vec<f64>,
}

impl PackedLower {
    pub(crate) fn from_mat(l: &Mat<f64>) -> Self {
        let n = l.nrows();
        let mut data = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in 0..=i {
                data.push(l.read(i, j));
            }
        }
        Self { n, data }
    }

    /// `out = L·z`.
    pub(crate) fn mul_into(&self, z: &[f64], out: &mut [f64]) {
        let mut start = 0;
        for i in 0..self.n {
            let row = &self.data[start..start + i + 1];
            out[i] = row.iter().zip(z).map(|(a, b)| a * b).sum();
            start += i + 1;
        }
    }
}
