//! Finite-n test statistics `T_n = offset_n + (1/2n)·yᵀWy`.

use faer::Side;

use crate::cgf::{simple_quadratic_coefficient, DetectorFamily, DetectorModel};
use crate::error::{Error, Result};
use crate::finite_sim::matrices;

/// A detector statistic with its `n`-dependent parts precomputed.
#[derive(Debug, Clone)]
pub enum PreparedStatistic {
    SimpleQuadratic {
        n: usize,
        offset: f64,
        b0: f64,
    },
    /// Whitened form `offset + (1/2n) Σ s_i (u_iᵀy)²` with
    /// `Q_n = U diag(s) Uᵀ`.
    Optimal {
        n: usize,
        offset: f64,
        weights: Vec<f64>,
        /// Eigenvectors `u_i`, stored row after row.
        basis: Vec<f64>,
    },
    Banded {
        n: usize,
        offset: f64,
        b: Vec<f64>,
    },
}

impl PreparedStatistic {
    pub fn new(detector: &DetectorModel, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("sample size must be positive".into()));
        }
        let (s2, th2) = (detector.noise.sigma2(), detector.noise.theta2());
        Ok(match &detector.family {
            DetectorFamily::SimpleQuadratic => PreparedStatistic::SimpleQuadratic {
                n,
                offset: 0.5 * (s2 / (s2 + th2)).ln(),
                b0: simple_quadratic_coefficient(&detector.noise),
            },
            DetectorFamily::Optimal => {
                let sigma_s = matrices::signal_covariance(&detector.spectrum, n);
                let evd = sigma_s.selfadjoint_eigendecomposition(Side::Lower);
                let (u, s) = (evd.u(), evd.s().column_vector());
                let lambdas: Vec<f64> = (0..n).map(|i| s.read(i)).collect();
                let offset = lambdas
                    .iter()
                    .map(|l| (s2 / (s2 + th2 * l)).ln())
                    .sum::<f64>()
                    / (2.0 * n as f64);
                let weights = lambdas
                    .iter()
                    .map(|l| th2 * l / (s2 * (s2 + th2 * l)))
                    .collect();
                let mut basis = Vec::with_capacity(n * n);
                for i in 0..n {
                    basis.extend((0..n).map(|r| u.read(r, i)));
                }
                PreparedStatistic::Optimal {
                    n,
                    offset,
                    weights,
                    basis,
                }
            }
            DetectorFamily::Banded(b) => {
                let (_, sigma1) =
                    matrices::toeplitz_covariances(&detector.spectrum, &detector.noise, n)?;
                let l = matrices::cholesky_lower(&sigma1)?;
                let log_det1 = 2.0 * (0..n).map(|i| l.read(i, i).ln()).sum::<f64>();
                PreparedStatistic::Banded {
                    n,
                    offset: 0.5 * (n as f64 * s2.ln() - log_det1) / n as f64,
                    b: b.as_slice().to_vec(),
                }
            }
        })
    }

    pub fn n(&self) -> usize {
        match self {
            PreparedStatistic::SimpleQuadratic { n, .. }
            | PreparedStatistic::Optimal { n, .. }
            | PreparedStatistic::Banded { n, .. } => *n,
        }
    }

    /// The deterministic log-determinant part of the statistic.
    pub fn offset(&self) -> f64 {
        match self {
            PreparedStatistic::SimpleQuadratic { offset, .. }
            | PreparedStatistic::Optimal { offset, .. }
            | PreparedStatistic::Banded { offset, .. } => *offset,
        }
    }

    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        let n = self.n();
        if y.len() != n {
            return Err(Error::Contract(format!(
                "statistic prepared for n = {n}, got a vector of length {}",
                y.len()
            )));
        }
        let scale = 1.0 / (2.0 * n as f64);
        Ok(match self {
            PreparedStatistic::SimpleQuadratic { offset, b0, .. } => {
                offset + scale * b0 * y.iter().map(|v| v * v).sum::<f64>()
            }
            PreparedStatistic::Optimal {
                offset,
                weights,
                basis,
                ..
            } => {
                let quad: f64 = weights
                    .iter()
                    .zip(basis.chunks_exact(n))
                    .map(|(w, u)| {
                        let p: f64 = u.iter().zip(y).map(|(a, b)| a * b).sum();
                        w * p * p
                    })
                    .sum();
                offset + scale * quad
            }
            PreparedStatistic::Banded { offset, b, .. } => {
                offset + scale * banded_quadratic_form(b, y)
            }
        })
    }
}

/// `yᵀQ̃y` for the banded Toeplitz kernel by the running recursion
/// `C_i = C_{i−1} + b₀y_i² + 2 Σ_{l=1}^{m} b_l y_{i−l} y_i`, `O(n·m)`.
pub fn banded_quadratic_form(b: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let mut cross = 0.0;
        for (l, bl) in b.iter().enumerate().skip(1).take(i) {
            cross += bl * y[i - l];
        }
        acc += yi * (b[0] * yi + 2.0 * cross);
    }
    acc
}

/// Normalized statistic of `detector` for one observation vector.
pub fn statistic(detector: &DetectorModel, y: &[f64]) -> Result<f64> {
    PreparedStatistic::new(detector, y.len())?.eval(y)
}
