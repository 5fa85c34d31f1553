//! Finite-n Monte Carlo validation of the analytic exponents.
//!
//! For each sample size the observation vector is drawn as `y = L z` with
//! `Σ_{j,n} = LLᵀ`, the detector statistic is thresholded at zero (ties
//! decide `H₁`), and false-alarm / miss frequencies are tallied. Each trial
//! owns a ChaCha stream keyed by `(seed, n, hypothesis)` and indexed by the
//! trial number, so results do not depend on scheduling.

pub mod matrices;
pub mod statistic;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::cgf::{DetectorModel, Hypothesis};
use crate::error::{Error, Result};
use crate::report::fmt_num;

pub use matrices::toeplitz_covariances;
pub use statistic::{banded_quadratic_form, statistic, PreparedStatistic};

/// Minimum trials per hypothesis.
pub const MIN_TRIALS: usize = 1000;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub detector: DetectorModel,
    pub n_list: Vec<usize>,
    /// Draws per hypothesis and sample size.
    pub trials: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::Domain("n_list must not be empty".into()));
        }
        if self.n_list[0] == 0 || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain(
                "n_list must be positive and strictly increasing".into(),
            ));
        }
        if let Some(&n) = self
            .n_list
            .iter()
            .find(|&&n| n > matrices::COVARIANCE_MAX_N)
        {
            return Err(Error::Resource(format!(
                "simulation capped at n = {}, requested {n}",
                matrices::COVARIANCE_MAX_N
            )));
        }
        if self.trials < MIN_TRIALS {
            return Err(Error::Domain(format!(
                "at least {MIN_TRIALS} trials per hypothesis are required, got {}",
                self.trials
            )));
        }
        Ok(())
    }
}

/// Binomial proportion with a 95% Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proportion {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Proportion {
    pub fn wilson(successes: usize, trials: usize) -> Self {
        let n = trials as f64;
        let p = successes as f64 / n;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        // The interval closes exactly at 0 or 1 when no draw, or every draw, succeeded.
        Self {
            estimate: p,
            lo: if successes == 0 {
                0.0
            } else {
                (center - half).max(0.0)
            },
            hi: if successes == trials {
                1.0
            } else {
                (center + half).min(1.0)
            },
        }
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lo <= p && p <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRow {
    pub n: usize,
    pub alpha: Proportion,
    pub beta: Proportion,
    /// `(α + β)/2`; its interval pools both hypotheses' draws.
    pub pe: Proportion,
}

/// Weighted least-squares slope with a 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEstimate {
    pub trials: usize,
    pub rows: Vec<SimRow>,
    /// Slope of `−log p̂_e` against `n`.
    pub slope: Option<SlopeFit>,
    /// Slope of `−log p̂_e − ½ log n` against `n`, removing the `n^{−1/2}`
    /// prefactor of the error probability.
    pub corrected_slope: Option<SlopeFit>,
    /// True when some sample sizes were dropped from the fit because no
    /// errors were observed.
    pub truncated: bool,
}

impl SimEstimate {
    pub const HEADER: &'static str =
        "n,alpha,alpha_lo,alpha_hi,beta,beta_lo,beta_hi,pe,pe_lo,pe_hi";

    /// Number of leading rows with at least one observed error.
    pub fn usable_prefix(&self) -> usize {
        self.rows.iter().take_while(|r| r.pe.estimate > 0.0).count()
    }

    pub fn csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                let mut fields = vec![r.n.to_string()];
                for p in [&r.alpha, &r.beta, &r.pe] {
                    fields.extend([fmt_num(p.estimate), fmt_num(p.lo), fmt_num(p.hi)]);
                }
                fields.join(",")
            })
            .collect()
    }

    /// Footer line `slope,slope_lo,slope_hi`; `nan` when no fit exists.
    pub fn csv_footer(&self) -> String {
        match self.slope {
            Some(f) => format!("{},{},{}", fmt_num(f.slope), fmt_num(f.lo), fmt_num(f.hi)),
            None => "nan,nan,nan".into(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for row in self.csv_rows() {
            out.push_str(&row);
            out.push('\n');
        }
        out.push_str(&self.csv_footer());
        out.push('\n');
        out
    }
}

fn stream_key(seed: u64, n: usize, hypothesis: Hypothesis) -> u64 {
    // splitmix64 finalizer over the cell coordinates.
    let h = match hypothesis {
        Hypothesis::Null => 0u64,
        Hypothesis::Alternative => 1u64,
    };
    let mut z = seed
        ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ h.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counts trials whose decision is wrong for `hypothesis`.
fn count_errors(
    stat: &PreparedStatistic,
    factor: &Sampler,
    hypothesis: Hypothesis,
    trials: usize,
    key: u64,
) -> Result<usize> {
    let n = stat.n();
    let errors = (0..trials)
        .into_par_iter()
        .map_init(
            || (vec![0.0; n], vec![0.0; n]),
            |(z, y), trial| -> Result<bool> {
                let mut rng = ChaCha8Rng::seed_from_u64(key);
                rng.set_stream(trial as u64);
                z.iter_mut()
                    .for_each(|v| *v = StandardNormal.sample(&mut rng));
                factor.apply(z, y);
                let decide_h1 = stat.eval(y)? >= 0.0;
                Ok(match hypothesis {
                    Hypothesis::Null => decide_h1,
                    Hypothesis::Alternative => !decide_h1,
                })
            },
        )
        .collect::<Result<Vec<bool>>>()?;
    Ok(errors.into_iter().filter(|&e| e).count())
}

enum Sampler {
    Scaled(f64),
    Lower(matrices::PackedLower),
}

impl Sampler {
    fn apply(&self, z: &[f64], y: &mut [f64]) {
        match self {
            Sampler::Scaled(s) => y.iter_mut().zip(z).for_each(|(y, z)| *y = s * z),
            Sampler::Lower(l) => l.mul_into(z, y),
        }
    }
}

pub fn simulate(config: &SimConfig) -> Result<SimEstimate> {
    config.validate()?;
    let det = &config.detector;
    let mut rows = Vec::with_capacity(config.n_list.len());
    for &n in &config.n_list {
        let stat = PreparedStatistic::new(det, n)?;
        let (_, sigma1) = matrices::toeplitz_covariances(&det.spectrum, &det.noise, n)?;
        let h0 = Sampler::Scaled(det.noise.sigma2().sqrt());
        let h1 = Sampler::Lower(matrices::PackedLower::from_mat(&matrices::cholesky_lower(
            &sigma1,
        )?));
        let false_alarms = count_errors(
            &stat,
            &h0,
            Hypothesis::Null,
            config.trials,
            stream_key(config.seed, n, Hypothesis::Null),
        )?;
        let misses = count_errors(
            &stat,
            &h1,
            Hypothesis::Alternative,
            config.trials,
            stream_key(config.seed, n, Hypothesis::Alternative),
        )?;
        rows.push(SimRow {
            n,
            alpha: Proportion::wilson(false_alarms, config.trials),
            beta: Proportion::wilson(misses, config.trials),
            pe: Proportion::wilson(false_alarms + misses, 2 * config.trials),
        });
    }
    let mut est = SimEstimate {
        trials: config.trials,
        rows,
        slope: None,
        corrected_slope: None,
        truncated: false,
    };
    let usable = est.usable_prefix();
    est.truncated = usable < est.rows.len();
    let fit_rows = &est.rows[..usable];
    est.slope = fit_decay_slope(fit_rows, 2 * config.trials, |_| 0.0);
    est.corrected_slope = fit_decay_slope(fit_rows, 2 * config.trials, |n| 0.5 * (n as f64).ln());
    Ok(est)
}

/// Weighted least squares of `−log p̂_e − shift(n)` on `n`. Weights are the
/// delta-method inverse variances `pooled·p̂/(1 − p̂)` of `log p̂_e`.
fn fit_decay_slope(
    rows: &[SimRow],
    pooled: usize,
    shift: impl Fn(usize) -> f64,
) -> Option<SlopeFit> {
    let pts: Vec<(f64, f64, f64)> = rows
        .iter()
        .filter(|r| r.pe.estimate > 0.0 && r.pe.estimate < 1.0)
        .map(|r| {
            let p = r.pe.estimate;
            (
                r.n as f64,
                -p.ln() - shift(r.n),
                pooled as f64 * p / (1.0 - p),
            )
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let xbar = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let ybar = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - xbar).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - xbar) * (p.1 - ybar)).sum();
    let slope = sxy / sxx;
    let se = (1.0 / sxx).sqrt();
    Some(SlopeFit {
        slope,
        lo: slope - Z95 * se,
        hi: slope + Z95 * se,
        points: pts.len(),
    })
}
