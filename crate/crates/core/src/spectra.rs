//! Signal power spectral densities.
//!
//! A [`Spectrum`] is a bounded, nonnegative, even spectral density with unit
//! mean power, `(1/2π)∫₀^{2π} f_s(ω) dω = 1`. Four families are supported:
//!
//! * white noise, `f_s ≡ 1`;
//! * Gauss-Markov (AR(1)) with correlation `a^{|k|}` and Poisson-kernel
//!   spectrum `(1 − a²)/(1 − 2a cos ω + a²)`;
//! * triangular correlation `max(0, 1 − |k|/M)` with Fejér-kernel spectrum
//!   `(1/M)(sin(Mω/2)/sin(ω/2))²`;
//! * tabulated samples on a uniform grid over `[0, 2π)`, linearly
//!   interpolated and renormalized to unit power.
//!
//! Spectra are immutable once built. The density sampled on the quadrature
//! nodes is cached so that every integral in the crate shares one grid.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::Quadrature;

const TWO_PI: f64 = 2.0 * PI;

/// Relative asymmetry tolerated in a tabulated spectrum.
const TABLE_SYMMETRY_TOL: f64 = 1e-6;

/// Spacing tolerance for the `omega` column of a spectrum table.
const TABLE_GRID_TOL: f64 = 1e-6;

/// Residual above which the log-mean quadrature is reported as failed.
const LOG_MEAN_RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumKind {
    White,
    GaussMarkov {
        a: f64,
    },
    Triangular {
        m: u32,
    },
    /// Samples at `ω_j = 2πj/K`, already normalized to unit mean.
    Tabulated {
        samples: Arc<[f64]>,
    },
}

/// Signal noise model: noise variance `σ²` and signal power `θ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    sigma2: f64,
    theta2: f64,
}

impl NoiseModel {
    pub fn new(sigma2: f64, theta2: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::Domain(format!(
                "noise variance must be positive, got {sigma2}"
            )));
        }
        if !(theta2.is_finite() && theta2 >= 0.0) {
            return Err(Error::Domain(format!(
                "signal power must be nonnegative, got {theta2}"
            )));
        }
        Ok(Self { sigma2, theta2 })
    }

    /// `θ² = σ²·10^{snr_db/10}`.
    pub fn from_snr_db(snr_db: f64, sigma2: f64) -> Result<Self> {
        if !snr_db.is_finite() {
            return Err(Error::Domain(format!(
                "SNR must be finite, got {snr_db} dB"
            )));
        }
        Self::new(sigma2, sigma2 * 10f64.powf(snr_db / 10.0))
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn theta2(&self) -> f64 {
        self.theta2
    }

    pub fn snr(&self) -> f64 {
        self.theta2 / self.sigma2
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * self.snr().log10()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    kind: SpectrumKind,
    inf: f64,
    sup: f64,
    quadrature: Quadrature,
    values: Arc<[f64]>,
}

impl Spectrum {
    pub fn white() -> Self {
        Self::build(SpectrumKind::White, Quadrature::default())
    }

    pub fn gauss_markov(a: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&a) {
            return Err(Error::Domain(format!(
                "Gauss-Markov correlation must lie in [0, 1), got {a}"
            )));
        }
        Ok(Self::build(
            SpectrumKind::GaussMarkov { a },
            Quadrature::default(),
        ))
    }

    pub fn triangular(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::Domain(
                "triangular correlation length must be positive".into(),
            ));
        }
        Ok(Self::build(
            SpectrumKind::Triangular { m },
            Quadrature::default(),
        ))
    }

    /// Builds a tabulated spectrum from samples at `ω_j = 2πj/K`.
    ///
    /// Samples are rescaled to unit mean power; a warning is logged when the
    /// correction exceeds 1%.
    pub fn tabulated(samples: Vec<f64>) -> Result<Self> {
        let k = samples.len();
        if k < 2 {
            return Err(Error::Domain(
                "a tabulated spectrum needs at least two samples".into(),
            ));
        }
        if let Some(bad) = samples.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::Domain(format!(
                "spectrum samples must be finite and nonnegative, found {bad}"
            )));
        }
        let max = samples.iter().cloned().fold(0.0, f64::max);
        if max <= 0.0 {
            return Err(Error::Domain(
                "spectrum samples are identically zero".into(),
            ));
        }
        for j in 1..k {
            let (x, y) = (samples[j], samples[k - j]);
            if (x - y).abs() > TABLE_SYMMETRY_TOL * max {
                return Err(Error::Domain(format!(
                    "tabulated spectrum is not symmetric: f(ω_{j}) = {x} but f(2π − ω_{j}) = {y}"
                )));
            }
        }
        // Linear interpolation integrates to the trapezoid rule, i.e. the
        // sample mean on a periodic grid.
        let power = samples.iter().sum::<f64>() / k as f64;
        if (power - 1.0).abs() > 0.01 {
            log::warn!("tabulated spectrum has mean power {power:.6}; renormalizing to 1");
        }
        let samples: Arc<[f64]> = samples.iter().map(|s| s / power).collect::<Vec<_>>().into();
        Ok(Self::build(
            SpectrumKind::Tabulated { samples },
            Quadrature::default(),
        ))
    }

    /// Parses a two-column `omega value` table. Blank lines and lines
    /// starting with `#` are skipped. The `omega` column must be the uniform
    /// grid `2πj/K`, `j = 0..K`.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut omegas = Vec::new();
        let mut values = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = idx + 1;
            let mut fields = line.split_whitespace();
            let mut next = |what: &str| -> Result<f64> {
                let tok = fields.next().ok_or_else(|| Error::Parse {
                    line: lineno,
                    message: format!("missing {what} column"),
                })?;
                tok.parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno,
                    message: format!("bad {what} `{tok}`: {e}"),
                })
            };
            let omega = next("omega")?;
            let value = next("value")?;
            if fields.next().is_some() {
                return Err(Error::Parse {
                    line: lineno,
                    message: "expected exactly two columns".into(),
                });
            }
            if !(0.0..TWO_PI).contains(&omega) {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("omega {omega} outside [0, 2π)"),
                });
            }
            if let Some(&prev) = omegas.last() {
                if omega <= prev {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "omega must be strictly increasing".into(),
                    });
                }
            }
            omegas.push(omega);
            values.push(value);
        }
        let k = omegas.len();
        for (j, &w) in omegas.iter().enumerate() {
            let expected = TWO_PI * j as f64 / k as f64;
            if (w - expected).abs() > TABLE_GRID_TOL {
                return Err(Error::Domain(format!(
                    "omega column is not the uniform grid 2πj/{k}: row {j} has {w}, expected {expected}"
                )));
            }
        }
        Self::tabulated(values)
    }

    pub fn load_table(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_table(&text)
    }

    /// Rebuilds the cached grid with a different panel count.
    pub fn with_panels(&self, panels: usize) -> Result<Self> {
        Ok(Self::build(self.kind.clone(), Quadrature::new(panels)?))
    }

    fn build(kind: SpectrumKind, quadrature: Quadrature) -> Self {
        let (inf, sup) = match &kind {
            SpectrumKind::White => (1.0, 1.0),
            SpectrumKind::GaussMarkov { a } => ((1.0 - a) / (1.0 + a), (1.0 + a) / (1.0 - a)),
            SpectrumKind::Triangular { m: 1 } => (1.0, 1.0),
            SpectrumKind::Triangular { m } => (0.0, *m as f64),
            SpectrumKind::Tabulated { samples } => (
                samples.iter().cloned().fold(f64::INFINITY, f64::min),
                samples.iter().cloned().fold(0.0, f64::max),
            ),
        };
        let values = quadrature
            .nodes()
            .iter()
            .map(|&w| density(&kind, w))
            .collect::<Vec<_>>()
            .into();
        Self {
            kind,
            inf,
            sup,
            quadrature,
            values,
        }
    }

    pub fn kind(&self) -> &SpectrumKind {
        &self.kind
    }

    pub fn quadrature(&self) -> &Quadrature {
        &self.quadrature
    }

    /// `f_s` on [`Quadrature::nodes`].
    pub fn grid_values(&self) -> &[f64] {
        &self.values
    }

    /// Evaluates `f_s(ω)` for `ω ∈ [0, 2π)`.
    pub fn eval(&self, omega: f64) -> Result<f64> {
        if !(0.0..TWO_PI).contains(&omega) {
            return Err(Error::Domain(format!("omega {omega} outside [0, 2π)")));
        }
        Ok(density(&self.kind, omega))
    }

    /// Essential infimum and supremum `(m, M)` of the density.
    pub fn bounds(&self) -> (f64, f64) {
        (self.inf, self.sup)
    }

    /// `(1/2π)∫ f_s dω` on the shared grid; 1 up to quadrature error.
    pub fn mean_power(&self) -> f64 {
        self.quadrature.mean(&self.values)
    }

    /// Szegő exponent `(1/2π)∫₀^{2π} log f_s(ω) dω`.
    ///
    /// The midpoint rule on a zero of the density has an `O(1/N)` error
    /// with a pure `1/N` leading term, so one Richardson step on the
    /// `N/2`, `N` pair removes it. The residual is the change between the
    /// extrapolants from `(N/4, N/2)` and `(N/2, N)`.
    pub fn log_mean(&self) -> Result<f64> {
        if matches!(self.kind, SpectrumKind::White) {
            return Ok(0.0);
        }
        let panels = self.quadrature.panels();
        let log_quad = |p: usize| -> Result<f64> {
            let q = Quadrature::new(p)?;
            Ok(q.mean_of(|w| density(&self.kind, w).ln()))
        };
        let full = log_quad(panels)?;
        if !full.is_finite() {
            return Err(Error::numerical(
                "log of the spectrum is not integrable on the grid",
                f64::INFINITY,
            ));
        }
        if panels / 4 < 8 || !(panels / 4).is_multiple_of(2) {
            return Ok(full);
        }
        let half = log_quad(panels / 2)?;
        let quarter = log_quad(panels / 4)?;
        let fine = 2.0 * full - half;
        let coarse = 2.0 * half - quarter;
        let residual = (fine - coarse).abs();
        if !fine.is_finite() || residual > LOG_MEAN_RESIDUAL_TOL {
            return Err(Error::numerical(
                "log-mean quadrature did not converge",
                residual,
            ));
        }
        Ok(fine)
    }

    /// Autocorrelation `E{s_0 s_k}`.
    pub fn autocorrelation(&self, lag: i64) -> f64 {
        let k = lag.unsigned_abs();
        match &self.kind {
            SpectrumKind::White => {
                if k == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            SpectrumKind::GaussMarkov { a } => {
                if k == 0 {
                    1.0
                } else {
                    a.powf(k as f64)
                }
            }
            SpectrumKind::Triangular { m } => (1.0 - k as f64 / *m as f64).max(0.0),
            SpectrumKind::Tabulated { samples } => {
                // Fourier coefficient of the piecewise-linear interpolant:
                // the sample DFT damped by the hat-function factor sinc²(πk/K).
                let n = samples.len();
                let dft = samples
                    .iter()
                    .enumerate()
                    .map(|(j, s)| {
                        s * (TWO_PI * ((j as u64 * k) % n as u64) as f64 / n as f64).cos()
                    })
                    .sum::<f64>()
                    / n as f64;
                let x = PI * k as f64 / n as f64;
                let damping = if k == 0 { 1.0 } else { (x.sin() / x).powi(2) };
                dft * damping
            }
        }
    }
}

fn density(kind: &SpectrumKind, omega: f64) -> f64 {
    match kind {
        SpectrumKind::White => 1.0,
        SpectrumKind::GaussMarkov { a } => (1.0 - a * a) / (1.0 - 2.0 * a * omega.cos() + a * a),
        SpectrumKind::Triangular { m } => fejer(*m, omega),
        SpectrumKind::Tabulated { samples } => {
            let k = samples.len();
            let x = omega / TWO_PI * k as f64;
            let j = (x.floor() as usize).min(k - 1);
            let frac = x - j as f64;
            samples[j] * (1.0 - frac) + samples[(j + 1) % k] * frac
        }
    }
}

fn fejer(m: u32, omega: f64) -> f64 {
    let mf = m as f64;
    let half = (0.5 * omega).sin();
    if half.abs() > 1e-3 {
        let r = (0.5 * mf * omega).sin() / half;
        r * r / mf
    } else {
        // Near the removable singularity use the cosine series
        // 1 + 2 Σ (1 − k/M) cos kω.
        1.0 + 2.0
            * (1..m)
                .map(|k| (1.0 - k as f64 / mf) * (k as f64 * omega).cos())
                .sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn eval_examples() {
        let gm0 = Spectrum::gauss_markov(0.0).unwrap();
        for w in [0.0, 1.0, 3.0, 6.0] {
            assert!(close(gm0.eval(w).unwrap(), 1.0, 1e-15));
        }
        assert!(close(
            Spectrum::gauss_markov(0.5).unwrap().eval(0.0).unwrap(),
            3.0,
            1e-14
        ));
        let tri1 = Spectrum::triangular(1).unwrap();
        for w in [0.0, 0.7, PI, 5.5] {
            assert!(close(tri1.eval(w).unwrap(), 1.0, 1e-14));
        }
        assert_eq!(Spectrum::triangular(4).unwrap().eval(0.0).unwrap(), 4.0);
    }

    #[test]
    fn eval_rejects_out_of_range_omega() {
        let s = Spectrum::white();
        assert!(matches!(s.eval(-0.1), Err(Error::Domain(_))));
        assert!(matches!(s.eval(TWO_PI), Err(Error::Domain(_))));
        assert!(s.eval(f64::NAN).is_err());
    }

    #[test]
    fn fejer_series_and_ratio_agree_near_the_switch() {
        for m in [2, 3, 7] {
            for w in [0.9e-3 * 2.0, 1.1e-3 * 2.0, 0.01] {
                let series = 1.0
                    + 2.0
                        * (1..m)
                            .map(|k| (1.0 - k as f64 / m as f64) * (k as f64 * w).cos())
                            .sum::<f64>();
                assert!(close(fejer(m, w), series, 1e-11), "m={m} w={w}");
            }
        }
    }

    #[test]
    fn bounds_examples() {
        assert_eq!(Spectrum::white().bounds(), (1.0, 1.0));
        let (lo, hi) = Spectrum::gauss_markov(0.5).unwrap().bounds();
        assert!(close(lo, 1.0 / 3.0, 1e-15) && close(hi, 3.0, 1e-15));
        assert_eq!(Spectrum::triangular(2).unwrap().bounds(), (0.0, 2.0));
        assert!(close(
            Spectrum::triangular(2).unwrap().eval(PI).unwrap(),
            0.0,
            1e-15
        ));
    }

    #[test]
    fn log_mean_examples() {
        assert_eq!(Spectrum::white().log_mean().unwrap(), 0.0);
        let gm = Spectrum::gauss_markov(0.5).unwrap().log_mean().unwrap();
        assert!(close(gm, (0.75f64).ln(), 1e-10), "{gm}");
        let tri = Spectrum::triangular(2).unwrap().log_mean().unwrap();
        assert!(close(tri, -(2f64).ln(), 1e-8), "{tri}");
    }

    #[test]
    fn log_mean_matches_jensen_identity_for_gauss_markov() {
        for a in [0.0, 0.3, 0.6, 0.9] {
            let got = Spectrum::gauss_markov(a).unwrap().log_mean().unwrap();
            assert!(close(got, (1.0 - a * a).ln(), 1e-6), "a={a}: {got}");
        }
    }

    #[test]
    fn log_mean_of_fejer_kernels_is_minus_log_m() {
        // f = |1 − e^{iMω}|² / (M |1 − e^{iω}|²) and both numerator and
        // denominator have zero Szegő exponent.
        for m in [2u32, 3, 4, 6, 10] {
            let got = Spectrum::triangular(m).unwrap().log_mean().unwrap();
            assert!(close(got, -(m as f64).ln(), 1e-8), "M={m}: {got}");
        }
    }

    #[test]
    fn log_mean_fails_on_zero_samples() {
        let s = Spectrum::tabulated(vec![2.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(s.log_mean(), Err(Error::Numerical { .. })));
    }

    #[test]
    fn autocorrelation_examples() {
        let gm = Spectrum::gauss_markov(0.5).unwrap();
        assert!(close(gm.autocorrelation(2), 0.25, 1e-15));
        assert!(close(gm.autocorrelation(-2), 0.25, 1e-15));
        let tri = Spectrum::triangular(4).unwrap();
        assert!(close(tri.autocorrelation(1), 0.75, 1e-15));
        assert_eq!(tri.autocorrelation(5), 0.0);
        assert_eq!(Spectrum::white().autocorrelation(0), 1.0);
        assert_eq!(Spectrum::white().autocorrelation(3), 0.0);
        assert_eq!(Spectrum::gauss_markov(0.0).unwrap().autocorrelation(0), 1.0);
    }

    fn all_kinds() -> Vec<Spectrum> {
        let table: Vec<f64> = (0..64)
            .map(|j| {
                let w = TWO_PI * j as f64 / 64.0;
                1.0 + 0.5 * w.cos() + 0.2 * (2.0 * w).cos()
            })
            .collect();
        vec![
            Spectrum::white(),
            Spectrum::gauss_markov(0.3).unwrap(),
            Spectrum::gauss_markov(0.9).unwrap(),
            Spectrum::triangular(1).unwrap(),
            Spectrum::triangular(4).unwrap(),
            Spectrum::triangular(7).unwrap(),
            Spectrum::tabulated(table).unwrap(),
        ]
    }

    #[test]
    fn unit_power_for_every_kind() {
        for s in all_kinds() {
            assert!(close(s.mean_power(), 1.0, 1e-9), "{:?}", s.kind());
            assert!(close(s.autocorrelation(0), 1.0, 1e-12), "{:?}", s.kind());
        }
    }

    #[test]
    fn eval_respects_bounds_and_symmetry_on_dense_grid() {
        for s in all_kinds() {
            let (lo, hi) = s.bounds();
            for i in 0..10_000 {
                let w = TWO_PI * i as f64 / 10_000.0;
                let v = s.eval(w).unwrap();
                assert!(
                    v >= lo - 1e-12 && v <= hi + 1e-12,
                    "{:?} ω={w} f={v}",
                    s.kind()
                );
                if i > 0 {
                    let mirrored = s.eval(TWO_PI - w).unwrap();
                    assert!(close(v, mirrored, 1e-9 * hi), "{:?} ω={w}", s.kind());
                }
            }
        }
    }

    #[test]
    fn autocorrelation_matches_cosine_quadrature() {
        for s in all_kinds() {
            for k in 0..=10i64 {
                let q = s
                    .quadrature()
                    .mean_of(|w| s.eval(w).unwrap() * (k as f64 * w).cos());
                assert!(
                    close(q, s.autocorrelation(k), 1e-8),
                    "{:?} k={k}: quad {q} closed {}",
                    s.kind(),
                    s.autocorrelation(k)
                );
            }
        }
    }

    #[test]
    fn table_parse_round_trip() {
        let k = 16;
        let text: String = (0..k)
            .map(|j| {
                let w = TWO_PI * j as f64 / k as f64;
                format!("{w:.17} {}\n", 2.0 + w.cos())
            })
            .collect();
        let s = Spectrum::parse_table(&format!("# omega value\n{text}")).unwrap();
        // Renormalized from mean power 2.
        assert!(close(s.autocorrelation(0), 1.0, 1e-12));
        // Sample coefficient 1/4, damped by the interpolation factor sinc²(π/16).
        let x = PI / 16.0;
        assert!(close(
            s.autocorrelation(1),
            0.25 * (x.sin() / x).powi(2),
            1e-12
        ));
        assert!(close(s.eval(0.0).unwrap(), 1.5, 1e-12));
        assert_eq!(s.bounds(), (0.5, 1.5));
    }

    #[test]
    fn table_parse_errors() {
        assert!(matches!(
            Spectrum::parse_table("0 1\n0 1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            Spectrum::parse_table("0 1 2\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            Spectrum::parse_table("0 x\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            Spectrum::parse_table("7 1\n"),
            Err(Error::Parse { .. })
        ));
        // Non-uniform grid.
        assert!(matches!(
            Spectrum::parse_table("0 1\n1 1\n"),
            Err(Error::Domain(_))
        ));
        // Asymmetric samples.
        assert!(Spectrum::tabulated(vec![1.0, 2.0, 1.0, 0.5]).is_err());
        assert!(Spectrum::tabulated(vec![1.0, -1.0, 1.0]).is_err());
    }

    #[test]
    fn constructor_domains() {
        assert!(Spectrum::gauss_markov(1.0).is_err());
        assert!(Spectrum::gauss_markov(-0.1).is_err());
        assert!(Spectrum::triangular(0).is_err());
        assert!(NoiseModel::new(0.0, 1.0).is_err());
        assert!(NoiseModel::new(1.0, -1.0).is_err());
        let n = NoiseModel::from_snr_db(10.0, 1.0).unwrap();
        assert!(close(n.theta2(), 10.0, 1e-12));
        assert!(close(n.snr_db(), 10.0, 1e-12));
    }
}
