//! Limiting cumulant generating functions of the detector statistics.
//!
//! Every detector statistic in this crate has the form
//! `T_n = offset_n + (1/2n)·yᵀWy` with `W` a symmetric matrix. Under
//! hypothesis `j` the limit `Λ_j(t) = lim (1/n) log E_j[exp(n t T_n)]` is
//!
//! ```text
//! Λ_j(t) = c·t − (1/4π) ∫₀^{2π} log(1 − t·h_j(ω)) dω
//! ```
//!
//! where `c` is the limiting offset and `h_j` is the symbol of `W·Σ_{j,n}`.
//! [`LimitingCgf`] stores `c` and `h_j` sampled on the spectrum's quadrature
//! grid. The finite-n counterpart is [`FiniteCgf`], built from exact
//! eigenvalues.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::finite_sim::matrices;
use crate::quadrature::Quadrature;
use crate::spectra::{NoiseModel, Spectrum};

/// Evaluations closer than this to the domain boundary return `+∞`.
pub const BOUNDARY_GUARD: f64 = 1e-9;

/// Largest `n` accepted by [`finite_cgf`].
pub const FINITE_CGF_MAX_N: usize = 8192;

/// A convex cumulant generating function finite on `(−∞, t_sup)`.
///
/// `eval` returns `f64::INFINITY` outside the domain.
pub trait Cgf: Sync {
    fn eval(&self, t: f64) -> f64;
    fn t_sup(&self) -> f64;

    /// Closed-form `Λ'(t)` when the implementation has one.
    fn exact_derivative(&self, _t: f64) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    /// `H₀`: noise only.
    Null,
    /// `H₁`: signal plus noise.
    Alternative,
}

/// Banded-quadratic coefficients `b₀..b_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandCoefficients(Vec<f64>);

impl BandCoefficients {
    pub fn new(b: Vec<f64>) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::Domain("banded detector needs at least b₀".into()));
        }
        if let Some(x) = b.iter().find(|x| !x.is_finite()) {
            return Err(Error::Domain(format!(
                "banded coefficient {x} is not finite"
            )));
        }
        Ok(Self(b))
    }

    /// Bandwidth parameter `m` (the matrix has `2m + 1` diagonals).
    pub fn m(&self) -> usize {
        self.0.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn symbol(&self, omega: f64) -> f64 {
        g_m(&self.0, omega)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.iter().map(|b| b * c).collect())
    }
}

/// `g_m(ω) = b₀ + 2 Σ_{l=1}^{m} b_l cos(lω)`.
pub fn g_m(b: &[f64], omega: f64) -> f64 {
    b.iter()
        .enumerate()
        .skip(1)
        .map(|(l, bl)| 2.0 * bl * (l as f64 * omega).cos())
        .sum::<f64>()
        + b.first().copied().unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub enum DetectorFamily {
    Optimal,
    SimpleQuadratic,
    Banded(BandCoefficients),
}

impl DetectorFamily {
    pub fn name(&self) -> &'static str {
        match self {
            DetectorFamily::Optimal => "optimal",
            DetectorFamily::SimpleQuadratic => "simple_quadratic",
            DetectorFamily::Banded(_) => "banded",
        }
    }
}

/// A detector family together with the signal model it is run against.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    pub family: DetectorFamily,
    pub noise: NoiseModel,
    pub spectrum: Spectrum,
}

impl DetectorModel {
    pub fn new(family: DetectorFamily, noise: NoiseModel, spectrum: Spectrum) -> Self {
        Self {
            family,
            noise,
            spectrum,
        }
    }

    pub fn optimal(noise: NoiseModel, spectrum: Spectrum) -> Self {
        Self::new(DetectorFamily::Optimal, noise, spectrum)
    }

    pub fn simple_quadratic(noise: NoiseModel, spectrum: Spectrum) -> Self {
        Self::new(DetectorFamily::SimpleQuadratic, noise, spectrum)
    }

    pub fn banded(noise: NoiseModel, spectrum: Spectrum, b: BandCoefficients) -> Self {
        Self::new(DetectorFamily::Banded(b), noise, spectrum)
    }

    pub fn cgf(&self) -> Result<CgfPair> {
        match &self.family {
            DetectorFamily::Optimal => Ok(cgf_optimal(&self.noise, &self.spectrum)),
            DetectorFamily::SimpleQuadratic => {
                Ok(cgf_simple_quadratic(&self.noise, &self.spectrum))
            }
            DetectorFamily::Banded(b) => cgf_banded(&self.noise, &self.spectrum, b),
        }
    }
}

/// The simple-quadratic coefficient `θ²/(σ²(σ² + θ²))`.
pub fn simple_quadratic_coefficient(noise: &NoiseModel) -> f64 {
    let (s2, th2) = (noise.sigma2(), noise.theta2());
    th2 / (s2 * (s2 + th2))
}

/// `c·t − ½·mean_k log(1 − t·h_k)` on a quadrature grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitingCgf {
    slope: f64,
    symbol: Arc<[f64]>,
    t_sup: f64,
}

impl LimitingCgf {
    pub(crate) fn new(slope: f64, symbol: Vec<f64>, t_sup: f64) -> Self {
        Self {
            slope,
            symbol: symbol.into(),
            t_sup,
        }
    }

    /// The limiting offset `c`, the coefficient of `t`.
    pub fn offset(&self) -> f64 {
        self.slope
    }

    /// Samples of the symbol `h(ω)` on the half quadrature grid.
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    /// Closed-form derivative `c + ½·mean(h/(1 − t·h))`.
    ///
    /// The exponent optimizer works from finite differences; this is the
    /// stationarity residual used to check its output.
    pub fn derivative(&self, t: f64) -> f64 {
        if t >= self.guarded_sup() {
            return f64::INFINITY;
        }
        let s = self.symbol.iter().map(|h| h / (1.0 - t * h)).sum::<f64>();
        self.slope + 0.5 * s / self.symbol.len() as f64
    }

    fn guarded_sup(&self) -> f64 {
        if self.t_sup.is_finite() {
            self.t_sup - BOUNDARY_GUARD * self.t_sup.abs().max(1.0)
        } else {
            f64::INFINITY
        }
    }
}

impl Cgf for LimitingCgf {
    fn eval(&self, t: f64) -> f64 {
        if t.is_nan() || t >= self.guarded_sup() {
            return f64::INFINITY;
        }
        if t == 0.0 {
            return 0.0;
        }
        match sum_log_one_minus(&self.symbol, t) {
            Some(acc) => t * self.slope - 0.5 * acc / self.symbol.len() as f64,
            None => f64::INFINITY,
        }
    }

    fn t_sup(&self) -> f64 {
        self.t_sup
    }

    fn exact_derivative(&self, t: f64) -> Option<f64> {
        Some(self.derivative(t))
    }
}

/// `Λ₀`, `Λ₁` of one detector.
#[derive(Debug, Clone, PartialEq)]
pub struct CgfPair {
    pub lambda0: LimitingCgf,
    pub lambda1: LimitingCgf,
}

impl CgfPair {
    pub fn t0_sup(&self) -> f64 {
        self.lambda0.t_sup
    }

    pub fn t1_sup(&self) -> f64 {
        self.lambda1.t_sup
    }

    pub fn get(&self, hypothesis: Hypothesis) -> &LimitingCgf {
        match hypothesis {
            Hypothesis::Null => &self.lambda0,
            Hypothesis::Alternative => &self.lambda1,
        }
    }
}

/// Terms multiplied together before one logarithm is taken.
const LOG_CHUNK: usize = 8;

/// `Σ log(1 − t·h_k)`, or `None` if some argument is not positive.
///
/// Logarithms are taken of products of [`LOG_CHUNK`] arguments and the chunk
/// logarithms are summed with Kahan compensation, so the rounding error stays
/// near machine precision rather than growing with the grid size.
fn sum_log_one_minus(h: &[f64], t: f64) -> Option<f64> {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    let mut add = |x: f64| {
        let y = x - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;
    };
    for chunk in h.chunks(LOG_CHUNK) {
        let mut prod = 1.0;
        let mut min_arg = f64::INFINITY;
        for hk in chunk {
            let arg = 1.0 - t * hk;
            min_arg = min_arg.min(arg);
            prod *= arg;
        }
        if !(min_arg > 0.0) {
            return None;
        }
        if prod.is_normal() {
            add(prod.ln());
        } else {
            // Product left the normal range.
            for hk in chunk {
                add((1.0 - t * hk).ln());
            }
        }
    }
    Some(sum)
}

fn reciprocal(x: f64) -> f64 {
    if x > 0.0 {
        1.0 / x
    } else {
        f64::INFINITY
    }
}

/// `½·mean log(σ²/(σ² + θ² f_s))`, the limiting log-determinant offset.
pub(crate) fn log_det_offset(noise: &NoiseModel, spectrum: &Spectrum) -> f64 {
    let (s2, th2) = (noise.sigma2(), noise.theta2());
    let q = spectrum.quadrature();
    0.5 * q.mean_of_values(spectrum.grid_values(), |f| (s2 / (s2 + th2 * f)).ln())
}

pub fn cgf_simple_quadratic(noise: &NoiseModel, spectrum: &Spectrum) -> CgfPair {
    let (s2, th2) = (noise.sigma2(), noise.theta2());
    let (_, sup) = spectrum.bounds();
    let slope = 0.5 * (s2 / (s2 + th2)).ln();
    let r = th2 / (s2 + th2);
    let h0 = vec![r; spectrum.grid_values().len()];
    let h1 = spectrum
        .grid_values()
        .iter()
        .map(|f| th2 * (s2 + th2 * f) / (s2 * (s2 + th2)))
        .collect();
    CgfPair {
        lambda0: LimitingCgf::new(slope, h0, reciprocal(th2) * (s2 + th2)),
        lambda1: LimitingCgf::new(
            slope,
            h1,
            reciprocal(th2 * (s2 + th2 * sup)) * s2 * (s2 + th2),
        ),
    }
}

pub fn cgf_optimal(noise: &NoiseModel, spectrum: &Spectrum) -> CgfPair {
    let (s2, th2) = (noise.sigma2(), noise.theta2());
    let (_, sup) = spectrum.bounds();
    let slope = log_det_offset(noise, spectrum);
    let f = spectrum.grid_values();
    let h0 = f.iter().map(|f| th2 * f / (s2 + th2 * f)).collect();
    let h1 = f.iter().map(|f| th2 * f / s2).collect();
    CgfPair {
        lambda0: LimitingCgf::new(slope, h0, reciprocal(th2 * sup) * (s2 + th2 * sup)),
        lambda1: LimitingCgf::new(slope, h1, reciprocal(th2 * sup) * s2),
    }
}

pub fn cgf_banded(
    noise: &NoiseModel,
    spectrum: &Spectrum,
    b: &BandCoefficients,
) -> Result<CgfPair> {
    let ctx = BandedContext::new(noise, spectrum, b.m());
    let symbol = ctx.symbol(b.as_slice())?;
    Ok(ctx.cgf(&symbol))
}

/// Grid quantities shared by every banded coefficient vector for one
/// `(noise, spectrum)` pair.
#[derive(Debug, Clone)]
pub(crate) struct BandedContext {
    sigma2: f64,
    offset: f64,
    /// `σ² + θ² f_s` on the quadrature nodes.
    observed: Vec<f64>,
    /// `σ² + θ² f_s` on the closed grid.
    observed_closed: Vec<f64>,
    /// `cos(lω)` for `l = 1..=m`, quadrature nodes then closed grid.
    cos_nodes: Vec<Vec<f64>>,
    cos_closed: Vec<Vec<f64>>,
}

/// `g_m` sampled on both grids.
#[derive(Debug, Clone)]
pub(crate) struct BandedSymbol {
    pub nodes: Vec<f64>,
    pub closed: Vec<f64>,
}

impl BandedContext {
    pub(crate) fn new(noise: &NoiseModel, spectrum: &Spectrum, m: usize) -> Self {
        let (s2, th2) = (noise.sigma2(), noise.theta2());
        let q: &Quadrature = spectrum.quadrature();
        let closed = q.closed_nodes();
        let observed = spectrum
            .grid_values()
            .iter()
            .map(|f| s2 + th2 * f)
            .collect();
        let observed_closed = closed
            .iter()
            .map(|&w| s2 + th2 * spectrum.eval(w).expect("closed grid lies in [0, π]"))
            .collect();
        let cos_nodes = (1..=m)
            .map(|l| q.nodes().iter().map(|w| (l as f64 * w).cos()).collect())
            .collect();
        let cos_closed = (1..=m)
            .map(|l| closed.iter().map(|w| (l as f64 * w).cos()).collect())
            .collect();
        Self {
            sigma2: s2,
            offset: log_det_offset(noise, spectrum),
            observed,
            observed_closed,
            cos_nodes,
            cos_closed,
        }
    }

    pub(crate) fn m(&self) -> usize {
        self.cos_nodes.len()
    }

    /// Samples `g_m` and checks positivity on both grids.
    pub(crate) fn symbol(&self, b: &[f64]) -> Result<BandedSymbol> {
        let sym = self.symbol_unchecked(b)?;
        let min = sym
            .nodes
            .iter()
            .chain(sym.closed.iter())
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min <= 0.0 {
            return Err(Error::Contract(format!(
                "banded symbol g_m is not positive on the grid (min {min:e})"
            )));
        }
        Ok(sym)
    }

    pub(crate) fn symbol_unchecked(&self, b: &[f64]) -> Result<BandedSymbol> {
        if b.len() != self.m() + 1 {
            return Err(Error::Contract(format!(
                "expected {} banded coefficients, got {}",
                self.m() + 1,
                b.len()
            )));
        }
        let eval = |cos: &[Vec<f64>], len: usize| -> Vec<f64> {
            let mut g = vec![b[0]; len];
            for (l, table) in cos.iter().enumerate() {
                let c = 2.0 * b[l + 1];
                if c != 0.0 {
                    g.iter_mut().zip(table).for_each(|(g, cos)| *g += c * cos);
                }
            }
            g
        };
        Ok(BandedSymbol {
            nodes: eval(&self.cos_nodes, self.observed.len()),
            closed: eval(&self.cos_closed, self.observed_closed.len()),
        })
    }

    /// Limits `(T̄₀, T̄₁)` of the banded statistic.
    pub(crate) fn limits(&self, sym: &BandedSymbol) -> (f64, f64) {
        let n = sym.nodes.len() as f64;
        let g_mean = sym.nodes.iter().sum::<f64>() / n;
        let weighted = sym
            .nodes
            .iter()
            .zip(&self.observed)
            .map(|(g, o)| g * o)
            .sum::<f64>()
            / n;
        (
            self.offset + 0.5 * self.sigma2 * g_mean,
            self.offset + 0.5 * weighted,
        )
    }

    pub(crate) fn cgf(&self, sym: &BandedSymbol) -> CgfPair {
        let h0: Vec<f64> = sym.nodes.iter().map(|g| self.sigma2 * g).collect();
        let h1: Vec<f64> = sym
            .nodes
            .iter()
            .zip(&self.observed)
            .map(|(g, o)| g * o)
            .collect();
        let max_of = |grid: &[f64], closed: f64| grid.iter().cloned().fold(closed, f64::max);
        let sup0 = max_of(
            &h0,
            sym.closed
                .iter()
                .map(|g| self.sigma2 * g)
                .fold(f64::NEG_INFINITY, f64::max),
        );
        let sup1 = max_of(
            &h1,
            sym.closed
                .iter()
                .zip(&self.observed_closed)
                .map(|(g, o)| g * o)
                .fold(f64::NEG_INFINITY, f64::max),
        );
        CgfPair {
            lambda0: LimitingCgf::new(self.offset, h0, reciprocal(sup0)),
            lambda1: LimitingCgf::new(self.offset, h1, reciprocal(sup1)),
        }
    }
}

/// Exact finite-n CGF `(1/n) log E_j[exp(n t T_n)]` from the eigenvalues
/// `μ_i` of `W·Σ_{j,n}`:
///
/// ```text
/// t·offset_n − (1/2n) Σ log(1 − t μ_i)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteCgf {
    offset: f64,
    eigenvalues: Vec<f64>,
    t_sup: f64,
}

impl FiniteCgf {
    pub fn new(offset: f64, eigenvalues: Vec<f64>) -> Self {
        let max = eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        Self {
            offset,
            eigenvalues,
            t_sup: reciprocal(max),
        }
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
}

impl Cgf for FiniteCgf {
    fn eval(&self, t: f64) -> f64 {
        if t.is_nan() {
            return f64::INFINITY;
        }
        let mut acc = 0.0;
        for mu in &self.eigenvalues {
            let arg = 1.0 - t * mu;
            if arg <= 0.0 {
                return f64::INFINITY;
            }
            acc += arg.ln();
        }
        t * self.offset - 0.5 * acc / self.eigenvalues.len() as f64
    }

    fn t_sup(&self) -> f64 {
        self.t_sup
    }

    fn exact_derivative(&self, t: f64) -> Option<f64> {
        if t >= self.t_sup {
            return Some(f64::INFINITY);
        }
        let s = self
            .eigenvalues
            .iter()
            .map(|mu| mu / (1.0 - t * mu))
            .sum::<f64>();
        Some(self.offset + 0.5 * s / self.eigenvalues.len() as f64)
    }
}

/// Finite-n CGFs of one detector under both hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteCgfPair {
    pub lambda0: FiniteCgf,
    pub lambda1: FiniteCgf,
}

impl FiniteCgfPair {
    pub fn new(detector: &DetectorModel, n: usize) -> Result<Self> {
        check_finite_n(n)?;
        let signal =
            matrices::symmetric_eigenvalues(&matrices::signal_covariance(&detector.spectrum, n));
        Self::with_signal_eigenvalues(detector, &signal)
    }

    /// Builds the pair from precomputed eigenvalues of `Σ_{s,n}`, so several
    /// detectors can share one eigensolve.
    pub fn with_signal_eigenvalues(detector: &DetectorModel, signal: &[f64]) -> Result<Self> {
        let n = signal.len();
        check_finite_n(n)?;
        let (s2, th2) = (detector.noise.sigma2(), detector.noise.theta2());
        let log_det = signal
            .iter()
            .map(|l| (s2 / (s2 + th2 * l)).ln())
            .sum::<f64>()
            / (2.0 * n as f64);
        let pair = match &detector.family {
            DetectorFamily::SimpleQuadratic => {
                let b0 = simple_quadratic_coefficient(&detector.noise);
                let offset = 0.5 * (s2 / (s2 + th2)).ln();
                FiniteCgfPair {
                    lambda0: FiniteCgf::new(offset, vec![b0 * s2; n]),
                    lambda1: FiniteCgf::new(
                        offset,
                        signal.iter().map(|l| b0 * (s2 + th2 * l)).collect(),
                    ),
                }
            }
            DetectorFamily::Optimal => {
                // Q_n and Σ_{s,n} share eigenvectors.
                FiniteCgfPair {
                    lambda0: FiniteCgf::new(
                        log_det,
                        signal.iter().map(|l| th2 * l / (s2 + th2 * l)).collect(),
                    ),
                    lambda1: FiniteCgf::new(log_det, signal.iter().map(|l| th2 * l / s2).collect()),
                }
            }
            DetectorFamily::Banded(b) => {
                let q = matrices::banded_toeplitz(b.as_slice(), n);
                let eig0 = matrices::banded_toeplitz_eigenvalues(b.as_slice(), n)
                    .unwrap_or_else(|| matrices::symmetric_eigenvalues(&q))
                    .into_iter()
                    .map(|x| s2 * x)
                    .collect();
                let (_, sigma1) =
                    matrices::toeplitz_covariances(&detector.spectrum, &detector.noise, n)?;
                let eig1 = matrices::congruence_eigenvalues(&q, &sigma1)?;
                FiniteCgfPair {
                    lambda0: FiniteCgf::new(log_det, eig0),
                    lambda1: FiniteCgf::new(log_det, eig1),
                }
            }
        };
        Ok(pair)
    }

    pub fn get(&self, hypothesis: Hypothesis) -> &FiniteCgf {
        match hypothesis {
            Hypothesis::Null => &self.lambda0,
            Hypothesis::Alternative => &self.lambda1,
        }
    }
}

fn check_finite_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("sample size must be positive".into()));
    }
    if n > FINITE_CGF_MAX_N {
        return Err(Error::Resource(format!(
            "finite-n CGF capped at n = {FINITE_CGF_MAX_N}, requested {n}"
        )));
    }
    Ok(())
}

/// `(1/n) log E_j[exp(n t T_n)]` for the detector's statistic.
/// Returns `+∞` outside the finite-n domain.
pub fn finite_cgf(
    detector: &DetectorModel,
    n: usize,
    t: f64,
    hypothesis: Hypothesis,
) -> Result<f64> {
    Ok(FiniteCgfPair::new(detector, n)?.get(hypothesis).eval(t))
}
