//! Rate functions, error exponents and asymptotic relative efficiency.
//!
//! With a zero threshold the false-alarm and miss exponents are
//!
//! ```text
//! E₀ = sup_{t ≥ 0} −Λ₀(t),   E₁ = sup_{t ≤ 0} −Λ₁(t),   E = min(E₀, E₁)
//! ```
//!
//! provided the means straddle the threshold, `Λ₀'(0) < 0 < Λ₁'(0)`.
//! Otherwise the error probability decays subexponentially and `E = 0`.

use rayon::prelude::*;

use crate::cgf::{Cgf, DetectorFamily, DetectorModel};
use crate::error::{Error, Result};
use crate::maximize::{central_difference, maximize_concave, Maximum};
use crate::report::{fmt_bool, fmt_num};
use crate::spectra::{NoiseModel, Spectrum};

/// Means within this distance of zero count as zero.
pub const FEASIBILITY_MARGIN: f64 = 1e-12;

/// Largest `|t|` explored when bracketing an unbounded side of the domain.
pub const BRACKET_CAP: f64 = 1e6;

/// Relative distance kept from a finite domain edge by the `E₀` bracket.
const EDGE_FRACTION: f64 = 1e-6;

/// Value of a rate function at one point.
#[derive(Debug, Clone, PartialEq)]
pub enum Rate {
    Finite {
        value: f64,
        t_star: f64,
    },
    /// The supremum diverges; the diagnostic says where bracketing stopped.
    Infinite {
        diagnostic: String,
    },
}

impl Rate {
    /// The rate as a number, `+∞` when divergent.
    pub fn value(&self) -> f64 {
        match self {
            Rate::Finite { value, .. } => *value,
            Rate::Infinite { .. } => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Rate::Finite { .. })
    }
}

/// `Λ'(t)` by central difference.
pub fn cgf_mean<C: Cgf + ?Sized>(cgf: &C, t: f64) -> f64 {
    central_difference(|s| cgf.eval(s), t)
}

/// Doubles `T` from 1 until the objective slope at `dir·T` points back
/// toward the origin, `dir·slope(dir·T) < 0`. Returns `None` past
/// [`BRACKET_CAP`].
fn expand_bracket(slope: impl Fn(f64) -> f64, dir: f64) -> Option<f64> {
    let mut t = 1.0;
    while t <= BRACKET_CAP {
        if dir * slope(dir * t) < 0.0 {
            return Some(t);
        }
        t *= 2.0;
    }
    None
}

fn finite_edge(t_sup: f64) -> f64 {
    t_sup - EDGE_FRACTION * t_sup.abs()
}

/// Legendre–Fenchel transform `I(z) = sup_t [z·t − Λ(t)]`.
pub fn rate<C: Cgf + ?Sized>(cgf: &C, z: f64) -> Result<Rate> {
    if !z.is_finite() {
        return Err(Error::Domain(format!(
            "rate argument must be finite, got {z}"
        )));
    }
    let mean = cgf_mean(cgf, 0.0);
    if (z - mean).abs() <= FEASIBILITY_MARGIN {
        return Ok(Rate::Finite {
            value: 0.0,
            t_star: 0.0,
        });
    }
    let objective = |t: f64| z * t - cgf.eval(t);
    let slope = |t: f64| central_difference(objective, t);
    let (lo, hi) = if z > mean {
        let t_sup = cgf.t_sup();
        if t_sup.is_finite() {
            (0.0, finite_edge(t_sup))
        } else {
            match expand_bracket(slope, 1.0) {
                Some(t) => (0.0, t),
                None => {
                    return Ok(Rate::Infinite {
                        diagnostic: format!("objective still increasing at t = {BRACKET_CAP:e}"),
                    })
                }
            }
        }
    } else {
        match expand_bracket(slope, -1.0) {
            Some(t) => (-t, 0.0),
            None => {
                return Ok(Rate::Infinite {
                    diagnostic: format!("objective still increasing at t = {:e}", -BRACKET_CAP),
                })
            }
        }
    };
    let Maximum { t, value } = maximize_concave(objective, lo, hi)?;
    Ok(Rate::Finite {
        value: value.max(0.0),
        t_star: t,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentReport {
    pub e0: f64,
    pub e1: f64,
    /// `min(e0, e1)` when feasible, else 0.
    pub e: f64,
    pub t0_star: f64,
    pub t1_star: f64,
    pub feasible: bool,
    /// `Λ₀'(0)`.
    pub mean0: f64,
    /// `Λ₁'(0)`.
    pub mean1: f64,
    /// `|Λ₀'(t₀*)|`; zero when `t₀*` was not computed.
    pub residual0: f64,
    /// `|Λ₁'(t₁*)|`; zero when `t₁*` was not computed.
    pub residual1: f64,
}

impl ExponentReport {
    fn degenerate(mean0: f64, mean1: f64) -> Self {
        Self {
            e0: 0.0,
            e1: 0.0,
            e: 0.0,
            t0_star: 0.0,
            t1_star: 0.0,
            feasible: false,
            mean0,
            mean1,
            residual0: 0.0,
            residual1: 0.0,
        }
    }
}

fn residual<C: Cgf + ?Sized>(cgf: &C, t: f64) -> f64 {
    cgf.exact_derivative(t)
        .unwrap_or_else(|| cgf_mean(cgf, t))
        .abs()
}

/// `E₀`, `E₁` and `E` for the CGF pair `(Λ₀, Λ₁)` at threshold zero.
pub fn exponents_from_cgf<C0: Cgf + ?Sized, C1: Cgf + ?Sized>(
    lambda0: &C0,
    lambda1: &C1,
) -> Result<ExponentReport> {
    let mean0 = cgf_mean(lambda0, 0.0);
    let mean1 = cgf_mean(lambda1, 0.0);
    let mut report = ExponentReport::degenerate(mean0, mean1);
    let null_ok = mean0 < -FEASIBILITY_MARGIN;
    let alt_ok = mean1 > FEASIBILITY_MARGIN;
    report.feasible = null_ok && alt_ok;

    if null_ok {
        let f = |t: f64| -lambda0.eval(t);
        let t_sup = lambda0.t_sup();
        let hi = if t_sup.is_finite() {
            finite_edge(t_sup)
        } else {
            expand_bracket(|t| -cgf_mean(lambda0, t), 1.0)
                .ok_or_else(|| bracket_error("E0", mean0))?
        };
        let m = maximize_concave(f, 0.0, hi)?;
        report.e0 = m.value.max(0.0);
        report.t0_star = m.t;
        report.residual0 = residual(lambda0, m.t);
    }
    if alt_ok {
        let f = |t: f64| -lambda1.eval(t);
        let t_lo = expand_bracket(|t| -cgf_mean(lambda1, t), -1.0)
            .ok_or_else(|| bracket_error("E1", mean1))?;
        let m = maximize_concave(f, -t_lo, 0.0)?;
        report.e1 = m.value.max(0.0);
        report.t1_star = m.t;
        report.residual1 = residual(lambda1, m.t);
    }
    report.e = if report.feasible {
        report.e0.min(report.e1)
    } else {
        0.0
    };
    Ok(report)
}

fn bracket_error(which: &str, mean: f64) -> Error {
    Error::numerical(
        format!("{which} bracket did not close within |t| ≤ {BRACKET_CAP:e} (mean {mean:e})"),
        mean,
    )
}

/// Error exponents of a detector at threshold zero. A model without signal
/// (`θ² = 0`) is reported infeasible with `e = 0`.
pub fn exponents(detector: &DetectorModel) -> Result<ExponentReport> {
    let pair = detector.cgf()?;
    if detector.noise.theta2() == 0.0 {
        return Ok(ExponentReport::degenerate(
            cgf_mean(&pair.lambda0, 0.0),
            cgf_mean(&pair.lambda1, 0.0),
        ));
    }
    exponents_from_cgf(&pair.lambda0, &pair.lambda1)
}

/// `E(δ₁)/E(δ₂)`.
pub fn are(detector1: &DetectorModel, detector2: &DetectorModel) -> Result<f64> {
    let r1 = exponents(detector1)?;
    let r2 = exponents(detector2)?;
    are_from_reports(&r1, &r2)
}

pub fn are_from_reports(r1: &ExponentReport, r2: &ExponentReport) -> Result<f64> {
    if !(r2.e > 0.0) {
        return Err(Error::UndefinedAre(format!(
            "reference detector has exponent {} (feasible = {})",
            r2.e, r2.feasible
        )));
    }
    Ok(r1.e / r2.e)
}

/// One-parameter spectrum families swept by [`are_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumFamily {
    /// Parameter is the correlation `a`.
    GaussMarkov,
    /// Parameter is the correlation length `M`, a positive integer.
    Triangular,
}

impl SpectrumFamily {
    pub fn name(&self) -> &'static str {
        match self {
            SpectrumFamily::GaussMarkov => "gauss_markov",
            SpectrumFamily::Triangular => "triangular",
        }
    }

    pub fn spectrum(&self, param: f64, panels: usize) -> Result<Spectrum> {
        let s = match self {
            SpectrumFamily::GaussMarkov => Spectrum::gauss_markov(param)?,
            SpectrumFamily::Triangular => {
                if param.fract() != 0.0 || !(1.0..=u32::MAX as f64).contains(&param) {
                    return Err(Error::Domain(format!(
                        "triangular correlation length must be a positive integer, got {param}"
                    )));
                }
                Spectrum::triangular(param as u32)?
            }
        };
        if panels == s.quadrature().panels() {
            Ok(s)
        } else {
            s.with_panels(panels)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub family1: DetectorFamily,
    pub family2: DetectorFamily,
    pub spectrum: SpectrumFamily,
    pub params: Vec<f64>,
    pub snr_db: Vec<f64>,
    pub sigma2: f64,
    pub panels: usize,
}

/// One `(param, snr)` cell; failures stay in the row.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub param: f64,
    pub snr_db: f64,
    pub report1: Result<ExponentReport>,
    pub report2: Result<ExponentReport>,
    pub are: Result<f64>,
}

impl SweepRow {
    pub const HEADER: &'static str = "param,snr_db,E_detector1,E_detector2,ARE,feasible1,feasible2";

    /// CSV fields; failed cells print `nan` and feasibility `error`.
    pub fn to_csv(&self) -> String {
        let e = |r: &Result<ExponentReport>| r.as_ref().map_or("nan".to_string(), |r| fmt_num(r.e));
        let f = |r: &Result<ExponentReport>| r.as_ref().map_or("error", |r| fmt_bool(r.feasible));
        format!(
            "{},{},{},{},{},{},{}",
            fmt_num(self.param),
            fmt_num(self.snr_db),
            e(&self.report1),
            e(&self.report2),
            self.are.as_ref().map_or("nan".to_string(), |a| fmt_num(*a)),
            f(&self.report1),
            f(&self.report2),
        )
    }
}

fn sweep_cell(spec: &SweepSpec, param: f64, snr_db: f64) -> SweepRow {
    let models = spec
        .spectrum
        .spectrum(param, spec.panels)
        .and_then(|s| Ok((s, NoiseModel::from_snr_db(snr_db, spec.sigma2)?)));
    let (report1, report2) = match models {
        Ok((s, noise)) => (
            exponents(&DetectorModel::new(spec.family1.clone(), noise, s.clone())),
            exponents(&DetectorModel::new(spec.family2.clone(), noise, s)),
        ),
        Err(e) => (Err(e.clone()), Err(e)),
    };
    let are = match (&report1, &report2) {
        (Ok(r1), Ok(r2)) => are_from_reports(r1, r2),
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };
    SweepRow {
        param,
        snr_db,
        report1,
        report2,
        are,
    }
}

/// Evaluates every `(param, snr)` cell, in parallel, and returns rows ordered
/// by `(param, snr)` as given in the grids.
pub fn are_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.params.is_empty() || spec.snr_db.is_empty() {
        return Err(Error::Domain("sweep grids must be nonempty".into()));
    }
    let cells: Vec<(f64, f64)> = spec
        .params
        .iter()
        .flat_map(|&p| spec.snr_db.iter().map(move |&s| (p, s)))
        .collect();
    Ok(cells
        .into_par_iter()
        .map(|(p, s)| sweep_cell(spec, p, s))
        .collect())
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SweepRow::HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    out
}
