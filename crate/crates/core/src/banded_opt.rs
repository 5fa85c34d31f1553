//! Grid search for banded-quadratic coefficients.
//!
//! A cell `b = (b₀, …, b_m)` is admissible when its symbol
//! `g_m(ω) = b₀ + 2 Σ b_l cos(lω)` is positive on the frequency grid and the
//! statistic limits straddle the threshold, `T̄₀ < 0 < T̄₁`. Among admissible
//! cells the search maximizes `E = min(E₀, E₁)`, then repeatedly halves
//! the ranges around the incumbent.

use rayon::prelude::*;

use crate::cgf::{BandCoefficients, BandedContext, BandedSymbol};
use crate::error::{Error, Result};
use crate::exponent::{exponents_from_cgf, ExponentReport, FEASIBILITY_MARGIN};
use crate::report::fmt_num;
use crate::spectra::{NoiseModel, Spectrum};

/// Exponents within this distance of the best count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Inclusive linear grid `lo, …, hi` with `steps` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientRange {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl CoefficientRange {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Result<Self> {
        let r = Self { lo, hi, steps };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.hi > self.lo) {
            return Err(Error::Domain(format!(
                "coefficient range needs finite lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if self.steps < 3 {
            return Err(Error::Domain(format!(
                "coefficient range needs at least 3 steps, got {}",
                self.steps
            )));
        }
        Ok(())
    }

    pub fn value(&self, k: usize) -> f64 {
        if k + 1 == self.steps {
            return self.hi;
        }
        self.lo + (self.hi - self.lo) * k as f64 / (self.steps - 1) as f64
    }

    /// Range of half the width centered at `center`, clipped to `bounds`.
    fn halved_around(&self, center: f64, bounds: &CoefficientRange) -> Self {
        let half = 0.25 * (self.hi - self.lo);
        let (mut lo, mut hi) = (center - half, center + half);
        if lo < bounds.lo {
            hi = (hi + bounds.lo - lo).min(bounds.hi);
            lo = bounds.lo;
        }
        if hi > bounds.hi {
            lo = (lo - (hi - bounds.hi)).max(bounds.lo);
            hi = bounds.hi;
        }
        Self {
            lo,
            hi,
            steps: self.steps,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BandedSearchConfig {
    pub m: usize,
    /// One range per coefficient `b₀..b_m`.
    pub ranges: Vec<CoefficientRange>,
    pub refinement_rounds: usize,
    pub noise: NoiseModel,
    pub spectrum: Spectrum,
    /// Extra cells evaluated in the first pass, zero-padded to `m + 1`
    /// coefficients. Seeding with a lower-bandwidth optimum makes the
    /// result monotone in `m`.
    pub seed_cells: Vec<Vec<f64>>,
}

impl BandedSearchConfig {
    pub const DEFAULT_STEPS: usize = 64;
    pub const DEFAULT_ROUNDS: usize = 2;

    /// `b₀ ∈ [0.01, 2]`, `b_l ∈ [−1, 1]`, 64 steps each, 2 refinement rounds.
    pub fn with_defaults(m: usize, noise: NoiseModel, spectrum: Spectrum) -> Self {
        let mut ranges = vec![CoefficientRange {
            lo: 0.01,
            hi: 2.0,
            steps: Self::DEFAULT_STEPS,
        }];
        ranges.extend((0..m).map(|_| CoefficientRange {
            lo: -1.0,
            hi: 1.0,
            steps: Self::DEFAULT_STEPS,
        }));
        Self {
            m,
            ranges,
            refinement_rounds: Self::DEFAULT_ROUNDS,
            noise,
            spectrum,
            seed_cells: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ranges.len() != self.m + 1 {
            return Err(Error::Domain(format!(
                "bandwidth {} needs {} coefficient ranges, got {}",
                self.m,
                self.m + 1,
                self.ranges.len()
            )));
        }
        for r in &self.ranges {
            r.validate()?;
        }
        if let Some(seed) = self.seed_cells.iter().find(|s| s.len() > self.m + 1) {
            return Err(Error::Domain(format!(
                "seed cell has {} coefficients, bandwidth {} allows {}",
                seed.len(),
                self.m,
                self.m + 1
            )));
        }
        Ok(())
    }

    /// Cells in one pass of the grid.
    pub fn cells_per_pass(&self) -> usize {
        self.ranges.iter().map(|r| r.steps).product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandedResult {
    pub b_star: BandCoefficients,
    pub exponent_report: ExponentReport,
    pub cells_evaluated: usize,
    pub cells_feasible: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SearchOutcome {
    Found(BandedResult),
    /// No admissible cell was found.
    NoSolution {
        cells_evaluated: usize,
    },
}

impl SearchOutcome {
    pub fn found(&self) -> Option<&BandedResult> {
        match self {
            SearchOutcome::Found(r) => Some(r),
            SearchOutcome::NoSolution { .. } => None,
        }
    }

    pub fn cells_evaluated(&self) -> usize {
        match self {
            SearchOutcome::Found(r) => r.cells_evaluated,
            SearchOutcome::NoSolution { cells_evaluated } => *cells_evaluated,
        }
    }
}

impl BandedResult {
    pub fn csv_header(m: usize) -> String {
        let mut cols = vec!["m".to_string()];
        cols.extend((0..=m).map(|l| format!("b{l}")));
        cols.extend(["E0", "E1", "E", "cells_evaluated", "cells_feasible"].map(String::from));
        cols.join(",")
    }

    /// `m,b0,…,bm,E0,E1,E,cells_evaluated,cells_feasible`.
    pub fn csv_row(&self) -> String {
        let mut fields = vec![self.b_star.m().to_string()];
        fields.extend(self.b_star.as_slice().iter().map(|b| fmt_num(*b)));
        let r = &self.exponent_report;
        fields.extend([fmt_num(r.e0), fmt_num(r.e1), fmt_num(r.e)]);
        fields.extend([
            self.cells_evaluated.to_string(),
            self.cells_feasible.to_string(),
        ]);
        fields.join(",")
    }
}

fn context(noise: &NoiseModel, spectrum: &Spectrum, b: &[f64]) -> Result<BandedContext> {
    if b.is_empty() {
        return Err(Error::Domain(
            "at least one banded coefficient is required".into(),
        ));
    }
    Ok(BandedContext::new(noise, spectrum, b.len() - 1))
}

/// Limits `(T̄₀, T̄₁)` of the banded statistic under `H₀` and `H₁`.
pub fn limits(noise: &NoiseModel, spectrum: &Spectrum, b: &[f64]) -> Result<(f64, f64)> {
    let ctx = context(noise, spectrum, b)?;
    Ok(ctx.limits(&ctx.symbol(b)?))
}

fn straddles(limits: (f64, f64)) -> bool {
    limits.0 < -FEASIBILITY_MARGIN && limits.1 > FEASIBILITY_MARGIN
}

/// True when `g_m > 0` on the grid and `T̄₀ < 0 < T̄₁`.
pub fn feasible(noise: &NoiseModel, spectrum: &Spectrum, b: &[f64]) -> bool {
    limits(noise, spectrum, b).map(straddles).unwrap_or(false)
}

/// Exponent report of an admissible cell.
pub fn cell_exponent(noise: &NoiseModel, spectrum: &Spectrum, b: &[f64]) -> Result<ExponentReport> {
    let ctx = context(noise, spectrum, b)?;
    let sym = ctx.symbol(b)?;
    let lim = ctx.limits(&sym);
    if !straddles(lim) {
        return Err(Error::Contract(format!(
            "banded coefficients are infeasible: limits ({:e}, {:e}) do not straddle 0",
            lim.0, lim.1
        )));
    }
    evaluate_symbol(&ctx, &sym)
}

fn evaluate_symbol(ctx: &BandedContext, sym: &BandedSymbol) -> Result<ExponentReport> {
    let pair = ctx.cgf(sym);
    exponents_from_cgf(&pair.lambda0, &pair.lambda1)
}

/// `Ok(None)` for inadmissible cells.
fn evaluate_cell(ctx: &BandedContext, b: &[f64]) -> Result<Option<ExponentReport>> {
    let sym = ctx.symbol_unchecked(b)?;
    if sym.nodes.iter().chain(&sym.closed).any(|g| *g <= 0.0) {
        return Ok(None);
    }
    if !straddles(ctx.limits(&sym)) {
        return Ok(None);
    }
    evaluate_symbol(ctx, &sym).map(Some)
}

fn grid_cells(ranges: &[CoefficientRange]) -> Vec<Vec<f64>> {
    let total: usize = ranges.iter().map(|r| r.steps).product();
    (0..total)
        .map(|mut idx| {
            let mut b = vec![0.0; ranges.len()];
            for (l, r) in ranges.iter().enumerate().rev() {
                b[l] = r.value(idx % r.steps);
                idx /= r.steps;
            }
            b
        })
        .collect()
}

fn lexicographic_less(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .find(|(x, y)| x != y)
        .is_some_and(|(x, y)| x < y)
}

/// Best candidate: maximal `e`, ties within [`TIE_TOLERANCE`] broken by the
/// lexicographically smallest `b`.
fn select_best(candidates: &[(Vec<f64>, ExponentReport)]) -> Option<&(Vec<f64>, ExponentReport)> {
    let best_e = candidates
        .iter()
        .map(|c| c.1.e)
        .fold(f64::NEG_INFINITY, f64::max);
    candidates
        .iter()
        .filter(|c| c.1.e >= best_e - TIE_TOLERANCE)
        .reduce(|a, b| if lexicographic_less(&b.0, &a.0) { b } else { a })
}

/// Evaluates `cells` in parallel; returns the admissible ones in input order.
fn evaluate_pass(
    ctx: &BandedContext,
    cells: Vec<Vec<f64>>,
) -> Result<Vec<(Vec<f64>, ExponentReport)>> {
    let evaluated: Vec<Option<(Vec<f64>, ExponentReport)>> = cells
        .into_par_iter()
        .map(|b| Ok(evaluate_cell(ctx, &b)?.map(|r| (b, r))))
        .collect::<Result<_>>()?;
    Ok(evaluated.into_iter().flatten().collect())
}

/// Exhaustive grid search followed by `refinement_rounds` of range halving
/// around the incumbent.
pub fn grid_search(config: &BandedSearchConfig) -> Result<SearchOutcome> {
    config.validate()?;
    let ctx = BandedContext::new(&config.noise, &config.spectrum, config.m);
    let width = config.m + 1;

    let mut cells = grid_cells(&config.ranges);
    cells.extend(config.seed_cells.iter().map(|s| {
        let mut b = s.clone();
        b.resize(width, 0.0);
        b
    }));
    let mut evaluated = cells.len();
    let mut admissible = evaluate_pass(&ctx, cells)?;
    let mut feasible_count = admissible.len();
    let Some(first) = select_best(&admissible) else {
        return Ok(SearchOutcome::NoSolution {
            cells_evaluated: evaluated,
        });
    };
    let mut incumbent = first.clone();

    let mut ranges = config.ranges.clone();
    for _ in 0..config.refinement_rounds {
        ranges = ranges
            .iter()
            .zip(&config.ranges)
            .zip(&incumbent.0)
            .map(|((r, bounds), &c)| r.halved_around(c, bounds))
            .collect();
        let cells = grid_cells(&ranges);
        evaluated += cells.len();
        admissible = evaluate_pass(&ctx, cells)?;
        feasible_count += admissible.len();
        admissible.push(incumbent.clone());
        incumbent = select_best(&admissible)
            .cloned()
            .expect("incumbent is admissible");
    }

    let (b, report) = incumbent;
    Ok(SearchOutcome::Found(BandedResult {
        b_star: BandCoefficients::new(b)?,
        exponent_report: report,
        cells_evaluated: evaluated,
        cells_feasible: feasible_count,
    }))
}
