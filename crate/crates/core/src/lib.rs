//! Large-deviation error exponents for detecting a correlated Gaussian
//! signal in white Gaussian noise.
//!
//! Three detectors are covered: the optimal likelihood-ratio test, the
//! simple quadratic (energy) detector and banded quadratic detectors with a
//! Toeplitz kernel of bandwidth `2m + 1`. For each one the crate computes
//! the limiting cumulant generating functions of the normalized statistic,
//! the false-alarm and miss exponents at threshold zero, asymptotic relative
//! efficiencies, grid-searched banded coefficients, and Monte Carlo error
//! rates at finite sample sizes.

pub mod banded_opt;
pub mod cgf;
pub mod error;
pub mod exponent;
pub mod finite_sim;
mod maximize;
pub mod quadrature;
pub mod report;
pub mod spectra;

pub use banded_opt::{
    cell_exponent, feasible, grid_search, limits, BandedResult, BandedSearchConfig,
    CoefficientRange, SearchOutcome,
};
pub use cgf::{
    cgf_banded, cgf_optimal, cgf_simple_quadratic, finite_cgf, g_m, simple_quadratic_coefficient,
    BandCoefficients, Cgf, CgfPair, DetectorFamily, DetectorModel, FiniteCgf, FiniteCgfPair,
    Hypothesis, LimitingCgf,
};
pub use error::{Error, Result};
pub use exponent::{
    are, are_from_reports, are_sweep, exponents, exponents_from_cgf, rate, ExponentReport, Rate,
    SpectrumFamily, SweepRow, SweepSpec,
};
pub use faer::Mat;
pub use finite_sim::{simulate, statistic, toeplitz_covariances, SimConfig, SimEstimate};
pub use quadrature::{Quadrature, DEFAULT_PANELS};
pub use spectra::{NoiseModel, Spectrum, SpectrumKind};
