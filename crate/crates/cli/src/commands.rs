//! The four subcommands. Each returns the complete CSV text; nothing is
//! written until a command has finished.

use log::{info, warn};

use detexp::exponent::{are_sweep, SweepRow, SweepSpec};
use detexp::report::{fmt_bool, fmt_num};
use detexp::{
    cgf_optimal, cgf_simple_quadratic, exponents, grid_search, simple_quadratic_coefficient,
    simulate, BandedSearchConfig, CoefficientRange, DetectorModel, Error, ExponentReport,
    NoiseModel, SearchOutcome, SimConfig, Spectrum,
};

use crate::config::{Command, ConfigError, RunConfig};

/// ARE that must be reached at the top SNR of a `prop1_check` sweep.
pub const HIGH_SNR_ARE: f64 = 0.95;
pub const HIGH_SNR_DB: f64 = 40.0;

#[derive(Debug)]
pub enum CommandError {
    Config(String),
    Numerical(String),
}

impl From<ConfigError> for CommandError {
    fn from(e: ConfigError) -> Self {
        CommandError::Config(e.0)
    }
}

impl From<Error> for CommandError {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical { .. } | Error::UndefinedAre(_) => {
                CommandError::Numerical(e.to_string())
            }
            _ => CommandError::Config(e.to_string()),
        }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub csv: String,
    /// Set when a requested property check did not hold.
    pub property_failure: Option<String>,
}

impl Outcome {
    fn table(lines: Vec<String>) -> Self {
        let mut csv = lines.join("\n");
        csv.push('\n');
        Self {
            csv,
            property_failure: None,
        }
    }
}

pub fn run(config: &RunConfig) -> Result<Outcome, CommandError> {
    match config.command {
        Command::Exponent => exponent(config),
        Command::AreSweep => sweep(config),
        Command::BandedOptimize => banded(config),
        Command::Simulate => simulation(config),
    }
}

/// `(snr_db, param, noise, spectrum)`.
type Cell = (f64, f64, NoiseModel, Spectrum);

/// Cells ordered by SNR, then parameter.
fn cells(config: &RunConfig) -> Result<Vec<Cell>, CommandError> {
    let spectra = config.spectra()?;
    let mut out = Vec::new();
    for &snr in &config.snr_db {
        let noise = config.noise(snr)?;
        for (param, s) in &spectra {
            out.push((snr, *param, noise, s.clone()));
        }
    }
    Ok(out)
}

fn report_fields(report: &Result<ExponentReport, Error>) -> [String; 4] {
    match report {
        Ok(r) => [
            fmt_num(r.e0),
            fmt_num(r.e1),
            fmt_num(r.e),
            fmt_bool(r.feasible).into(),
        ],
        Err(_) => ["nan".into(), "nan".into(), "nan".into(), "error".into()],
    }
}

fn exponent(config: &RunConfig) -> Result<Outcome, CommandError> {
    let families = config
        .detectors
        .iter()
        .map(|&d| config.detector_family(d))
        .collect::<Result<Vec<_>, _>>()?;
    let mut header = vec!["snr_db".to_string(), "param".to_string()];
    for d in &config.detectors {
        for col in ["E0", "E1", "E", "feasible"] {
            header.push(format!("{}_{col}", d.name()));
        }
    }
    let mut lines = vec![header.join(",")];
    for (snr, param, noise, s) in cells(config)? {
        let mut fields = vec![fmt_num(snr), fmt_num(param)];
        for family in &families {
            let report = exponents(&DetectorModel::new(family.clone(), noise, s.clone()));
            if let Err(e) = &report {
                warn!("{} at snr {snr} dB, param {param}: {e}", family.name());
            }
            fields.extend(report_fields(&report));
        }
        lines.push(fields.join(","));
    }
    Ok(Outcome::table(lines))
}

fn sweep(config: &RunConfig) -> Result<Outcome, CommandError> {
    let family = config.spectrum.family().ok_or_else(|| {
        CommandError::Config("spectrum: are-sweep needs gauss_markov or triangular".into())
    })?;
    let mut snrs = config.snr_db.clone();
    if config.prop1_check && !snrs.contains(&HIGH_SNR_DB) {
        snrs.push(HIGH_SNR_DB);
    }
    if snrs.contains(&f64::NEG_INFINITY) {
        return Err(CommandError::Config(
            "snr_db: are-sweep needs a positive signal power".into(),
        ));
    }
    let spec = SweepSpec {
        family1: config.detector_family(config.detectors[0])?,
        family2: config.detector_family(config.detectors[1])?,
        spectrum: family,
        params: config.params.clone(),
        snr_db: snrs.clone(),
        sigma2: config.sigma2,
        panels: config.panels,
    };
    let rows = are_sweep(&spec)?;
    // Rows arrive ordered by (param, snr); the table is ordered by (snr, param).
    let (np, ns) = (config.params.len(), snrs.len());
    let ordered: Vec<&SweepRow> = (0..ns)
        .flat_map(|j| (0..np).map(move |i| (i, j)))
        .map(|(i, j)| &rows[i * ns + j])
        .collect();
    for row in ordered.iter().filter(|r| r.are.is_err()) {
        if let Err(e) = &row.are {
            warn!("param {}, snr {} dB: {e}", row.param, row.snr_db);
        }
    }
    let mut lines = vec![SweepRow::HEADER.to_string()];
    lines.extend(ordered.iter().map(|r| r.to_csv()));
    let mut outcome = Outcome::table(lines);
    if config.prop1_check {
        outcome.property_failure = high_snr_failures(&rows, np, &snrs);
    }
    Ok(outcome)
}

/// Parameters whose ARE does not increase strictly with SNR or stays below
/// `HIGH_SNR_ARE` at `HIGH_SNR_DB`.
fn high_snr_failures(rows: &[SweepRow], np: usize, snrs: &[f64]) -> Option<String> {
    let ns = snrs.len();
    let mut order: Vec<usize> = (0..ns).collect();
    order.sort_by(|&a, &b| snrs[a].total_cmp(&snrs[b]));
    let top = snrs
        .iter()
        .position(|&s| s == HIGH_SNR_DB)
        .expect("40 dB is part of the sweep");
    let mut failures = Vec::new();
    for i in 0..np {
        let row = &rows[i * ns..(i + 1) * ns];
        let are: Vec<f64> = order
            .iter()
            .map(|&j| row[j].are.clone().unwrap_or(f64::NAN))
            .collect();
        let increasing = are.windows(2).all(|w| w[1] > w[0]);
        let at_top = row[top].are.clone().unwrap_or(f64::NAN);
        if !increasing || !(at_top >= HIGH_SNR_ARE) {
            failures.push(format!(
                "param {}: ARE at {HIGH_SNR_DB} dB = {}, increasing = {increasing}",
                row[0].param,
                fmt_num(at_top)
            ));
        }
    }
    (!failures.is_empty()).then(|| failures.join("; "))
}

fn banded(config: &RunConfig) -> Result<Outcome, CommandError> {
    let mut ms = config.m.clone();
    ms.sort_unstable();
    ms.dedup();
    let m_max = *ms.last().expect("validated nonempty");
    let mut header = vec!["snr_db".to_string(), "param".to_string(), "m".to_string()];
    header.extend((0..=m_max).map(|l| format!("b{l}")));
    header.extend(
        [
            "E0",
            "E1",
            "E",
            "E_optimal",
            "ARE",
            "ARE_simple_quadratic",
            "cells_evaluated",
            "cells_feasible",
            "status",
        ]
        .map(String::from),
    );
    let mut lines = vec![header.join(",")];
    for (snr, param, noise, s) in cells(config)? {
        let optimal = exponents(&DetectorModel::optimal(noise, s.clone()));
        let simple = exponents(&DetectorModel::simple_quadratic(noise, s.clone()));
        let e_opt = optimal.as_ref().map(|r| r.e).unwrap_or(f64::NAN);
        let are = |e: f64| if e_opt > 0.0 { e / e_opt } else { f64::NAN };
        let are_sq = are(simple.as_ref().map(|r| r.e).unwrap_or(f64::NAN));
        let mut seeds: Vec<Vec<f64>> = Vec::new();
        if config.seed_simple_quadratic && noise.theta2() > 0.0 {
            seeds.push(vec![simple_quadratic_equivalent(&noise, &s)]);
        }
        for &m in &ms {
            let mut search = BandedSearchConfig::with_defaults(m, noise, s.clone());
            search.ranges = std::iter::once(config.b0_range)
                .chain(std::iter::repeat_n(config.bl_range, m))
                .map(|(lo, hi)| CoefficientRange::new(lo, hi, config.grid_steps))
                .collect::<Result<_, _>>()?;
            search.refinement_rounds = config.refinement_rounds;
            search.seed_cells = seeds.clone();
            info!("searching m = {m} at snr {snr} dB, param {param}");
            let mut fields = vec![fmt_num(snr), fmt_num(param), m.to_string()];
            match grid_search(&search) {
                Ok(SearchOutcome::Found(r)) => {
                    let b = r.b_star.as_slice();
                    seeds.push(b.to_vec());
                    fields.extend((0..=m_max).map(|l| fmt_num(b.get(l).copied().unwrap_or(0.0))));
                    let e = &r.exponent_report;
                    fields.extend([
                        fmt_num(e.e0),
                        fmt_num(e.e1),
                        fmt_num(e.e),
                        fmt_num(e_opt),
                        fmt_num(are(e.e)),
                    ]);
                    fields.extend([
                        fmt_num(are_sq),
                        r.cells_evaluated.to_string(),
                        r.cells_feasible.to_string(),
                    ]);
                    fields.push("ok".into());
                }
                Ok(SearchOutcome::NoSolution { cells_evaluated }) => {
                    warn!("no feasible m = {m} cell at snr {snr} dB, param {param}");
                    fields.extend((0..m_max + 6).map(|_| "nan".to_string()));
                    fields.extend([
                        fmt_num(are_sq),
                        cells_evaluated.to_string(),
                        "0".into(),
                        "no_feasible_cell".into(),
                    ]);
                }
                Err(e) => {
                    warn!("m = {m} search at snr {snr} dB, param {param}: {e}");
                    fields.extend((0..m_max + 6).map(|_| "nan".to_string()));
                    fields.extend([fmt_num(are_sq), "0".into(), "0".into(), "error".into()]);
                }
            }
            lines.push(fields.join(","));
        }
    }
    Ok(Outcome::table(lines))
}

/// The m = 0 coefficient whose decisions coincide with the simple quadratic
/// detector: the banded offset is the exact log-determinant, so `b₀` is
/// rescaled by the ratio of the two offsets.
fn simple_quadratic_equivalent(noise: &NoiseModel, s: &Spectrum) -> f64 {
    let ratio =
        cgf_optimal(noise, s).lambda0.offset() / cgf_simple_quadratic(noise, s).lambda0.offset();
    simple_quadratic_coefficient(noise) * ratio
}

const SIM_HEADER: &str =
    "snr_db,param,detector,n,alpha,alpha_lo,alpha_hi,beta,beta_lo,beta_hi,pe,pe_lo,pe_hi,\
analytic_e,analytic_feasible,slope,slope_lo,slope_hi,corrected_slope,slope_ratio";

fn simulation(config: &RunConfig) -> Result<Outcome, CommandError> {
    let mut lines = vec![SIM_HEADER.to_string()];
    for (snr, param, noise, s) in cells(config)? {
        for &choice in &config.detectors {
            let detector = DetectorModel::new(config.detector_family(choice)?, noise, s.clone());
            let analytic = exponents(&detector)?;
            info!(
                "simulating {} at snr {snr} dB, param {param}",
                choice.name()
            );
            let est = simulate(&SimConfig {
                detector,
                n_list: config.n.clone(),
                trials: config.trials,
                seed: config.seed,
            })?;
            if est.truncated {
                warn!(
                    "{} at snr {snr} dB: only {} sample size(s) observed errors",
                    choice.name(),
                    est.usable_prefix()
                );
            }
            let nan = || "nan".to_string();
            let (slope, lo, hi, ratio) = match est.slope {
                Some(f) => {
                    let ratio = if analytic.e > 0.0 {
                        f.slope / analytic.e
                    } else {
                        f64::NAN
                    };
                    (
                        fmt_num(f.slope),
                        fmt_num(f.lo),
                        fmt_num(f.hi),
                        fmt_num(ratio),
                    )
                }
                None => (nan(), nan(), nan(), nan()),
            };
            let corrected = est
                .corrected_slope
                .map(|f| fmt_num(f.slope))
                .unwrap_or_else(nan);
            for row in &est.rows {
                let mut fields = vec![
                    fmt_num(snr),
                    fmt_num(param),
                    choice.name().to_string(),
                    row.n.to_string(),
                ];
                for p in [&row.alpha, &row.beta, &row.pe] {
                    fields.extend([fmt_num(p.estimate), fmt_num(p.lo), fmt_num(p.hi)]);
                }
                fields.extend([fmt_num(analytic.e), fmt_bool(analytic.feasible).to_string()]);
                fields.extend([
                    slope.clone(),
                    lo.clone(),
                    hi.clone(),
                    corrected.clone(),
                    ratio.clone(),
                ]);
                lines.push(fields.join(","));
            }
        }
    }
    Ok(Outcome::table(lines))
}
