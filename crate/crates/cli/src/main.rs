mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use crate::commands::{CommandError, Outcome};
use crate::config::{Command, RawConfig, RunConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_PROPERTY: u8 = 4;

/// Error exponents, ARE sweeps, banded detector design and Monte Carlo
/// validation for quadratic detectors of Gaussian signals in noise.
///
/// Settings come from an optional `key = value` file; every flag overrides
/// the key of the same name (dashes for underscores). List flags take
/// comma-separated values or repeat.
#[derive(Parser, Debug)]
#[command(name = "detexp", version, allow_negative_numbers = true)]
struct Cli {
    /// exponent | are-sweep | banded-optimize | simulate; may instead come
    /// from the `command` key of the configuration file.
    command: Option<String>,
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the resolved configuration instead of running.
    #[arg(long)]
    print_config: bool,
    /// gauss_markov | triangular | table.
    #[arg(long)]
    spectrum: Option<String>,
    /// Two-column `omega value` file for spectrum = table.
    #[arg(long)]
    spectrum_table: Option<String>,
    /// Spectrum parameters: a for gauss_markov, M for triangular.
    #[arg(long)]
    param: Vec<String>,
    /// SNR values in dB, 10·log10(θ²/σ²).
    #[arg(long)]
    snr_db: Vec<String>,
    /// Noise variance σ².
    #[arg(long)]
    sigma2: Option<String>,
    /// Quadrature panels on [0, 2π].
    #[arg(long)]
    panels: Option<String>,
    /// optimal | simple_quadratic | banded.
    #[arg(long)]
    detector: Vec<String>,
    /// Banded detector coefficients b0..bm.
    #[arg(long)]
    band: Vec<String>,
    /// Bandwidths searched by banded-optimize.
    #[arg(long)]
    m: Vec<String>,
    /// Grid steps per coefficient.
    #[arg(long)]
    grid_steps: Option<String>,
    /// Refinement rounds after the first grid pass.
    #[arg(long)]
    refinement_rounds: Option<String>,
    #[arg(long)]
    b0_lo: Option<String>,
    #[arg(long)]
    b0_hi: Option<String>,
    #[arg(long)]
    bl_lo: Option<String>,
    #[arg(long)]
    bl_hi: Option<String>,
    /// Seed the search with the simple quadratic detector's coefficient.
    #[arg(long)]
    seed_simple_quadratic: Option<String>,
    /// Sample sizes for simulate.
    #[arg(long)]
    n: Vec<String>,
    /// Draws per hypothesis and sample size.
    #[arg(long)]
    trials: Option<String>,
    /// Random seed for simulate.
    #[arg(long)]
    seed: Option<String>,
    /// Output CSV path; standard output when absent.
    #[arg(long)]
    output: Option<String>,
    /// are-sweep: add 40 dB and exit with status 4 unless the ARE increases
    /// with SNR and reaches 0.95 at 40 dB for every parameter.
    #[arg(long)]
    prop1_check: bool,
}

impl Cli {
    fn overrides(&self) -> Result<RawConfig, config::ConfigError> {
        let mut raw = RawConfig::default();
        let scalars = [
            ("spectrum", &self.spectrum),
            ("spectrum_table", &self.spectrum_table),
            ("sigma2", &self.sigma2),
            ("panels", &self.panels),
            ("grid_steps", &self.grid_steps),
            ("refinement_rounds", &self.refinement_rounds),
            ("b0_lo", &self.b0_lo),
            ("b0_hi", &self.b0_hi),
            ("bl_lo", &self.bl_lo),
            ("bl_hi", &self.bl_hi),
            ("seed_simple_quadratic", &self.seed_simple_quadratic),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("output", &self.output),
        ];
        for (key, value) in scalars {
            if let Some(v) = value {
                raw.set(key, std::slice::from_ref(v))?;
            }
        }
        let lists = [
            ("param", &self.param),
            ("snr_db", &self.snr_db),
            ("detector", &self.detector),
            ("band", &self.band),
            ("m", &self.m),
            ("n", &self.n),
        ];
        for (key, values) in lists {
            if !values.is_empty() {
                raw.set(key, values)?;
            }
        }
        if self.prop1_check {
            raw.set("prop1_check", &["true".to_string()])?;
        }
        Ok(raw)
    }

    fn resolve(&self) -> Result<RunConfig, config::ConfigError> {
        let command = self
            .command
            .as_deref()
            .map(str::parse::<Command>)
            .transpose()?;
        let mut raw = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    config::ConfigError(format!("config: cannot read {}: {e}", path.display()))
                })?;
                RawConfig::parse(&text)?
            }
            None => RawConfig::default(),
        };
        raw.override_with(self.overrides()?);
        RunConfig::from_raw(raw, command)
    }
}

/// Writes `text` to `path` through a sibling temporary file so that a
/// failed run never leaves a partial file behind.
fn write_atomically(path: &Path, text: &str) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, text)
        .and_then(|_| std::fs::rename(&tmp, path))
        .inspect_err(|_| {
            let _ = std::fs::remove_file(&tmp);
        })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let config = match cli.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("detexp: configuration error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if cli.print_config {
        print!("{}", config.to_text());
        return ExitCode::SUCCESS;
    }
    let Outcome {
        csv,
        property_failure,
    } = match commands::run(&config) {
        Ok(o) => o,
        Err(CommandError::Config(e)) => {
            eprintln!("detexp: configuration error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(CommandError::Numerical(e)) => {
            eprintln!("detexp: numerical failure: {e}");
            return ExitCode::from(EXIT_NUMERICAL);
        }
    };
    match &config.output {
        Some(path) => {
            if let Err(e) = write_atomically(path, &csv) {
                eprintln!("detexp: output: cannot write {}: {e}", path.display());
                return ExitCode::from(EXIT_CONFIG);
            }
        }
        None => print!("{csv}"),
    }
    match property_failure {
        Some(msg) => {
            eprintln!("detexp: property check failed: {msg}");
            ExitCode::from(EXIT_PROPERTY)
        }
        None => ExitCode::SUCCESS,
    }
}
