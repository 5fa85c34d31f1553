//! Flat `key = value` run configuration. Repeated keys form lists; command
//! line flags replace file values key by key.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use detexp::exponent::SpectrumFamily;
use detexp::{BandCoefficients, DetectorFamily, NoiseModel, Spectrum, DEFAULT_PANELS};

/// Invalid configuration; the message names the offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Exponent,
    AreSweep,
    BandedOptimize,
    Simulate,
}

impl Command {
    pub const ALL: [Command; 4] = [
        Command::Exponent,
        Command::AreSweep,
        Command::BandedOptimize,
        Command::Simulate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Exponent => "exponent",
            Command::AreSweep => "are-sweep",
            Command::BandedOptimize => "banded-optimize",
            Command::Simulate => "simulate",
        }
    }
}

impl FromStr for Command {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| ConfigError(format!("command: unknown command `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumChoice {
    GaussMarkov,
    Triangular,
    /// Spectrum samples read from `spectrum_table`.
    Table,
}

impl SpectrumChoice {
    pub fn name(self) -> &'static str {
        match self {
            SpectrumChoice::GaussMarkov => "gauss_markov",
            SpectrumChoice::Triangular => "triangular",
            SpectrumChoice::Table => "table",
        }
    }

    pub fn family(self) -> Option<SpectrumFamily> {
        match self {
            SpectrumChoice::GaussMarkov => Some(SpectrumFamily::GaussMarkov),
            SpectrumChoice::Triangular => Some(SpectrumFamily::Triangular),
            SpectrumChoice::Table => None,
        }
    }
}

impl FromStr for SpectrumChoice {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauss_markov" => Ok(SpectrumChoice::GaussMarkov),
            "triangular" => Ok(SpectrumChoice::Triangular),
            "table" => Ok(SpectrumChoice::Table),
            _ => err(format!("spectrum: unknown spectrum `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorChoice {
    Optimal,
    SimpleQuadratic,
    /// Banded detector with the coefficients of the `band` key.
    Banded,
}

impl DetectorChoice {
    pub fn name(self) -> &'static str {
        match self {
            DetectorChoice::Optimal => "optimal",
            DetectorChoice::SimpleQuadratic => "simple_quadratic",
            DetectorChoice::Banded => "banded",
        }
    }
}

impl FromStr for DetectorChoice {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimal" => Ok(DetectorChoice::Optimal),
            "simple_quadratic" => Ok(DetectorChoice::SimpleQuadratic),
            "banded" => Ok(DetectorChoice::Banded),
            _ => err(format!("detector: unknown detector `{s}`")),
        }
    }
}

/// Every recognized key and whether it holds a list.
const KEYS: &[(&str, bool)] = &[
    ("command", false),
    ("spectrum", false),
    ("spectrum_table", false),
    ("param", true),
    ("snr_db", true),
    ("sigma2", false),
    ("panels", false),
    ("detector", true),
    ("band", true),
    ("m", true),
    ("grid_steps", false),
    ("refinement_rounds", false),
    ("b0_lo", false),
    ("b0_hi", false),
    ("bl_lo", false),
    ("bl_hi", false),
    ("seed_simple_quadratic", false),
    ("n", true),
    ("trials", false),
    ("seed", false),
    ("output", false),
    ("prop1_check", false),
];

fn is_list(key: &str) -> Option<bool> {
    KEYS.iter().find(|(k, _)| *k == key).map(|(_, list)| *list)
}

/// Raw key to values map before typing and defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig(BTreeMap<String, Vec<String>>);

impl RawConfig {
    /// Parses `key = value` lines. `#` starts a comment. List keys accept
    /// repeated lines and comma-separated values.
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    i + 1
                ));
            };
            let key = key.trim();
            let list = is_list(key)
                .ok_or_else(|| ConfigError(format!("unknown key `{key}` (line {})", i + 1)))?;
            let entry = raw.0.entry(key.to_string()).or_default();
            if !list && !entry.is_empty() {
                return err(format!(
                    "{key}: repeated key takes a single value (line {})",
                    i + 1
                ));
            }
            entry.extend(split_values(value, list));
        }
        Ok(raw)
    }

    /// Sets `key`, replacing any earlier values.
    pub fn set(&mut self, key: &str, values: &[String]) -> Result<()> {
        let list = is_list(key).ok_or_else(|| ConfigError(format!("unknown key `{key}`")))?;
        let values: Vec<String> = values.iter().flat_map(|v| split_values(v, list)).collect();
        if !list && values.len() > 1 {
            return err(format!("{key}: takes a single value"));
        }
        self.0.insert(key.to_string(), values);
        Ok(())
    }

    /// Overlays every key of `other` onto `self`.
    pub fn override_with(&mut self, other: RawConfig) {
        self.0.extend(other.0);
    }

    fn take(&mut self, key: &str) -> Vec<String> {
        self.0.remove(key).unwrap_or_default()
    }

    fn scalar<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key).as_slice() {
            [] => Ok(None),
            [v] => v
                .parse()
                .map(Some)
                .map_err(|_| ConfigError(format!("{key}: cannot parse `{v}`"))),
            _ => err(format!("{key}: takes a single value")),
        }
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        let values = self.take(key);
        if values.is_empty() {
            return Ok(None);
        }
        values
            .iter()
            .map(|v| {
                v.parse()
                    .map_err(|_| ConfigError(format!("{key}: cannot parse `{v}`")))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }
}

fn split_values(value: &str, list: bool) -> Vec<String> {
    let value = value.trim();
    if list {
        value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect()
    } else {
        vec![value.to_string()]
    }
}

fn parse_bool(key: &str, v: Option<String>) -> Result<Option<bool>> {
    match v.as_deref() {
        None => Ok(None),
        Some("true") => Ok(Some(true)),
        Some("false") => Ok(Some(false)),
        Some(v) => err(format!("{key}: expected true or false, got `{v}`")),
    }
}

/// A fully resolved run configuration with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub spectrum: SpectrumChoice,
    pub spectrum_table: Option<PathBuf>,
    pub params: Vec<f64>,
    pub snr_db: Vec<f64>,
    pub sigma2: f64,
    pub panels: usize,
    pub detectors: Vec<DetectorChoice>,
    pub band: Vec<f64>,
    pub m: Vec<usize>,
    pub grid_steps: usize,
    pub refinement_rounds: usize,
    pub b0_range: (f64, f64),
    pub bl_range: (f64, f64),
    pub seed_simple_quadratic: bool,
    pub n: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub prop1_check: bool,
}

fn grid(lo: f64, step: f64, count: usize) -> Vec<f64> {
    // Rounded so that the printed grid reads 0.05, 0.1, ... exactly.
    (0..count)
        .map(|k| ((lo + step * k as f64) * 1e9).round() / 1e9)
        .collect()
}

impl RunConfig {
    /// Types `raw`, applies defaults and validates. `command` may be
    /// supplied by the caller; a different `command` key is an error.
    pub fn from_raw(mut raw: RawConfig, command: Option<Command>) -> Result<Self> {
        let file_command: Option<Command> = raw.scalar("command")?;
        let command = match (command, file_command) {
            (Some(a), Some(b)) if a != b => {
                return err(format!(
                    "command: configuration is for `{}`, not `{}`",
                    b.name(),
                    a.name()
                ))
            }
            (Some(c), _) | (None, Some(c)) => c,
            (None, None) => return err("command: no command given"),
        };
        let spectrum = raw
            .scalar("spectrum")?
            .unwrap_or(SpectrumChoice::GaussMarkov);
        let spectrum_table: Option<PathBuf> = raw.scalar("spectrum_table")?;
        let params = raw
            .list("param")?
            .unwrap_or_else(|| match (spectrum, command) {
                (SpectrumChoice::Table, _) => Vec::new(),
                (SpectrumChoice::Triangular, Command::Simulate) => vec![4.0],
                (SpectrumChoice::Triangular, _) => grid(1.0, 1.0, 10),
                (SpectrumChoice::GaussMarkov, Command::Simulate) => vec![0.5],
                (SpectrumChoice::GaussMarkov, Command::BandedOptimize) => grid(0.0, 0.1, 10),
                (SpectrumChoice::GaussMarkov, _) => grid(0.0, 0.05, 20),
            });
        let snr_db = raw.list("snr_db")?.unwrap_or_else(|| match command {
            Command::AreSweep => vec![0.0, 10.0, 20.0, 30.0],
            Command::BandedOptimize => vec![0.0, 10.0],
            Command::Exponent | Command::Simulate => vec![10.0],
        });
        let detectors = raw.list("detector")?.unwrap_or_else(|| match command {
            Command::Exponent => vec![DetectorChoice::Optimal, DetectorChoice::SimpleQuadratic],
            _ => vec![DetectorChoice::SimpleQuadratic, DetectorChoice::Optimal],
        });
        let prop1 = raw.take("prop1_check").pop();
        let seed_sq = raw.take("seed_simple_quadratic").pop();
        let config = RunConfig {
            command,
            spectrum,
            spectrum_table,
            params,
            snr_db,
            sigma2: raw.scalar("sigma2")?.unwrap_or(1.0),
            panels: raw.scalar("panels")?.unwrap_or(DEFAULT_PANELS),
            detectors,
            band: raw.list("band")?.unwrap_or_default(),
            m: raw.list("m")?.unwrap_or_else(|| vec![1]),
            grid_steps: raw.scalar("grid_steps")?.unwrap_or(64),
            refinement_rounds: raw.scalar("refinement_rounds")?.unwrap_or(2),
            b0_range: (
                raw.scalar("b0_lo")?.unwrap_or(0.01),
                raw.scalar("b0_hi")?.unwrap_or(2.0),
            ),
            bl_range: (
                raw.scalar("bl_lo")?.unwrap_or(-1.0),
                raw.scalar("bl_hi")?.unwrap_or(1.0),
            ),
            seed_simple_quadratic: parse_bool("seed_simple_quadratic", seed_sq)?.unwrap_or(true),
            n: raw
                .list("n")?
                .unwrap_or_else(|| vec![32, 64, 128, 256, 512]),
            trials: raw.scalar("trials")?.unwrap_or(100_000),
            seed: raw.scalar("seed")?.unwrap_or(0),
            output: raw.scalar("output")?,
            prop1_check: parse_bool("prop1_check", prop1)?.unwrap_or(false),
        };
        if let Some(key) = raw.0.keys().next() {
            return err(format!("unknown key `{key}`"));
        }
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        let finite = |key: &str, xs: &[f64]| match xs.iter().find(|x| !x.is_finite()) {
            Some(x) => err(format!("{key}: value `{x}` is not finite")),
            None => Ok(()),
        };
        finite("param", &self.params)?;
        // −∞ dB is the signal-free model θ² = 0.
        if let Some(x) = self
            .snr_db
            .iter()
            .find(|x| x.is_nan() || **x == f64::INFINITY)
        {
            return err(format!("snr_db: value `{x}` is not allowed"));
        }
        finite("band", &self.band)?;
        finite("b0_lo", &[self.b0_range.0])?;
        finite("b0_hi", &[self.b0_range.1])?;
        finite("bl_lo", &[self.bl_range.0])?;
        finite("bl_hi", &[self.bl_range.1])?;
        match (self.spectrum, &self.spectrum_table) {
            (SpectrumChoice::Table, None) => {
                return err("spectrum_table: required when spectrum = table")
            }
            (SpectrumChoice::Table, Some(_)) if !self.params.is_empty() => {
                return err("param: a tabulated spectrum takes no parameter")
            }
            (SpectrumChoice::Table, Some(_)) if self.command == Command::AreSweep => {
                return err("spectrum: are-sweep needs gauss_markov or triangular")
            }
            (SpectrumChoice::GaussMarkov | SpectrumChoice::Triangular, Some(_)) => {
                return err("spectrum_table: only valid with spectrum = table")
            }
            (SpectrumChoice::GaussMarkov | SpectrumChoice::Triangular, None)
                if self.params.is_empty() =>
            {
                return err("param: at least one value is required")
            }
            _ => {}
        }
        if self.snr_db.is_empty() {
            return err("snr_db: at least one value is required");
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return err("sigma2: must be positive and finite");
        }
        if self.detectors.is_empty() {
            return err("detector: at least one detector is required");
        }
        if let Some(d) = self
            .detectors
            .iter()
            .enumerate()
            .find(|(i, d)| self.detectors[..*i].contains(d))
        {
            return err(format!("detector: `{}` listed twice", d.1.name()));
        }
        if self.command == Command::AreSweep && self.detectors.len() != 2 {
            return err("detector: are-sweep compares exactly two detectors");
        }
        let uses_band = self.detectors.contains(&DetectorChoice::Banded)
            && matches!(
                self.command,
                Command::Exponent | Command::AreSweep | Command::Simulate
            );
        if uses_band {
            BandCoefficients::new(self.band.clone())
                .map_err(|e| ConfigError(format!("band: {e}")))?;
        }
        if self.m.is_empty() {
            return err("m: at least one bandwidth is required");
        }
        if self.grid_steps < 3 {
            return err("grid_steps: at least 3 steps are required");
        }
        if !(self.b0_range.0 < self.b0_range.1) {
            return err("b0_lo: must be below b0_hi");
        }
        if !(self.bl_range.0 < self.bl_range.1) {
            return err("bl_lo: must be below bl_hi");
        }
        if self.prop1_check && self.command != Command::AreSweep {
            return err("prop1_check: only valid for are-sweep");
        }
        // Spectra and noise models are checked here so that a bad value
        // never reaches the numerical stage.
        self.spectra()?;
        for &snr in &self.snr_db {
            self.noise(snr)?;
        }
        Ok(())
    }

    /// Serializes every key; `RawConfig::parse` followed by `from_raw`
    /// reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |key: &str, value: String| {
            writeln!(out, "{key} = {value}").expect("writing to a String");
        };
        put("command", self.command.name().into());
        put("spectrum", self.spectrum.name().into());
        if let Some(p) = &self.spectrum_table {
            put("spectrum_table", p.display().to_string());
        }
        self.params.iter().for_each(|p| put("param", p.to_string()));
        self.snr_db
            .iter()
            .for_each(|s| put("snr_db", s.to_string()));
        put("sigma2", self.sigma2.to_string());
        put("panels", self.panels.to_string());
        self.detectors
            .iter()
            .for_each(|d| put("detector", d.name().into()));
        self.band.iter().for_each(|b| put("band", b.to_string()));
        self.m.iter().for_each(|m| put("m", m.to_string()));
        put("grid_steps", self.grid_steps.to_string());
        put("refinement_rounds", self.refinement_rounds.to_string());
        put("b0_lo", self.b0_range.0.to_string());
        put("b0_hi", self.b0_range.1.to_string());
        put("bl_lo", self.bl_range.0.to_string());
        put("bl_hi", self.bl_range.1.to_string());
        put(
            "seed_simple_quadratic",
            self.seed_simple_quadratic.to_string(),
        );
        self.n.iter().for_each(|n| put("n", n.to_string()));
        put("trials", self.trials.to_string());
        put("seed", self.seed.to_string());
        if let Some(p) = &self.output {
            put("output", p.display().to_string());
        }
        put("prop1_check", self.prop1_check.to_string());
        out
    }

    pub fn noise(&self, snr_db: f64) -> Result<NoiseModel> {
        let noise = if snr_db == f64::NEG_INFINITY {
            NoiseModel::new(self.sigma2, 0.0)
        } else {
            NoiseModel::from_snr_db(snr_db, self.sigma2)
        };
        noise.map_err(|e| ConfigError(format!("snr_db: {e}")))
    }

    /// One `(param, spectrum)` pair per configured parameter; a single pair
    /// with parameter `NaN` for a tabulated spectrum.
    pub fn spectra(&self) -> Result<Vec<(f64, Spectrum)>> {
        match (self.spectrum.family(), &self.spectrum_table) {
            (Some(family), _) => self
                .params
                .iter()
                .map(|&p| {
                    family
                        .spectrum(p, self.panels)
                        .map(|s| (p, s))
                        .map_err(|e| ConfigError(format!("param: {e}")))
                })
                .collect(),
            (None, Some(path)) => {
                let s = Spectrum::load_table(path)
                    .map_err(|e| ConfigError(format!("spectrum_table: {e}")))?;
                let s = if s.quadrature().panels() == self.panels {
                    s
                } else {
                    s.with_panels(self.panels)
                        .map_err(|e| ConfigError(format!("panels: {e}")))?
                };
                Ok(vec![(f64::NAN, s)])
            }
            (None, None) => err("spectrum_table: required when spectrum = table"),
        }
    }

    pub fn detector_family(&self, choice: DetectorChoice) -> Result<DetectorFamily> {
        Ok(match choice {
            DetectorChoice::Optimal => DetectorFamily::Optimal,
            DetectorChoice::SimpleQuadratic => DetectorFamily::SimpleQuadratic,
            DetectorChoice::Banded => DetectorFamily::Banded(
                BandCoefficients::new(self.band.clone())
                    .map_err(|e| ConfigError(format!("band: {e}")))?,
            ),
        })
    }
}
