//! Experiment configuration, sweeps and result files.
//!
//! Configs are TOML. Every key is optional; a `preset` picks the base noise
//! model and default duration, and a `[noise]` table overrides single fields:
//!
//! ```toml
//! preset = "long_fiber"
//! mode = "sweep"
//! seed = 7
//! duration_s = 10800.0
//! schemes = ["none", "flip_half"]
//!
//! [noise]
//! singles_rate_hz = 1500.0
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{RotatorSetting, Scheme};
use crate::detection::{simulate_session, NoiseConfig, TallyCounts};
use crate::error::{Error, Result};
use crate::security::key_rate;

pub const DEFAULT_SEED: u64 = 0x5eed_2007_d15c_0001;
pub const SHORT_FIBER_DURATION_S: f64 = 20.0 * 60.0;
pub const LONG_FIBER_DURATION_S: f64 = 3.0 * 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Sweep,
    Single,
    Keyrate,
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    ShortFiber,
    LongFiber,
    Noiseless,
}

impl Preset {
    pub fn noise(self) -> NoiseConfig {
        match self {
            Preset::ShortFiber => NoiseConfig::short_fiber(),
            Preset::LongFiber => NoiseConfig::long_fiber(),
            Preset::Noiseless => NoiseConfig::noiseless(),
        }
    }

    pub fn duration_s(self) -> f64 {
        match self {
            Preset::ShortFiber | Preset::Noiseless => SHORT_FIBER_DURATION_S,
            Preset::LongFiber => LONG_FIBER_DURATION_S,
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "short_fiber" => Ok(Preset::ShortFiber),
            "long_fiber" => Ok(Preset::LongFiber),
            "noiseless" => Ok(Preset::Noiseless),
            other => Err(Error::InvalidConfig(format!("unknown preset `{other}`"))),
        }
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub seed: u64,
    /// Simulated time per (setting, scheme) pair.
    pub duration_s: f64,
    pub schemes: Vec<Scheme>,
    pub settings: Vec<RotatorSetting>,
    pub noise: NoiseConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<Preset>,
    mode: Option<Mode>,
    seed: Option<u64>,
    duration_s: Option<f64>,
    schemes: Option<Vec<Scheme>>,
    settings: Option<Vec<RotatorSetting>>,
    noise: Option<toml::Table>,
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        ExperimentConfig {
            mode: Mode::Sweep,
            seed: DEFAULT_SEED,
            duration_s: preset.duration_s(),
            schemes: vec![Scheme::None, Scheme::FlipHalf],
            settings: RotatorSetting::sweep_settings(),
            noise: preset.noise(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text)?;
        let preset = raw.preset.unwrap_or(Preset::LongFiber);
        let mut cfg = ExperimentConfig::preset(preset);
        if let Some(m) = raw.mode {
            cfg.mode = m;
        }
        if let Some(s) = raw.seed {
            cfg.seed = s;
        }
        if let Some(d) = raw.duration_s {
            cfg.duration_s = d;
        }
        if let Some(s) = raw.schemes {
            cfg.schemes = s;
        }
        if let Some(s) = raw.settings {
            cfg.settings = s;
        }
        if let Some(overrides) = raw.noise {
            let mut table = toml::Table::try_from(cfg.noise)
                .map_err(|e| Error::InvalidConfig(format!("cannot serialize noise config: {e}")))?;
            for (k, v) in overrides {
                if !table.contains_key(&k) {
                    return Err(Error::InvalidConfig(format!("unknown noise key `{k}`")));
                }
                table.insert(k, v);
            }
            cfg.noise = table.try_into()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if self.settings.is_empty() {
            return Err(Error::InvalidConfig("at least one rotator setting is required".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig("at least one scheme is required".into()));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::InvalidConfig(format!("duration_s must be positive, got {}", self.duration_s)));
        }
        for s in &self.settings {
            s.validate()?;
        }
        Ok(())
    }

    /// Shrinks (or stretches) the simulated time per setting.
    pub fn scale_duration(&mut self, factor: f64) -> Result<()> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidConfig(format!("duration scale must be positive, got {factor}")));
        }
        self.duration_s *= factor;
        Ok(())
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::preset(Preset::LongFiber)
    }
}

/// One line of a sweep result.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub setting_index: usize,
    pub scheme: Scheme,
    pub conclusive_rate_hz: f64,
    pub normalized_coincidence: f64,
    /// NaN when nothing survived sifting.
    pub qber: f64,
    pub qber_stderr: f64,
    pub p_s: f64,
    pub key_rate_fraction: f64,
    pub tally: TallyCounts,
}

pub const CSV_COLUMNS: [&str; 8] = [
    "setting_index",
    "scheme",
    "conclusive_rate_hz",
    "normalized_coincidence",
    "qber",
    "qber_stderr",
    "p_S",
    "key_rate_fraction",
];

/// SplitMix64 finalizer used to derive per-job seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn job_seed(seed: u64, scheme: Scheme, setting_index: usize) -> u64 {
    let scheme_tag = Scheme::ALL.iter().position(|s| *s == scheme).unwrap_or(0) as u64;
    mix(mix(seed ^ (scheme_tag << 56)) ^ setting_index as u64)
}

/// Runs every (scheme, setting) pair; rows are ordered scheme-major.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let jobs: Vec<(Scheme, usize, RotatorSetting)> = cfg
        .schemes
        .iter()
        .flat_map(|&sc| cfg.settings.iter().enumerate().map(move |(i, s)| (sc, i, *s)))
        .collect();
    let tallies = jobs
        .par_iter()
        .map(|&(scheme, i, setting)| {
            simulate_session(&cfg.noise, &setting, scheme, cfg.duration_s, job_seed(cfg.seed, scheme, i))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<SweepRow> = jobs
        .iter()
        .zip(tallies)
        .map(|(&(scheme, setting_index, _), tally)| {
            let qber = tally.qber().unwrap_or(f64::NAN);
            let p_s = tally.p_s().unwrap_or(f64::NAN);
            let key_rate_fraction = if qber.is_finite() && p_s > 0.0 {
                key_rate(p_s, qber.min(0.5)).unwrap_or(f64::NAN)
            } else {
                f64::NAN
            };
            SweepRow {
                setting_index,
                scheme,
                conclusive_rate_hz: tally.conclusive_rate_hz(),
                normalized_coincidence: 0.0,
                qber,
                qber_stderr: tally.qber_stderr().unwrap_or(f64::NAN),
                p_s,
                key_rate_fraction,
                tally,
            }
        })
        .collect();

    let max_rate = rows.iter().map(|r| r.conclusive_rate_hz).fold(0.0, f64::max);
    for r in &mut rows {
        r.normalized_coincidence = if max_rate > 0.0 { r.conclusive_rate_hz / max_rate } else { 0.0 };
    }
    Ok(rows)
}

/// Mean QBER over the rows of one scheme.
pub fn average_qber(rows: &[SweepRow], scheme: Scheme) -> Option<f64> {
    let q: Vec<f64> = rows.iter().filter(|r| r.scheme == scheme && r.qber.is_finite()).map(|r| r.qber).collect();
    (!q.is_empty()).then(|| q.iter().sum::<f64>() / q.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidConfig(format!("unknown output format `{other}`"))),
        }
    }
}

/// Rounds to six significant digits and prints the shortest representation
/// of the rounded value.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn sig6_json(x: f64) -> serde_json::Value {
    if x.is_finite() {
        let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
        serde_json::json!(rounded)
    } else {
        serde_json::Value::Null
    }
}

pub fn render(rows: &[SweepRow], format: OutputFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidConfig("no rows to emit".into()));
    }
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_COLUMNS)?;
            for r in rows {
                w.write_record([
                    r.setting_index.to_string(),
                    r.scheme.to_string(),
                    sig6(r.conclusive_rate_hz),
                    sig6(r.normalized_coincidence),
                    sig6(r.qber),
                    sig6(r.qber_stderr),
                    sig6(r.p_s),
                    sig6(r.key_rate_fraction),
                ])?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        OutputFormat::Json => {
            let arr: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    let mut m = serde_json::Map::new();
                    m.insert(CSV_COLUMNS[0].into(), serde_json::json!(r.setting_index));
                    m.insert(CSV_COLUMNS[1].into(), serde_json::json!(r.scheme.as_str()));
                    let vals = [
                        r.conclusive_rate_hz,
                        r.normalized_coincidence,
                        r.qber,
                        r.qber_stderr,
                        r.p_s,
                        r.key_rate_fraction,
                    ];
                    for (name, v) in CSV_COLUMNS[2..].iter().zip(vals) {
                        m.insert((*name).into(), sig6_json(v));
                    }
                    serde_json::Value::Object(m)
                })
                .collect();
            let mut s = serde_json::to_string_pretty(&arr)?;
            s.push('\n');
            Ok(s)
        }
    }
}

pub fn emit(rows: &[SweepRow], format: OutputFormat, path: &Path) -> Result<()> {
    let text = render(rows, format)?;
    fs::write(path, text)?;
    Ok(())
}

/// Path of the resolved-config file written next to a result file.
pub fn config_echo_path(results: &Path) -> PathBuf {
    let mut name = results.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".config.toml");
    results.with_file_name(name)
}

pub fn write_config_echo(cfg: &ExperimentConfig, results: &Path) -> Result<PathBuf> {
    let path = config_echo_path(results);
    fs::write(&path, cfg.to_toml_string()?)?;
    Ok(path)
}

/// Reads a tally file written by `single` (JSON or TOML).
pub fn load_tally(path: &Path) -> Result<TallyCounts> {
    let text = fs::read_to_string(path)?;
    match serde_json::from_str(&text) {
        Ok(t) => Ok(t),
        Err(json_err) => toml::from_str(&text).map_err(|_| Error::Json(json_err)),
    }
}
