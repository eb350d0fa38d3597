//! Strict flat configuration files.
//!
//! One `key = value` assignment per line; blank lines and lines starting
//! with `#` are ignored. Every key must be known, appear at most once, and
//! be consumed by the selected mode: a config describes exactly one run, so
//! stray keys are treated as mistakes rather than silently ignored.
//!
//! Vectors are comma- or whitespace-separated numbers; matrices are given
//! row-major with `model.n * model.n` entries. Lead-lag asset indices are
//! 1-based in the file and converted to 0-based internally.

use crate::error::ModelError;
use crate::model::{SingleParams, PI_BOUNDS_DEFAULT};
use crate::multi::MultiParams;
use crate::sim::SimConfig;
use nalgebra::{DMatrix, DVector};
use std::cell::RefCell;
use std::collections::{HashMap, HashSet};

/// What went wrong while reading a config file.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config line {line}, key `{key}`: {msg}")]
    Parse { line: usize, key: String, msg: String },
    #[error("missing required key `{key}`")]
    Missing { key: &'static str },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The nine run modes selectable via `mode = ...`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Solve,
    Measures,
    Simulate,
    Sweep,
    Check,
    MultiSolve,
    MultiMeasures,
    MultiSimulate,
    LeadLag,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::Measures => "measures",
            Mode::Simulate => "simulate",
            Mode::Sweep => "sweep",
            Mode::Check => "check",
            Mode::MultiSolve => "multi-solve",
            Mode::MultiMeasures => "multi-measures",
            Mode::MultiSimulate => "multi-simulate",
            Mode::LeadLag => "leadlag",
        }
    }

    fn from_str(s: &str) -> Option<Mode> {
        Some(match s {
            "solve" => Mode::Solve,
            "measures" => Mode::Measures,
            "simulate" => Mode::Simulate,
            "sweep" => Mode::Sweep,
            "check" => Mode::Check,
            "multi-solve" => Mode::MultiSolve,
            "multi-measures" => Mode::MultiMeasures,
            "multi-simulate" => Mode::MultiSimulate,
            "leadlag" => Mode::LeadLag,
            _ => return None,
        })
    }
}

/// Scalar model field a sweep can range over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    DBar,
    SigmaD2,
    SigmaS2,
    SigmaTheta2True,
    SigmaTheta2Informed,
    Alpha,
    Pi,
    RisklessSupply,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::DBar => "d_bar",
            SweepParam::SigmaD2 => "sigma_d2",
            SweepParam::SigmaS2 => "sigma_s2",
            SweepParam::SigmaTheta2True => "sigma_theta2_true",
            SweepParam::SigmaTheta2Informed => "sigma_theta2_informed",
            SweepParam::Alpha => "alpha",
            SweepParam::Pi => "pi",
            SweepParam::RisklessSupply => "riskless_supply",
        }
    }

    fn from_str(s: &str) -> Option<SweepParam> {
        // accept both the bare field name and the full config key
        Some(match s.strip_prefix("model.").unwrap_or(s) {
            "d_bar" => SweepParam::DBar,
            "sigma_d2" => SweepParam::SigmaD2,
            "sigma_s2" => SweepParam::SigmaS2,
            "sigma_theta2_true" => SweepParam::SigmaTheta2True,
            "sigma_theta2_informed" => SweepParam::SigmaTheta2Informed,
            "alpha" => SweepParam::Alpha,
            "pi" => SweepParam::Pi,
            "riskless_supply" => SweepParam::RisklessSupply,
            _ => return None,
        })
    }

    /// The base parameters with this field set to `value`.
    pub fn apply(self, base: &SingleParams, value: f64) -> SingleParams {
        let mut p = *base;
        match self {
            SweepParam::DBar => p.d_bar = value,
            SweepParam::SigmaD2 => p.sigma_d2 = value,
            SweepParam::SigmaS2 => p.sigma_s2 = value,
            SweepParam::SigmaTheta2True => p.sigma_theta2_true = value,
            SweepParam::SigmaTheta2Informed => p.sigma_theta2_informed = value,
            SweepParam::Alpha => p.alpha = value,
            SweepParam::Pi => p.pi = value,
            SweepParam::RisklessSupply => p.riskless_supply = value,
        }
        p
    }
}

/// An inclusive linear grid over one scalar model field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub from: f64,
    pub to: f64,
    pub steps: u64,
}

impl SweepSpec {
    /// Grid point `i` of `steps` (endpoints included).
    pub fn value_at(&self, i: u64) -> f64 {
        let t = i as f64 / (self.steps - 1) as f64;
        self.from + (self.to - self.from) * t
    }
}

/// Muted-asset experiment inputs (indices already 0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct LeadLagSpec {
    pub muted: Vec<usize>,
    pub s_active: DVector<f64>,
}

/// Where and how results are written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub format: OutputFormat,
    /// Target file; `None` writes to stdout.
    pub path: Option<String>,
    /// SVG chart target, sweep mode only.
    pub chart: Option<String>,
}

/// A fully parsed and validated run description.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub single: Option<SingleParams>,
    pub multi: Option<MultiParams>,
    pub sim: Option<SimConfig>,
    pub sweep: Option<SweepSpec>,
    pub leadlag: Option<LeadLagSpec>,
    pub output: OutputSpec,
    /// Optional CSV file receiving one row per simulated path.
    pub dump_paths: Option<String>,
    pub allow_homogeneous: bool,
}

const KNOWN_KEYS: &[&str] = &[
    "mode",
    "model.d_bar",
    "model.sigma_d2",
    "model.sigma_s2",
    "model.sigma_theta2_true",
    "model.sigma_theta2_informed",
    "model.alpha",
    "model.pi",
    "model.riskless_supply",
    "model.n",
    "model.d_bar_vec",
    "model.sigma_d",
    "model.sigma_s",
    "model.sigma_theta_true",
    "model.sigma_theta_informed",
    "sim.n_paths",
    "sim.seed",
    "sim.batch_size",
    "sim.dump_paths",
    "sweep.param",
    "sweep.from",
    "sweep.to",
    "sweep.steps",
    "output.format",
    "output.path",
    "output.chart",
    "leadlag.muted",
    "leadlag.s_active",
];

/// Raw key/value store with line numbers and consumption tracking.
struct Raw {
    entries: HashMap<String, (usize, String)>,
    used: RefCell<HashSet<String>>,
}

impl Raw {
    fn parse(text: &str) -> Result<Raw, ConfigError> {
        let mut entries = HashMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw_line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(ConfigError::Parse {
                    line,
                    key: trimmed.to_string(),
                    msg: "expected `key = value`".into(),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::Parse {
                    line,
                    key,
                    msg: "unknown key".into(),
                });
            }
            if let Some((first, _)) = entries.insert(key.clone(), (line, value)) {
                return Err(ConfigError::Parse {
                    line,
                    key,
                    msg: format!("duplicate key (first set on line {first})"),
                });
            }
        }
        Ok(Raw { entries, used: RefCell::new(HashSet::new()) })
    }

    fn get(&self, key: &'static str) -> Option<(usize, &str)> {
        let hit = self.entries.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some((hit.0, hit.1.as_str()))
    }

    fn require(&self, key: &'static str) -> Result<(usize, &str), ConfigError> {
        self.get(key).ok_or(ConfigError::Missing { key })
    }

    fn f64_at(&self, key: &'static str, line: usize, s: &str) -> Result<f64, ConfigError> {
        let parse_err = |msg: String| ConfigError::Parse { line, key: key.into(), msg };
        let v: f64 = s
            .parse()
            .map_err(|_| parse_err(format!("expected a number, got `{s}`")))?;
        if !v.is_finite() {
            return Err(parse_err("value must be finite".into()));
        }
        Ok(v)
    }

    fn require_f64(&self, key: &'static str) -> Result<f64, ConfigError> {
        let (line, s) = self.require(key)?;
        self.f64_at(key, line, s)
    }

    fn optional_f64(&self, key: &'static str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some((line, s)) => Ok(Some(self.f64_at(key, line, s)?)),
        }
    }

    fn require_u64(&self, key: &'static str) -> Result<u64, ConfigError> {
        let (line, s) = self.require(key)?;
        s.parse().map_err(|_| ConfigError::Parse {
            line,
            key: key.into(),
            msg: format!("expected a non-negative integer, got `{s}`"),
        })
    }

    fn optional_u64(&self, key: &'static str) -> Result<Option<u64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some((line, s)) => s.parse().map(Some).map_err(|_| ConfigError::Parse {
                line,
                key: key.into(),
                msg: format!("expected a non-negative integer, got `{s}`"),
            }),
        }
    }

    /// Comma- or whitespace-separated numbers.
    fn require_numbers(&self, key: &'static str) -> Result<(usize, Vec<f64>), ConfigError> {
        let (line, s) = self.require(key)?;
        let mut out = Vec::new();
        for tok in s.split(|ch: char| ch == ',' || ch.is_whitespace()) {
            if tok.is_empty() {
                continue;
            }
            out.push(self.f64_at(key, line, tok)?);
        }
        Ok((line, out))
    }

    fn require_vector(&self, key: &'static str, n: usize) -> Result<DVector<f64>, ConfigError> {
        let (line, vals) = self.require_numbers(key)?;
        if vals.len() != n {
            return Err(ConfigError::Parse {
                line,
                key: key.into(),
                msg: format!("expected {n} entries, got {}", vals.len()),
            });
        }
        Ok(DVector::from_vec(vals))
    }

    /// Row-major square matrix with `n * n` entries.
    fn require_matrix(&self, key: &'static str, n: usize) -> Result<DMatrix<f64>, ConfigError> {
        let (line, vals) = self.require_numbers(key)?;
        if vals.len() != n * n {
            return Err(ConfigError::Parse {
                line,
                key: key.into(),
                msg: format!("expected {n}x{n} = {} entries, got {}", n * n, vals.len()),
            });
        }
        Ok(DMatrix::from_row_slice(n, n, &vals))
    }

    /// Errors on the first assignment the selected mode never read.
    fn reject_unused(&self, mode: Mode) -> Result<(), ConfigError> {
        let used = self.used.borrow();
        let mut unused: Vec<(usize, &str)> = self
            .entries
            .iter()
            .filter(|(k, _)| !used.contains(*k))
            .map(|(k, (line, _))| (*line, k.as_str()))
            .collect();
        unused.sort_unstable();
        if let Some(&(line, key)) = unused.first() {
            return Err(ConfigError::Parse {
                line,
                key: key.into(),
                msg: format!("key is not used in `{}` mode", mode.as_str()),
            });
        }
        Ok(())
    }
}

fn single_params(raw: &Raw, allow_homogeneous: bool) -> Result<SingleParams, ConfigError> {
    let p = SingleParams {
        d_bar: raw.require_f64("model.d_bar")?,
        sigma_d2: raw.require_f64("model.sigma_d2")?,
        sigma_s2: raw.require_f64("model.sigma_s2")?,
        sigma_theta2_true: raw.require_f64("model.sigma_theta2_true")?,
        sigma_theta2_informed: raw.require_f64("model.sigma_theta2_informed")?,
        alpha: raw.require_f64("model.alpha")?,
        pi: raw.require_f64("model.pi")?,
        riskless_supply: raw.optional_f64("model.riskless_supply")?.unwrap_or(0.0),
    };
    Ok(p.validate_with(PI_BOUNDS_DEFAULT, allow_homogeneous)?)
}

fn multi_params(raw: &Raw, allow_homogeneous: bool) -> Result<MultiParams, ConfigError> {
    let (n_line, n_str) = raw.require("model.n")?;
    let n: usize = n_str.parse().map_err(|_| ConfigError::Parse {
        line: n_line,
        key: "model.n".into(),
        msg: format!("expected a positive integer, got `{n_str}`"),
    })?;
    if n == 0 {
        return Err(ConfigError::Parse {
            line: n_line,
            key: "model.n".into(),
            msg: "asset count must be at least 1".into(),
        });
    }
    let p = MultiParams {
        n,
        d_bar: raw.require_vector("model.d_bar_vec", n)?,
        sigma_d: raw.require_matrix("model.sigma_d", n)?,
        sigma_s: raw.require_matrix("model.sigma_s", n)?,
        sigma_theta_true: raw.require_matrix("model.sigma_theta_true", n)?,
        sigma_theta_informed: raw.require_matrix("model.sigma_theta_informed", n)?,
        alpha: raw.require_f64("model.alpha")?,
        pi: raw.require_f64("model.pi")?,
    };
    Ok(p.validate_with(PI_BOUNDS_DEFAULT, allow_homogeneous)?)
}

fn sim_config(raw: &Raw) -> Result<SimConfig, ConfigError> {
    let n_paths = raw.require_u64("sim.n_paths")?;
    let cfg = SimConfig {
        n_paths,
        seed: raw.optional_u64("sim.seed")?.unwrap_or(0),
        batch_size: raw
            .optional_u64("sim.batch_size")?
            .unwrap_or_else(|| n_paths.min(4096).max(1)),
    };
    Ok(cfg.validate()?)
}

fn sweep_spec(raw: &Raw) -> Result<SweepSpec, ConfigError> {
    let (p_line, p_str) = raw.require("sweep.param")?;
    let param = SweepParam::from_str(p_str).ok_or_else(|| ConfigError::Parse {
        line: p_line,
        key: "sweep.param".into(),
        msg: format!("`{p_str}` is not a sweepable scalar model field"),
    })?;
    let (s_line, s_str) = raw.require("sweep.steps")?;
    let steps: u64 = s_str.parse().map_err(|_| ConfigError::Parse {
        line: s_line,
        key: "sweep.steps".into(),
        msg: format!("expected an integer, got `{s_str}`"),
    })?;
    if steps < 2 {
        return Err(ConfigError::Parse {
            line: s_line,
            key: "sweep.steps".into(),
            msg: "a sweep needs at least 2 grid points".into(),
        });
    }
    Ok(SweepSpec {
        param,
        from: raw.require_f64("sweep.from")?,
        to: raw.require_f64("sweep.to")?,
        steps,
    })
}

fn leadlag_spec(raw: &Raw, n: usize) -> Result<LeadLagSpec, ConfigError> {
    let (line, s) = raw.require("leadlag.muted")?;
    let mut muted = Vec::new();
    for tok in s.split(|ch: char| ch == ',' || ch.is_whitespace()) {
        if tok.is_empty() {
            continue;
        }
        let idx: usize = tok.parse().map_err(|_| ConfigError::Parse {
            line,
            key: "leadlag.muted".into(),
            msg: format!("expected an asset index, got `{tok}`"),
        })?;
        if idx == 0 {
            return Err(ConfigError::Parse {
                line,
                key: "leadlag.muted".into(),
                msg: "asset indices are 1-based".into(),
            });
        }
        muted.push(idx - 1);
    }
    muted.sort_unstable();
    muted.dedup();
    Ok(LeadLagSpec {
        muted,
        s_active: raw.require_vector("leadlag.s_active", n)?,
    })
}

fn output_spec(raw: &Raw, mode: Mode) -> Result<OutputSpec, ConfigError> {
    let format = match raw.get("output.format") {
        None => OutputFormat::Csv,
        Some((_, "csv")) => OutputFormat::Csv,
        Some((_, "json")) => OutputFormat::Json,
        Some((line, other)) => {
            return Err(ConfigError::Parse {
                line,
                key: "output.format".into(),
                msg: format!("expected `csv` or `json`, got `{other}`"),
            })
        }
    };
    let path = raw.get("output.path").map(|(_, s)| s.to_string());
    let chart = match raw.get("output.chart") {
        None => None,
        Some((line, s)) => {
            if mode != Mode::Sweep {
                return Err(ConfigError::Parse {
                    line,
                    key: "output.chart".into(),
                    msg: "charts are only available in `sweep` mode".into(),
                });
            }
            Some(s.to_string())
        }
    };
    Ok(OutputSpec { format, path, chart })
}

/// Parses and validates a config file. `allow_homogeneous` relaxes the
/// requirement that informed agents overstate the supply variance, letting
/// both groups share the true value.
pub fn parse_config(text: &str, allow_homogeneous: bool) -> Result<RunConfig, ConfigError> {
    let raw = Raw::parse(text)?;
    let (mode_line, mode_str) = raw.require("mode")?;
    let mode = Mode::from_str(mode_str).ok_or_else(|| ConfigError::Parse {
        line: mode_line,
        key: "mode".into(),
        msg: format!(
            "`{mode_str}` is not a mode (solve, measures, simulate, sweep, check, \
             multi-solve, multi-measures, multi-simulate, leadlag)"
        ),
    })?;

    let mut cfg = RunConfig {
        mode,
        single: None,
        multi: None,
        sim: None,
        sweep: None,
        leadlag: None,
        output: OutputSpec { format: OutputFormat::Csv, path: None, chart: None },
        dump_paths: None,
        allow_homogeneous,
    };

    match mode {
        Mode::Solve | Mode::Measures => {
            cfg.single = Some(single_params(&raw, allow_homogeneous)?);
        }
        Mode::Simulate => {
            cfg.single = Some(single_params(&raw, allow_homogeneous)?);
            cfg.sim = Some(sim_config(&raw)?);
            cfg.dump_paths = raw.get("sim.dump_paths").map(|(_, s)| s.to_string());
        }
        Mode::Sweep => {
            cfg.single = Some(single_params(&raw, allow_homogeneous)?);
            cfg.sweep = Some(sweep_spec(&raw)?);
        }
        Mode::Check => {}
        Mode::MultiSolve | Mode::MultiMeasures => {
            cfg.multi = Some(multi_params(&raw, allow_homogeneous)?);
        }
        Mode::MultiSimulate => {
            cfg.multi = Some(multi_params(&raw, allow_homogeneous)?);
            cfg.sim = Some(sim_config(&raw)?);
        }
        Mode::LeadLag => {
            let p = multi_params(&raw, allow_homogeneous)?;
            cfg.leadlag = Some(leadlag_spec(&raw, p.n)?);
            cfg.multi = Some(p);
        }
    }

    cfg.output = output_spec(&raw, mode)?;
    raw.reject_unused(mode)?;
    Ok(cfg)
}
