//! Experiment configuration: a flat `key = value` text format.
//!
//! ```text
//! # accept-sized instance
//! users = 4
//! rx_antennas = 4
//! tx_antennas = 2
//! algorithm = mxl0, mxl0_plus
//! iterations = 10000
//! seeds = 1, 2, 3
//! ```

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::network::{generate_channels, ChannelRealization};
use crate::optimizers::{HorizonVariant, StepPolicy, UpdateLaw};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Mxl,
    Mxl0,
    Mxl0Plus,
    Amxl0Plus,
    Iwf,
    Swf,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Mxl,
        Algorithm::Mxl0,
        Algorithm::Mxl0Plus,
        Algorithm::Amxl0Plus,
        Algorithm::Iwf,
        Algorithm::Swf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Mxl => "mxl",
            Algorithm::Mxl0 => "mxl0",
            Algorithm::Mxl0Plus => "mxl0_plus",
            Algorithm::Amxl0Plus => "amxl0_plus",
            Algorithm::Iwf => "iwf",
            Algorithm::Swf => "swf",
        }
    }

    /// Whether the algorithm uses a step policy and random streams.
    pub fn is_learning(self) -> bool {
        matches!(
            self,
            Algorithm::Mxl | Algorithm::Mxl0 | Algorithm::Mxl0Plus | Algorithm::Amxl0Plus
        )
    }

    pub fn is_zeroth_order(self) -> bool {
        matches!(self, Algorithm::Mxl0 | Algorithm::Mxl0Plus | Algorithm::Amxl0Plus)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}`"))
    }
}

/// Schedule family as written in a configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolicyFamily {
    PowerLaw,
    /// Horizon-tuned constants with the exponents matched to the algorithm:
    /// `(3/4, 1/4)` for plain SPSA, `(1/2, 1/2)` otherwise.
    Horizon,
    HorizonSqrt,
    HorizonSpsa,
}

impl FromStr for PolicyFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "power_law" => Ok(PolicyFamily::PowerLaw),
            "horizon" => Ok(PolicyFamily::Horizon),
            "horizon_sqrt" => Ok(PolicyFamily::HorizonSqrt),
            "horizon_spsa" => Ok(PolicyFamily::HorizonSpsa),
            _ => Err(format!(
                "unknown policy family `{s}` (expected power_law, horizon, horizon_sqrt or horizon_spsa)"
            )),
        }
    }
}

/// Step-policy parameters. Unset constants fall back to per-algorithm
/// defaults, an unset horizon to the iteration count.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicySpec {
    pub family: PolicyFamily,
    pub gamma0: Option<f64>,
    pub delta0: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub horizon: Option<usize>,
}

impl Default for PolicySpec {
    fn default() -> Self {
        Self {
            family: PolicyFamily::Horizon,
            gamma0: None,
            delta0: None,
            alpha: 0.9,
            beta: 0.3,
            horizon: None,
        }
    }
}

/// Default `(gamma0, delta0)` for an algorithm and family.
pub fn default_constants(algorithm: Algorithm, family: PolicyFamily) -> (f64, f64) {
    match (algorithm, family) {
        (Algorithm::Mxl, _) => (1.0, 0.0),
        (_, PolicyFamily::PowerLaw) => (1.0, 0.25),
        (Algorithm::Mxl0, PolicyFamily::Horizon) | (_, PolicyFamily::HorizonSpsa) => (10.0, 3.5),
        _ => (3.0, 3.0),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub users: usize,
    pub rx_antennas: usize,
    /// One entry per user.
    pub tx_antennas: Vec<usize>,
    pub channel_scale: f64,
    /// Seed of the channel draw; run seeds only drive the algorithms.
    pub channel_seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub policy: PolicySpec,
    pub update_law: UpdateLaw,
    pub iterations: usize,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    /// Report rates in bits instead of nats.
    pub report_bits: bool,
    /// Fill the `elapsed_ns` CSV column with wall-clock times; off by
    /// default so that outputs are reproducible byte for byte.
    pub record_timing: bool,
}

pub const DEFAULT_CHANNEL_SEED: u64 = 42;
pub const DEFAULT_OUTPUT: &str = "results";

impl ExperimentConfig {
    /// Every user's antenna count.
    pub fn antennas(&self) -> &[usize] {
        &self.tx_antennas
    }

    /// Channel realization shared by all seeds.
    pub fn channels(&self) -> Result<ChannelRealization> {
        generate_channels(
            self.users,
            self.rx_antennas,
            &self.tx_antennas,
            &vec![1.0; self.users],
            self.channel_scale,
            self.channel_seed,
        )
    }

    /// Resolved step policy of `algorithm` for a run of `iterations` steps.
    pub fn step_policy(&self, algorithm: Algorithm) -> StepPolicy {
        let p = &self.policy;
        let (g, d) = default_constants(algorithm, p.family);
        let gamma0 = p.gamma0.unwrap_or(g);
        let delta0 = p.delta0.unwrap_or(d);
        let horizon = p.horizon.unwrap_or(self.iterations);
        let variant = match p.family {
            PolicyFamily::PowerLaw => return StepPolicy::power_law(gamma0, delta0, p.alpha, p.beta),
            PolicyFamily::HorizonSqrt => HorizonVariant::Sqrt,
            PolicyFamily::HorizonSpsa => HorizonVariant::Spsa,
            PolicyFamily::Horizon if algorithm == Algorithm::Mxl0 => HorizonVariant::Spsa,
            PolicyFamily::Horizon => HorizonVariant::Sqrt,
        };
        StepPolicy::horizon(gamma0, delta0, horizon, variant)
    }

    /// Checks field invariants.
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 {
            return Err(Error::config("users", "must be positive"));
        }
        if self.rx_antennas == 0 {
            return Err(Error::config("rx_antennas", "must be positive"));
        }
        if self.tx_antennas.len() != self.users {
            return Err(Error::config(
                "tx_antennas",
                format!("{} entries for {} users", self.tx_antennas.len(), self.users),
            ));
        }
        if let Some(&m) = self.tx_antennas.iter().find(|&&m| m < 2) {
            return Err(Error::config(
                "tx_antennas",
                format!("every user needs at least two antennas, got {m}"),
            ));
        }
        if !(self.channel_scale > 0.0 && self.channel_scale.is_finite()) {
            return Err(Error::config("channel_scale", "must be finite and positive"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::config("algorithm", "at least one algorithm is required"));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations", "must be positive"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        let mut seen = HashSet::new();
        if let Some(s) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(Error::config("seeds", format!("seed {s} is listed twice")));
        }
        if self.policy.horizon == Some(0) {
            return Err(Error::config("policy.horizon", "must be positive"));
        }
        for &a in &self.algorithms {
            if a.is_learning() {
                self.step_policy(a).check()?;
            }
        }
        if self.algorithms.contains(&Algorithm::Amxl0Plus) {
            self.update_law
                .check(self.users)
                .map_err(|e| Error::config("update_law.p", e.to_string()))?;
        }
        Ok(())
    }
}

const KEYS: [&str; 18] = [
    "users",
    "rx_antennas",
    "tx_antennas",
    "channel_scale",
    "channel_seed",
    "algorithm",
    "policy.family",
    "policy.gamma0",
    "policy.delta0",
    "policy.alpha",
    "policy.beta",
    "policy.horizon",
    "update_law",
    "update_law.p",
    "iterations",
    "seeds",
    "output",
    "report_bits",
];

const EXTRA_KEYS: [&str; 1] = ["record_timing"];

const REQUIRED: [&str; 6] = ["users", "rx_antennas", "tx_antennas", "algorithm", "iterations", "seeds"];

fn parse_value<T: FromStr>(field: &str, raw: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    raw.parse::<T>()
        .map_err(|e| Error::config(field, format!("cannot parse `{raw}`: {e}")))
}

fn parse_list<T: FromStr>(field: &str, raw: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    raw.split(',').map(|s| parse_value(field, s.trim())).collect()
}

fn parse_bool(field: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(field, format!("expected true or false, got `{raw}`"))),
    }
}

/// Splits the text into `(line number, key, value)` triples, rejecting
/// malformed lines, unknown keys and duplicates.
fn tokenize(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty key".into(),
            });
        }
        if !KEYS.contains(&key) && !EXTRA_KEYS.contains(&key) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("unknown key `{key}`"),
            });
        }
        if value.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("missing value for `{key}`"),
            });
        }
        if !seen.insert(key.to_string()) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate key `{key}`"),
            });
        }
        out.push((line_no, key.to_string(), value.to_string()));
    }
    Ok(out)
}

/// Parses configuration text. Keys present override `base`; without a base
/// the required keys must all be present and the rest take defaults.
pub fn parse_config_str(text: &str, base: Option<ExperimentConfig>) -> Result<ExperimentConfig> {
    let entries = tokenize(text)?;
    if base.is_none() {
        for req in REQUIRED {
            if !entries.iter().any(|(_, k, _)| k == req) {
                return Err(Error::config(req, "required key is missing"));
            }
        }
    }
    let mut cfg = base.unwrap_or_else(|| ExperimentConfig {
        users: 0,
        rx_antennas: 0,
        tx_antennas: Vec::new(),
        channel_scale: 1.0,
        channel_seed: DEFAULT_CHANNEL_SEED,
        algorithms: Vec::new(),
        policy: PolicySpec::default(),
        update_law: UpdateLaw::Full,
        iterations: 0,
        seeds: Vec::new(),
        output: PathBuf::from(DEFAULT_OUTPUT),
        report_bits: false,
        record_timing: false,
    });

    let mut tx_raw: Option<String> = None;
    let mut law_raw: Option<String> = None;
    let mut law_p: Option<Vec<f64>> = None;
    for (_, key, value) in &entries {
        let v = value.as_str();
        match key.as_str() {
            "users" => cfg.users = parse_value(key, v)?,
            "rx_antennas" => cfg.rx_antennas = parse_value(key, v)?,
            "tx_antennas" => tx_raw = Some(v.to_string()),
            "channel_scale" => cfg.channel_scale = parse_value(key, v)?,
            "channel_seed" => cfg.channel_seed = parse_value(key, v)?,
            "algorithm" => {
                cfg.algorithms = parse_list(key, v)?;
                let mut seen = HashSet::new();
                if cfg.algorithms.iter().any(|a| !seen.insert(*a)) {
                    return Err(Error::config(key, "an algorithm is listed twice"));
                }
            }
            "policy.family" => cfg.policy.family = parse_value(key, v)?,
            "policy.gamma0" => cfg.policy.gamma0 = Some(parse_value(key, v)?),
            "policy.delta0" => cfg.policy.delta0 = Some(parse_value(key, v)?),
            "policy.alpha" => cfg.policy.alpha = parse_value(key, v)?,
            "policy.beta" => cfg.policy.beta = parse_value(key, v)?,
            "policy.horizon" => cfg.policy.horizon = Some(parse_value(key, v)?),
            "update_law" => law_raw = Some(v.to_string()),
            "update_law.p" => law_p = Some(parse_list(key, v)?),
            "iterations" => cfg.iterations = parse_value(key, v)?,
            "seeds" => cfg.seeds = parse_list(key, v)?,
            "output" => cfg.output = PathBuf::from(v),
            "report_bits" => cfg.report_bits = parse_bool(key, v)?,
            "record_timing" => cfg.record_timing = parse_bool(key, v)?,
            _ => unreachable!("tokenize rejects unknown keys"),
        }
    }

    if let Some(raw) = tx_raw {
        let list: Vec<usize> = parse_list("tx_antennas", &raw)?;
        cfg.tx_antennas = if list.len() == 1 {
            vec![list[0]; cfg.users]
        } else {
            list
        };
    } else if cfg.tx_antennas.len() != cfg.users && !cfg.tx_antennas.is_empty() {
        // A preset overridden with a new user count keeps its uniform antenna count.
        let m = cfg.tx_antennas[0];
        if cfg.tx_antennas.iter().all(|&x| x == m) {
            cfg.tx_antennas = vec![m; cfg.users];
        }
    }

    if let Some(raw) = law_raw.as_deref() {
        cfg.update_law = match (raw, law_p) {
            ("full", None) => UpdateLaw::Full,
            ("uniform_single", None) => UpdateLaw::UniformSingle,
            ("bernoulli", Some(p)) if p.len() == 1 => UpdateLaw::Bernoulli(vec![p[0]; cfg.users]),
            ("bernoulli", Some(p)) => UpdateLaw::Bernoulli(p),
            ("bernoulli", None) => {
                return Err(Error::config("update_law.p", "bernoulli needs per-user probabilities"))
            }
            ("full" | "uniform_single", Some(_)) => {
                return Err(Error::config("update_law.p", "probabilities only apply to bernoulli"))
            }
            (other, _) => {
                return Err(Error::config(
                    "update_law",
                    format!("unknown law `{other}` (expected full, uniform_single or bernoulli)"),
                ))
            }
        };
    } else if law_p.is_some() {
        return Err(Error::config("update_law.p", "probabilities only apply to bernoulli"));
    }

    cfg.validate()?;
    Ok(cfg)
}

/// Reads and parses a configuration file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config_with_base(path, None)
}

pub fn parse_config_with_base(path: &Path, base: Option<ExperimentConfig>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, base)
}

pub const PRESETS: [&str; 3] = ["accept", "fig1_desk", "fig3_desk"];

/// Built-in configurations.
///
/// - `accept`: 4 users with 2 antennas, 4 receive antennas, channel scale
///   0.3; zeroth-order learning with and without offset over five seeds.
/// - `fig1_desk`: 8 users, 16 receive antennas; full-information learning
///   against both water-filling schemes, plus the zeroth-order pair.
/// - `fig3_desk`: 20 users, 16 receive antennas; the zeroth-order pair.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    use Algorithm::*;
    let (users, rx, scale, algorithms, iterations, seeds): (usize, usize, f64, Vec<Algorithm>, usize, Vec<u64>) =
        match name {
            "accept" => (4, 4, 0.3, vec![Mxl0, Mxl0Plus], 10_000, (1..=5).collect()),
            "fig1_desk" => (8, 16, 0.1, vec![Mxl, Iwf, Swf, Mxl0, Mxl0Plus], 2_000, vec![1]),
            "fig3_desk" => (20, 16, 0.1, vec![Mxl0, Mxl0Plus], 10_000, vec![1, 2, 3]),
            _ => {
                return Err(Error::config(
                    "preset",
                    format!("unknown preset `{name}` (expected one of {})", PRESETS.join(", ")),
                ))
            }
        };
    let cfg = ExperimentConfig {
        users,
        rx_antennas: rx,
        tx_antennas: vec![2; users],
        channel_scale: scale,
        channel_seed: DEFAULT_CHANNEL_SEED,
        algorithms,
        policy: PolicySpec::default(),
        update_law: UpdateLaw::Full,
        iterations,
        seeds,
        output: PathBuf::from(DEFAULT_OUTPUT).join(name),
        report_bits: false,
        record_timing: false,
    };
    cfg.validate()?;
    Ok(cfg)
}
