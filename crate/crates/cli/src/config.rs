//! Experiment configuration: flat `key = value` text or a flat JSON object.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use dupnet::verify::{Suite, DEFAULT_SEED};
use dupnet::ModelParams;
use serde_json::Value;

pub const KEYS: [&str; 17] = [
    "kind",
    "lambda",
    "mu",
    "n",
    "f_n",
    "beta",
    "preset",
    "horizon",
    "h",
    "replicas",
    "seed",
    "out",
    "x0",
    "x1",
    "gamma",
    "y",
    "parallelism",
];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{0}` given twice")]
    Duplicate(String),
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("key `{key}`: expected {expected}, got `{got}`")]
    Type {
        key: &'static str,
        expected: &'static str,
        got: String,
    },
    #[error("key `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

impl ConfigError {
    fn invalid(key: &'static str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Simulate,
    Fluid,
    Critical,
    Decay,
    Verify(Option<Suite>),
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Simulate => f.write_str("simulate"),
            Kind::Fluid => f.write_str("fluid"),
            Kind::Critical => f.write_str("critical"),
            Kind::Decay => f.write_str("decay"),
            Kind::Verify(None) => f.write_str("verify:all"),
            Kind::Verify(Some(s)) => write!(f, "verify:{s}"),
        }
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "simulate" => Kind::Simulate,
            "fluid" => Kind::Fluid,
            "critical" => Kind::Critical,
            "decay" => Kind::Decay,
            _ => {
                let suite = s
                    .strip_prefix("verify:")
                    .ok_or_else(|| format!("unknown kind `{s}`"))?;
                if suite == "all" {
                    Kind::Verify(None)
                } else {
                    Kind::Verify(Some(suite.parse().map_err(|e| format!("{e}"))?))
                }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Option<Kind>,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub n: Option<u64>,
    pub f_n: Option<u64>,
    pub beta: Option<f64>,
    /// Only `critical`: sets `lambda = 2 mu f_n / n`.
    pub critical_preset: bool,
    pub horizon: Option<f64>,
    pub h: Option<f64>,
    pub replicas: Option<usize>,
    pub seed: u64,
    pub out: PathBuf,
    pub x0: u64,
    pub x1: u64,
    pub gamma: f64,
    pub y: f64,
    pub parallelism: Option<usize>,
    pub warnings: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: None,
            lambda: None,
            mu: None,
            n: None,
            f_n: None,
            beta: None,
            critical_preset: false,
            horizon: None,
            h: None,
            replicas: None,
            seed: DEFAULT_SEED,
            out: PathBuf::from("out"),
            x0: 0,
            x1: 0,
            gamma: 0.0,
            y: 0.0,
            parallelism: None,
            warnings: Vec::new(),
        }
    }
}

enum Raw {
    Text(String),
    Json(Value),
}

impl Raw {
    fn shown(&self) -> String {
        match self {
            Raw::Text(s) => s.clone(),
            Raw::Json(v) => v.to_string(),
        }
    }
}

fn real(key: &'static str, raw: &Raw) -> Result<f64, ConfigError> {
    let v = match raw {
        Raw::Text(s) => s.parse::<f64>().ok(),
        Raw::Json(v) => v.as_f64(),
    };
    v.filter(|v| v.is_finite()).ok_or_else(|| ConfigError::Type {
        key,
        expected: "a finite number",
        got: raw.shown(),
    })
}

fn count(key: &'static str, raw: &Raw) -> Result<u64, ConfigError> {
    let v = match raw {
        Raw::Text(s) => s.parse::<u64>().ok(),
        Raw::Json(v) => v.as_u64(),
    };
    v.ok_or_else(|| ConfigError::Type {
        key,
        expected: "a nonnegative integer",
        got: raw.shown(),
    })
}

fn string(key: &'static str, raw: &Raw) -> Result<String, ConfigError> {
    match raw {
        Raw::Text(s) => Ok(s.clone()),
        Raw::Json(Value::String(s)) => Ok(s.clone()),
        Raw::Json(v) => Err(ConfigError::Type {
            key,
            expected: "a string",
            got: v.to_string(),
        }),
    }
}

fn positive(key: &'static str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::invalid(key, format!("must be > 0, got {v}")))
    }
}

fn at_least_one(key: &'static str, v: u64) -> Result<u64, ConfigError> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(ConfigError::invalid(key, "must be at least 1"))
    }
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    for q in ['"', '\''] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            return &s[1..s.len() - 1];
        }
    }
    s
}

fn canonical(key: &str) -> Result<&'static str, ConfigError> {
    KEYS.iter()
        .find(|k| **k == key)
        .copied()
        .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))
}

fn entries(text: &str) -> Result<BTreeMap<&'static str, Raw>, ConfigError> {
    let mut map = BTreeMap::new();
    if text.trim_start().starts_with('{') {
        let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
            line: e.line(),
            reason: e.to_string(),
        })?;
        let Value::Object(obj) = value else {
            return Err(ConfigError::Syntax {
                line: 1,
                reason: "expected a JSON object".into(),
            });
        };
        for (k, v) in obj {
            if matches!(v, Value::Object(_) | Value::Array(_)) {
                return Err(ConfigError::Syntax {
                    line: 1,
                    reason: format!("key `{k}`: nested values are not supported"),
                });
            }
            map.insert(canonical(&k)?, Raw::Json(v));
        }
        return Ok(map);
    }
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .or_else(|| line.split_once(':'))
            .ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                reason: format!("expected `key = value`, got `{line}`"),
            })?;
        let key = canonical(unquote(k))?;
        let v = unquote(v.trim().trim_end_matches(','));
        if map.insert(key, Raw::Text(v.to_string())).is_some() {
            return Err(ConfigError::Duplicate(key.into()));
        }
    }
    Ok(map)
}

/// Parses and validates a configuration. When a `kind` is present the keys
/// it needs are checked as well.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let map = entries(text)?;
    let mut c = ExperimentConfig::default();
    for (&key, raw) in &map {
        match key {
            "kind" => c.kind = Some(string(key, raw)?.parse().map_err(|e: String| ConfigError::invalid(key, e))?),
            "lambda" => c.lambda = Some(positive(key, real(key, raw)?)?),
            "mu" => c.mu = Some(positive(key, real(key, raw)?)?),
            "beta" => c.beta = Some(positive(key, real(key, raw)?)?),
            "n" => c.n = Some(at_least_one(key, count(key, raw)?)?),
            "f_n" => c.f_n = Some(at_least_one(key, count(key, raw)?)?),
            "preset" => match string(key, raw)?.as_str() {
                "critical" => c.critical_preset = true,
                other => return Err(ConfigError::invalid(key, format!("unknown preset `{other}`"))),
            },
            "horizon" => {
                let v = real(key, raw)?;
                if v < 0.0 {
                    return Err(ConfigError::invalid(key, format!("must be >= 0, got {v}")));
                }
                c.horizon = Some(v);
            }
            "h" => c.h = Some(positive(key, real(key, raw)?)?),
            "replicas" => c.replicas = Some(at_least_one(key, count(key, raw)?)? as usize),
            "seed" => c.seed = count(key, raw)?,
            "out" => c.out = PathBuf::from(string(key, raw)?),
            "x0" => c.x0 = count(key, raw)?,
            "x1" => c.x1 = count(key, raw)?,
            "gamma" => c.gamma = real(key, raw)?,
            "y" => {
                let v = real(key, raw)?;
                if v < 0.0 {
                    return Err(ConfigError::invalid(key, format!("must be >= 0, got {v}")));
                }
                c.y = v;
            }
            "parallelism" => c.parallelism = Some(at_least_one(key, count(key, raw)?)? as usize),
            _ => unreachable!("keys are canonicalized"),
        }
    }
    if c.f_n.is_some() && c.beta.is_some() {
        c.beta = None;
        c.warnings.push("both `f_n` and `beta` given; `beta` is ignored".into());
    }
    if c.critical_preset && c.lambda.is_some() {
        return Err(ConfigError::invalid("lambda", "cannot be combined with preset = critical"));
    }
    if let Some(kind) = c.kind {
        c.validate(kind)?;
    }
    Ok(c)
}

impl ExperimentConfig {
    /// Checks that everything `kind` needs is present and consistent.
    pub fn validate(&self, kind: Kind) -> Result<(), ConfigError> {
        match kind {
            Kind::Simulate => {
                self.horizon()?;
                let p = self.model_params()?;
                p.check_state(dupnet::NetworkState::new(self.x0, self.x1))
                    .map_err(|e| ConfigError::invalid("x0", e.to_string()))?;
            }
            Kind::Fluid | Kind::Decay => {
                self.horizon()?;
                self.fluid_params()?;
            }
            Kind::Critical => {
                self.horizon()?;
                self.critical_lambda()?;
                if self.replicas.is_some_and(|r| r < 2) {
                    return Err(ConfigError::invalid("replicas", "the critical ensemble needs at least 2 paths"));
                }
            }
            Kind::Verify(_) => {}
        }
        Ok(())
    }

    pub fn horizon(&self) -> Result<f64, ConfigError> {
        self.horizon.ok_or(ConfigError::Missing("horizon"))
    }

    fn mu(&self) -> Result<f64, ConfigError> {
        self.mu.ok_or(ConfigError::Missing("mu"))
    }

    fn files(&self) -> Result<u64, ConfigError> {
        let n = self.n.ok_or(ConfigError::Missing("n"))?;
        match (self.f_n, self.beta) {
            (Some(f), _) => Ok(f),
            (None, Some(b)) => {
                let f = (b * n as f64).floor() as u64;
                if f == 0 {
                    return Err(ConfigError::invalid("beta", "beta * n must be at least 1"));
                }
                Ok(f)
            }
            (None, None) => Err(ConfigError::Missing("f_n")),
        }
    }

    /// Network parameters; `f_n` wins over `beta`.
    pub fn model_params(&self) -> Result<ModelParams, ConfigError> {
        let mu = self.mu()?;
        let n = self.n.ok_or(ConfigError::Missing("n"))?;
        let f_n = self.files()?;
        let p = if self.critical_preset {
            ModelParams::critical(mu, n, f_n)
        } else {
            ModelParams::new(self.lambda.ok_or(ConfigError::Missing("lambda"))?, mu, n, f_n)
        };
        p.map_err(param_error)
    }

    /// `(beta, lambda, mu)` for the limit curves, which do not need `n`
    /// when `beta` is given.
    pub fn fluid_params(&self) -> Result<(f64, f64, f64), ConfigError> {
        let mu = self.mu()?;
        let beta = match (self.beta, self.n) {
            (Some(b), _) if self.f_n.is_none() => b,
            (_, Some(n)) => self.files()? as f64 / n as f64,
            _ => return Err(ConfigError::Missing("beta")),
        };
        let lambda = if self.critical_preset {
            2.0 * mu * beta
        } else {
            self.lambda.ok_or(ConfigError::Missing("lambda"))?
        };
        Ok((beta, lambda, mu))
    }

    fn critical_lambda(&self) -> Result<f64, ConfigError> {
        if self.critical_preset {
            Ok(self.fluid_params()?.1)
        } else {
            self.lambda.ok_or(ConfigError::Missing("lambda"))
        }
    }

    pub fn critical_params(&self) -> Result<dupnet::critical::CriticalParams, ConfigError> {
        dupnet::critical::CriticalParams::new(self.critical_lambda()?, self.mu()?, self.gamma, self.y).map_err(param_error)
    }
}

fn param_error(e: dupnet::Error) -> ConfigError {
    match e {
        dupnet::Error::InvalidParam { name, reason } => ConfigError::Invalid { key: name, reason },
        other => ConfigError::invalid("config", other.to_string()),
    }
}
