//! Run configuration: named presets and a strict flat-JSON file format.
//!
//! Keys are `name`, `N`, `s`, `Lambda`, `lambda`, `mu`, `psi`, `u_c`, `d_c`,
//! `theta0`, `v0`, `guess`, `max_iters`, `residual_tol`, `fd_step`,
//! `armijo_c`, `min_step`, `output_path` and `emit`. Missing keys take the
//! defaults of [`RunConfig::default`]. `null` for a bound means no bound.
//! `guess` is a generator name or an array of `N` velocities.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::nlsolve::SolverConfig;
use crate::spacecraft::{initial_guess, GuessKind, ProblemParams};

pub const PRESET_NAMES: [&str; 5] = ["S7minus", "S3", "S16", "S17", "UW4"];

const KEYS: [&str; 19] = [
    "name",
    "N",
    "s",
    "Lambda",
    "lambda",
    "mu",
    "psi",
    "u_c",
    "d_c",
    "theta0",
    "v0",
    "guess",
    "max_iters",
    "residual_tol",
    "fd_step",
    "armijo_c",
    "min_step",
    "output_path",
    "emit",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("bad value for `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("unknown preset `{0}` (known: S7minus, S3, S16, S17, UW4)")]
    UnknownPreset(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

/// Initial guess for the unknown velocities.
#[derive(Debug, Clone, PartialEq)]
pub enum Guess {
    Named(GuessKind),
    Explicit(Vec<f64>),
}

impl Guess {
    pub fn resolve(&self, params: &ProblemParams) -> Vec<f64> {
        match self {
            Guess::Named(kind) => initial_guess(*kind, params),
            Guess::Explicit(v) => v.clone(),
        }
    }
}

impl fmt::Display for Guess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Guess::Named(kind) => f.write_str(kind.name()),
            Guess::Explicit(v) => write!(f, "explicit[{}]", v.len()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Emit {
    Trajectory,
    Covectors,
    Certificates,
}

impl Emit {
    pub fn name(&self) -> &'static str {
        match self {
            Emit::Trajectory => "trajectory",
            Emit::Covectors => "covectors",
            Emit::Certificates => "certificates",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "trajectory" => Some(Emit::Trajectory),
            "covectors" => Some(Emit::Covectors),
            "certificates" => Some(Emit::Certificates),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Prefix of the output files.
    pub name: String,
    pub params: ProblemParams,
    pub guess: Guess,
    pub solver: SolverConfig,
    /// Output directory.
    pub output_path: String,
    pub emit: BTreeSet<Emit>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            name: "run".into(),
            params: ProblemParams::default(),
            guess: Guess::Named(GuessKind::Zero),
            solver: SolverConfig::default(),
            output_path: ".".into(),
            emit: [Emit::Trajectory, Emit::Covectors, Emit::Certificates]
                .into_iter()
                .collect(),
        }
    }
}

/// The five reference problems. S17 and UW4 share parameters and differ only
/// in the initial guess.
pub fn preset(name: &str) -> Option<RunConfig> {
    let (psi, v0, theta0, guess) = match name {
        "S7minus" => (0.3, 0.3, 0.3, GuessKind::Zero),
        "S3" => (0.2, 0.1, PI / 2.0, GuessKind::Zero),
        "S16" => (0.2, -0.1, PI / 2.0, GuessKind::Zero),
        "S17" => (0.3, -0.1, 4.0 * PI / 3.0, GuessKind::Geodesic),
        "UW4" => (0.3, -0.1, 4.0 * PI / 3.0, GuessKind::Drift),
        _ => return None,
    };
    Some(RunConfig {
        name: name.into(),
        params: ProblemParams {
            psi,
            v0,
            theta0,
            ..ProblemParams::default()
        },
        guess: Guess::Named(guess),
        ..RunConfig::default()
    })
}

/// A preset name or the path of a JSON file.
pub fn load_config(target: &str) -> Result<RunConfig, ConfigError> {
    if let Some(cfg) = preset(target) {
        return Ok(cfg);
    }
    let path = Path::new(target);
    if !path.exists() && !target.ends_with(".json") {
        return Err(ConfigError::UnknownPreset(target.into()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: target.into(),
        message: e.to_string(),
    })?;
    let mut cfg = parse_config(&text)?;
    if cfg.name == RunConfig::default().name {
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            cfg.name = stem.to_string();
        }
    }
    Ok(cfg)
}

fn field_err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.into(),
        message: message.into(),
    }
}

fn number(key: &str, v: &Value) -> Result<f64, ConfigError> {
    v.as_f64().ok_or_else(|| field_err(key, "expected a number"))
}

fn bound(key: &str, v: &Value) -> Result<f64, ConfigError> {
    match v {
        Value::Null => Ok(f64::INFINITY),
        Value::String(s) if s == "inf" => Ok(f64::INFINITY),
        _ => number(key, v),
    }
}

fn count(key: &str, v: &Value) -> Result<usize, ConfigError> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| field_err(key, "expected a non-negative integer"))
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let Value::Object(map) = value else {
        return Err(ConfigError::Parse {
            line: 1,
            column: 1,
            message: "expected a JSON object".into(),
        });
    };
    from_map(&map)
}

fn from_map(map: &Map<String, Value>) -> Result<RunConfig, ConfigError> {
    if let Some(bad) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(ConfigError::UnknownKey(bad.clone()));
    }
    let mut cfg = RunConfig::default();
    for (key, v) in map {
        let p = &mut cfg.params;
        let sv = &mut cfg.solver;
        match key.as_str() {
            "name" => {
                cfg.name = v
                    .as_str()
                    .filter(|s| !s.is_empty())
                    .ok_or_else(|| field_err(key, "expected a non-empty string"))?
                    .to_string()
            }
            "N" => p.n = count(key, v)?,
            "s" => p.s = number(key, v)?,
            "Lambda" => p.lambda_v = number(key, v)?,
            "lambda" => p.lambda_u = number(key, v)?,
            "mu" => p.mu = number(key, v)?,
            "psi" => p.psi = number(key, v)?,
            "u_c" => p.u_c = bound(key, v)?,
            "d_c" => p.d_c = bound(key, v)?,
            "theta0" => p.theta0 = number(key, v)?,
            "v0" => p.v0 = number(key, v)?,
            "max_iters" => sv.max_iters = count(key, v)?,
            "residual_tol" => sv.residual_tol = number(key, v)?,
            "fd_step" => sv.fd_step = number(key, v)?,
            "armijo_c" => sv.armijo_c = number(key, v)?,
            "min_step" => sv.min_step = number(key, v)?,
            "output_path" => {
                cfg.output_path = v
                    .as_str()
                    .ok_or_else(|| field_err(key, "expected a string"))?
                    .to_string()
            }
            "guess" => {
                cfg.guess = match v {
                    Value::String(s) => Guess::Named(
                        GuessKind::parse(s)
                            .ok_or_else(|| field_err(key, format!("unknown generator `{s}`")))?,
                    ),
                    Value::Array(items) => Guess::Explicit(
                        items
                            .iter()
                            .map(|x| number(key, x))
                            .collect::<Result<_, _>>()?,
                    ),
                    _ => return Err(field_err(key, "expected a name or an array")),
                }
            }
            "emit" => {
                let items = v
                    .as_array()
                    .ok_or_else(|| field_err(key, "expected an array of names"))?;
                cfg.emit = items
                    .iter()
                    .map(|x| {
                        x.as_str()
                            .and_then(Emit::parse)
                            .ok_or_else(|| field_err(key, format!("unknown output {x}")))
                    })
                    .collect::<Result<_, _>>()?;
            }
            _ => unreachable!("keys were checked above"),
        }
    }
    if let Guess::Explicit(g) = &cfg.guess {
        if g.len() != cfg.params.n {
            return Err(field_err(
                "guess",
                format!("expected {} values, got {}", cfg.params.n, g.len()),
            ));
        }
    }
    Ok(cfg)
}

fn num_value(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

/// Serializes to the flat format read by [`parse_config`].
pub fn config_to_json(cfg: &RunConfig) -> String {
    let p = &cfg.params;
    let s = &cfg.solver;
    let mut m = Map::new();
    m.insert("name".into(), Value::String(cfg.name.clone()));
    m.insert("N".into(), Value::from(p.n as u64));
    m.insert("s".into(), num_value(p.s));
    m.insert("Lambda".into(), num_value(p.lambda_v));
    m.insert("lambda".into(), num_value(p.lambda_u));
    m.insert("mu".into(), num_value(p.mu));
    m.insert("psi".into(), num_value(p.psi));
    m.insert("u_c".into(), num_value(p.u_c));
    m.insert("d_c".into(), num_value(p.d_c));
    m.insert("theta0".into(), num_value(p.theta0));
    m.insert("v0".into(), num_value(p.v0));
    m.insert(
        "guess".into(),
        match &cfg.guess {
            Guess::Named(kind) => Value::String(kind.name().into()),
            Guess::Explicit(v) => Value::Array(v.iter().map(|x| num_value(*x)).collect()),
        },
    );
    m.insert("max_iters".into(), Value::from(s.max_iters as u64));
    m.insert("residual_tol".into(), num_value(s.residual_tol));
    m.insert("fd_step".into(), num_value(s.fd_step));
    m.insert("armijo_c".into(), num_value(s.armijo_c));
    m.insert("min_step".into(), num_value(s.min_step));
    m.insert("output_path".into(), Value::String(cfg.output_path.clone()));
    m.insert(
        "emit".into(),
        Value::Array(cfg.emit.iter().map(|e| Value::String(e.name().into())).collect()),
    );
    serde_json::to_string_pretty(&Value::Object(m)).expect("plain JSON values serialize")
}
