//! Flat `key = value` run configuration.
//!
//! Values are layered: built-in defaults, then `KKNLED_OUT` for the output
//! directory, then the config file, then `--set` pairs, then dedicated
//! command-line flags. Every key is checked against the subcommand's schema.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub const OUT_ENV: &str = "KKNLED_OUT";
pub const DEFAULT_OUT: &str = "kknled-out";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: expected `key = value`, found `{text}`")]
    Syntax { origin: String, text: String },
    #[error("{origin}: unknown key `{key}` for `{subcommand}`")]
    UnknownKey { origin: String, key: String, subcommand: Subcommand },
    #[error("{origin}: key `{key}` expects {expected}, found `{found}`")]
    TypeMismatch { origin: String, key: String, expected: Kind, found: String },
    #[error("missing required key `{key}` for `{subcommand}`")]
    MissingKey { key: String, subcommand: Subcommand },
    #[error("{origin}: key `{key}` given twice")]
    Duplicate { origin: String, key: String },
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Subcommand {
    CurvatureCheck,
    Evolve,
    Static,
    Asymptotics,
    Legendre,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::CurvatureCheck => "curvature-check",
            Subcommand::Evolve => "evolve",
            Subcommand::Static => "static",
            Subcommand::Asymptotics => "asymptotics",
            Subcommand::Legendre => "legendre",
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    UInt,
    Float,
    Bool,
    Text,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::UInt => "a non-negative integer",
            Kind::Float => "a number",
            Kind::Bool => "true or false",
            Kind::Text => "text",
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Fallback {
    Value(&'static str),
    Required,
    /// Absent unless given.
    Unset,
}

#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub name: &'static str,
    pub kind: Kind,
    pub fallback: Fallback,
}

const fn key(name: &'static str, kind: Kind, default: &'static str) -> KeySpec {
    KeySpec { name, kind, fallback: Fallback::Value(default) }
}

const COMMON: &[KeySpec] = &[
    key("out", Kind::Text, DEFAULT_OUT),
    key("seed", Kind::UInt, "0"),
    // 0 lets the pool pick one thread per core
    key("threads", Kind::UInt, "0"),
];

const CURVATURE: &[KeySpec] = &[key("draws", Kind::UInt, "100"), key("amplitude", Kind::Float, "2")];

const EVOLVE: &[KeySpec] = &[
    key("scenario", Kind::Text, "plane_wave"),
    key("nx", Kind::UInt, "64"),
    key("ny", Kind::UInt, "64"),
    key("nz", Kind::UInt, "64"),
    key("lx", Kind::Float, "1"),
    key("ly", Kind::Float, "1"),
    key("lz", Kind::Float, "1"),
    key("cfl", Kind::Float, "0.4"),
    KeySpec { name: "dt", kind: Kind::Float, fallback: Fallback::Unset },
    key("steps", Kind::UInt, "160"),
    key("stencil", Kind::Text, "fourth"),
    key("epsilon", Kind::Float, "1"),
    key("e2", Kind::Float, "1"),
    key("amplitude", Kind::Float, "0.5"),
    key("width", Kind::Float, "0.1"),
    key("ratio", Kind::Float, "1"),
    key("modes", Kind::UInt, "1"),
    key("tube", Kind::Bool, "false"),
    key("flip_e", Kind::Bool, "false"),
    key("flip_b", Kind::Bool, "false"),
    key("cadence", Kind::UInt, "10"),
    key("snapshot_every", Kind::UInt, "0"),
    KeySpec { name: "origin_x", kind: Kind::Float, fallback: Fallback::Unset },
    KeySpec { name: "origin_y", kind: Kind::Float, fallback: Fallback::Unset },
    KeySpec { name: "origin_z", kind: Kind::Float, fallback: Fallback::Unset },
];

const STATIC: &[KeySpec] = &[
    key("modes", Kind::Text, "P/cos/1/1"),
    key("g_profile", Kind::Text, "tanh_sech"),
    key("g_amplitude", Kind::Float, "0.05"),
    key("a", Kind::Float, "1"),
    key("epsilon", Kind::Float, "1"),
    key("e2", Kind::Float, "1"),
    key("mu_min", Kind::Float, "1e-4"),
    key("mu_max", Kind::Float, "8"),
    key("mu_points", Kind::UInt, "400"),
    key("eta_points", Kind::UInt, "64"),
    key("n_max", Kind::UInt, "8"),
    key("iterations", Kind::UInt, "5"),
    key("profile_mu", Kind::Float, "1"),
    key("profile_samples", Kind::UInt, "64"),
];

const ASYMPTOTICS: &[KeySpec] = &[
    KeySpec { name: "qtotal", kind: Kind::Float, fallback: Fallback::Required },
    KeySpec { name: "mu", kind: Kind::Float, fallback: Fallback::Required },
    key("rmin", Kind::Float, "1"),
    key("rmax", Kind::Float, "10"),
    key("samples", Kind::UInt, "20"),
    key("theta", Kind::Float, "0.7853981633974483"),
    key("e2", Kind::Float, "1"),
];

const LEGENDRE: &[KeySpec] = &[
    key("n_max", Kind::UInt, "4"),
    key("mu_min", Kind::Float, "0.1"),
    key("mu_max", Kind::Float, "4"),
    key("mu_points", Kind::UInt, "16"),
];

pub fn schema(sub: Subcommand) -> impl Iterator<Item = &'static KeySpec> {
    let own = match sub {
        Subcommand::CurvatureCheck => CURVATURE,
        Subcommand::Evolve => EVOLVE,
        Subcommand::Static => STATIC,
        Subcommand::Asymptotics => ASYMPTOTICS,
        Subcommand::Legendre => LEGENDRE,
    };
    COMMON.iter().chain(own.iter())
}

fn lookup(sub: Subcommand, name: &str) -> Option<&'static KeySpec> {
    schema(sub).find(|k| k.name == name)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    UInt(u64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::UInt(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v:?}"),
            Value::Bool(v) => write!(f, "{v}"),
            Value::Text(v) => f.write_str(v),
        }
    }
}

fn parse_value(kind: Kind, raw: &str) -> Option<Value> {
    match kind {
        Kind::UInt => raw.parse().ok().map(Value::UInt),
        Kind::Float => raw.parse::<f64>().ok().filter(|v| v.is_finite()).map(Value::Float),
        Kind::Bool => raw.parse().ok().map(Value::Bool),
        Kind::Text => Some(Value::Text(raw.to_string())),
    }
}

/// One `key = value` pair with a description of where it came from.
#[derive(Debug, Clone)]
pub struct Assignment {
    pub origin: String,
    pub key: String,
    pub value: String,
}

/// Splits `key = value`; whitespace around both parts is ignored.
pub fn split_pair(text: &str, origin: &str) -> Result<Assignment, ConfigError> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| ConfigError::Syntax { origin: origin.to_string(), text: text.to_string() })?;
    let k = k.trim();
    if k.is_empty() {
        return Err(ConfigError::Syntax { origin: origin.to_string(), text: text.to_string() });
    }
    Ok(Assignment { origin: origin.to_string(), key: k.to_string(), value: v.trim().to_string() })
}

/// Parses config text. `#` starts a comment; blank lines are skipped.
pub fn parse_text(text: &str, source: &str) -> Result<Vec<Assignment>, ConfigError> {
    let mut out: Vec<Assignment> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let origin = format!("{source}:{}", i + 1);
        let a = split_pair(body, &origin)?;
        if out.iter().any(|b| b.key == a.key) {
            return Err(ConfigError::Duplicate { origin, key: a.key });
        }
        out.push(a);
    }
    Ok(out)
}

pub fn read_file(path: &Path) -> Result<Vec<Assignment>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
    parse_text(&text, &path.display().to_string())
}

/// A fully resolved, validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    values: BTreeMap<&'static str, Value>,
}

impl RunConfig {
    /// Applies `layers` in order over the defaults. `env_out` stands in for
    /// the `KKNLED_OUT` variable.
    pub fn resolve(sub: Subcommand, env_out: Option<&str>, layers: &[Assignment]) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for spec in schema(sub) {
            if let Fallback::Value(d) = spec.fallback {
                values.insert(spec.name, parse_value(spec.kind, d).expect("schema defaults parse"));
            }
        }
        if let Some(out) = env_out.filter(|s| !s.is_empty()) {
            values.insert("out", Value::Text(out.to_string()));
        }
        for a in layers {
            let spec = lookup(sub, &a.key).ok_or_else(|| ConfigError::UnknownKey {
                origin: a.origin.clone(),
                key: a.key.clone(),
                subcommand: sub,
            })?;
            let v = parse_value(spec.kind, &a.value).ok_or_else(|| ConfigError::TypeMismatch {
                origin: a.origin.clone(),
                key: a.key.clone(),
                expected: spec.kind,
                found: a.value.clone(),
            })?;
            values.insert(spec.name, v);
        }
        for spec in schema(sub) {
            if matches!(spec.fallback, Fallback::Required) && !values.contains_key(spec.name) {
                return Err(ConfigError::MissingKey { key: spec.name.to_string(), subcommand: sub });
            }
        }
        Ok(Self { subcommand: sub, values })
    }

    fn get(&self, key: &str) -> Option<&Value> {
        debug_assert!(lookup(self.subcommand, key).is_some(), "key `{key}` not in schema");
        self.values.get(key)
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.opt_f64(key).unwrap_or_else(|| panic!("`{key}` has no value"))
    }

    pub fn opt_f64(&self, key: &str) -> Option<f64> {
        match self.get(key)? {
            Value::Float(v) => Some(*v),
            other => panic!("`{key}` is not a float: {other:?}"),
        }
    }

    pub fn u64(&self, key: &str) -> u64 {
        match self.get(key) {
            Some(Value::UInt(v)) => *v,
            other => panic!("`{key}` is not an integer: {other:?}"),
        }
    }

    pub fn usize(&self, key: &str) -> usize {
        self.u64(key) as usize
    }

    pub fn bool(&self, key: &str) -> bool {
        match self.get(key) {
            Some(Value::Bool(v)) => *v,
            other => panic!("`{key}` is not a flag: {other:?}"),
        }
    }

    pub fn text(&self, key: &str) -> &str {
        match self.get(key) {
            Some(Value::Text(v)) => v,
            other => panic!("`{key}` is not text: {other:?}"),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.text("out"))
    }

    pub fn seed(&self) -> u64 {
        self.u64("seed")
    }

    pub fn threads(&self) -> usize {
        self.usize("threads")
    }

    /// Resolved pairs in key order.
    pub fn entries(&self) -> impl Iterator<Item = (&'static str, &Value)> {
        self.values.iter().map(|(k, v)| (*k, v))
    }
}
