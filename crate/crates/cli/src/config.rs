//! Settings merged from a flat `key = value` file, `ADIASPIN_*` environment
//! variables and command-line flags, in increasing order of precedence.
//!
//! Lists are comma separated. Flag triples are themselves comma separated,
//! so several of them are joined with `;`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use adiaspin::phase::BerryRoute;
use adiaspin::sweep::Metric;
use adiaspin::{CoefficientPair, Complex64, Level, TracerFlags};

pub const ENV_PREFIX: &str = "ADIASPIN_";

pub const KEYS: &[&str] = &[
    "theta",
    "ratio",
    "omega1",
    "flags",
    "solver",
    "periods",
    "samples",
    "out",
    "workers",
    "degrees",
    "initial",
    "metrics",
    "routes",
    "states",
    "wall-time",
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown config key '{key}' ({origin})")]
    UnknownKey { key: String, origin: String },
    #[error("{path}:{line}: expected 'key = value'")]
    Malformed { path: String, line: usize },
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid value for '{key}': {msg}")]
    Invalid { key: &'static str, msg: String },
    #[error("missing required setting '{0}'")]
    Missing(&'static str),
    #[error(transparent)]
    Domain(#[from] adiaspin::Error),
}

type Result<T, E = ConfigError> = std::result::Result<T, E>;

fn canonical_key(raw: &str, origin: &str) -> Result<&'static str> {
    let key = raw.trim().to_ascii_lowercase().replace('_', "-");
    KEYS.iter()
        .copied()
        .find(|k| *k == key)
        .ok_or_else(|| ConfigError::UnknownKey {
            key: raw.trim().to_string(),
            origin: origin.to_string(),
        })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<&'static str, String>,
}

impl Settings {
    pub fn parse_file_contents(text: &str, path: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Malformed {
                path: path.to_string(),
                line: i + 1,
            })?;
            values.insert(
                canonical_key(k, &format!("file {path}"))?,
                v.trim().to_string(),
            );
        }
        Ok(Self { values })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: name.clone(),
            source,
        })?;
        Self::parse_file_contents(&text, &name)
    }

    /// `ADIASPIN_THETA=...` and friends. `ADIASPIN_CONFIG` names the config
    /// file and is returned separately.
    pub fn from_env(
        vars: impl IntoIterator<Item = (String, String)>,
    ) -> Result<(Self, Option<PathBuf>)> {
        let mut values = BTreeMap::new();
        let mut config = None;
        for (name, value) in vars {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            if rest.eq_ignore_ascii_case("config") {
                config = Some(PathBuf::from(value));
                continue;
            }
            values.insert(
                canonical_key(rest, &format!("environment variable {name}"))?,
                value,
            );
        }
        Ok((Self { values }, config))
    }

    pub fn set(&mut self, key: &'static str, value: impl Into<String>) {
        debug_assert!(KEYS.contains(&key));
        self.values.insert(key, value.into());
    }

    /// Entries of `other` win.
    pub fn overlay(mut self, other: Settings) -> Self {
        self.values.extend(other.values);
        self
    }

    pub fn raw(&self, key: &'static str) -> Option<&str> {
        self.values
            .get(key)
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
    }

    fn invalid(key: &'static str, msg: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            key,
            msg: msg.into(),
        }
    }

    fn list(&self, key: &'static str) -> Option<Vec<&str>> {
        self.raw(key).map(|s| s.split(',').map(str::trim).collect())
    }

    pub fn flag(&self, key: &'static str) -> Result<bool> {
        match self.raw(key) {
            None => Ok(false),
            Some(v) => match v.to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" | "on" => Ok(true),
                "false" | "0" | "no" | "off" => Ok(false),
                _ => Err(Self::invalid(key, format!("'{v}' is not a boolean"))),
            },
        }
    }

    pub fn angles(&self, key: &'static str) -> Result<Vec<f64>> {
        let degrees = self.flag("degrees")?;
        self.list(key)
            .ok_or(ConfigError::Missing(key))?
            .into_iter()
            .map(|s| parse_angle(s, degrees).map_err(|m| Self::invalid(key, m)))
            .collect()
    }

    pub fn angle(&self, key: &'static str) -> Result<f64> {
        single(key, self.angles(key)?)
    }

    pub fn floats(&self, key: &'static str) -> Result<Vec<f64>> {
        self.list(key)
            .ok_or(ConfigError::Missing(key))?
            .into_iter()
            .map(|s| parse_float(s).map_err(|m| Self::invalid(key, m)))
            .collect()
    }

    pub fn float(&self, key: &'static str) -> Result<f64> {
        single(key, self.floats(key)?)
    }

    pub fn float_or(&self, key: &'static str, default: f64) -> Result<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some(_) => self.float(key),
        }
    }

    pub fn parsed_or<T: std::str::FromStr>(&self, key: &'static str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e: T::Err| Self::invalid(key, e.to_string())),
        }
    }

    pub fn parsed_list<T>(&self, key: &'static str, default: &[T]) -> Result<Vec<T>>
    where
        T: std::str::FromStr + Clone,
        T::Err: std::fmt::Display,
    {
        match self.list(key) {
            None => Ok(default.to_vec()),
            Some(items) => items
                .into_iter()
                .map(|s| {
                    s.parse()
                        .map_err(|e: T::Err| Self::invalid(key, e.to_string()))
                })
                .collect(),
        }
    }

    pub fn flags_list(&self) -> Result<Vec<TracerFlags>> {
        let Some(raw) = self.raw("flags") else {
            return Ok(vec![TracerFlags::FULL]);
        };
        raw.split(';').map(|s| parse_flags(s.trim())).collect()
    }

    pub fn flags(&self) -> Result<TracerFlags> {
        single("flags", self.flags_list()?)
    }

    pub fn metrics(&self) -> Result<Vec<Metric>> {
        self.parsed_list("metrics", &Metric::ALL)
    }

    pub fn routes(&self) -> Result<Vec<BerryRoute>> {
        self.parsed_list(
            "routes",
            &[BerryRoute::AdiabaticClosedForm, BerryRoute::ExactClosedForm],
        )
    }

    pub fn states(&self) -> Result<Vec<Level>> {
        match self.list("states") {
            None => Ok(Level::BOTH.to_vec()),
            Some(items) => items.into_iter().map(parse_level).collect(),
        }
    }

    pub fn initial(&self) -> Result<CoefficientPair> {
        let Some(raw) = self.raw("initial") else {
            return Ok(CoefficientPair::LOWER);
        };
        let c = match raw.to_ascii_lowercase().as_str() {
            "lower" | "1" => return Ok(CoefficientPair::LOWER),
            "upper" | "2" => return Ok(CoefficientPair::UPPER),
            _ => raw
                .split(',')
                .map(|s| parse_float(s.trim()))
                .collect::<std::result::Result<Vec<f64>, String>>()
                .map_err(|m| Self::invalid("initial", m))?,
        };
        if c.len() != 4 {
            return Err(Self::invalid(
                "initial",
                "expected lower, upper or re_c1,im_c1,re_c2,im_c2",
            ));
        }
        Ok(CoefficientPair::normalized(
            Complex64::new(c[0], c[1]),
            Complex64::new(c[2], c[3]),
            1e-10,
        )?)
    }
}

fn single<T>(key: &'static str, mut values: Vec<T>) -> Result<T> {
    if values.len() != 1 {
        return Err(Settings::invalid(key, "expected a single value"));
    }
    Ok(values.remove(0))
}

fn parse_float(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

/// Plain numbers, or multiples of π such as `pi/3`, `2pi/3`, `2*pi/3`.
/// With `degrees` only plain numbers are accepted and they are converted.
pub fn parse_angle(s: &str, degrees: bool) -> std::result::Result<f64, String> {
    let norm = s.trim().to_ascii_lowercase().replace('π', "pi");
    let Some((pre, post)) = norm.split_once("pi") else {
        let v = parse_float(&norm)?;
        return Ok(if degrees { v.to_radians() } else { v });
    };
    if degrees {
        return Err(format!(
            "'{s}' is a multiple of pi but angles are in degrees"
        ));
    }
    let pre = pre.trim().trim_end_matches('*').trim();
    let coef = match pre {
        "" => 1.0,
        "-" => -1.0,
        p => parse_float(p)?,
    };
    let post = post.trim();
    let div = match post.strip_prefix('/') {
        Some(d) => parse_float(d.trim())?,
        None if post.is_empty() => 1.0,
        None => return Err(format!("cannot parse angle '{s}'")),
    };
    if div == 0.0 {
        return Err(format!("'{s}' divides by zero"));
    }
    Ok(coef * PI / div)
}

pub fn parse_flags(s: &str) -> Result<TracerFlags> {
    let parts = s
        .split(',')
        .map(|p| parse_float(p.trim()))
        .collect::<std::result::Result<Vec<f64>, String>>()
        .map_err(|m| Settings::invalid("flags", m))?;
    match parts[..] {
        [a11, a22, a] => Ok(TracerFlags::new(a11, a22, a)?),
        _ => Err(Settings::invalid(
            "flags",
            format!("'{s}' is not a11,a22,a"),
        )),
    }
}

fn parse_level(s: &str) -> Result<Level> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "lower" => Ok(Level::Lower),
        "2" | "upper" => Ok(Level::Upper),
        _ => Err(Settings::invalid("states", format!("unknown state '{s}'"))),
    }
}
