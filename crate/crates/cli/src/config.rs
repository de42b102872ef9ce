//! Scenario configuration: a TOML file of flat sections, plus grid syntax for sweep axes.
//!
//! ```toml
//! seed = 7
//! [protocol]
//! mu = 1.0
//! phi = "pi"
//! [grid]
//! phi = "lin(0, 2pi, 33)"
//! mu = [0.5, 1.0, 1.5]
//! ```
//!
//! Numbers may be written as TOML numbers or as strings with a `pi` factor (`"pi"`,
//! `"2pi"`, `"-pi/2"`, `"3*pi/4"`). A grid is a scalar, an array, a comma list,
//! `lin(start, stop, n)` (inclusive, evenly spaced) or `log(start, stop, n)` (geometric).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use crate::CliError;

/// Every key a config file may set, as `section.key` (top-level keys have no section).
const KNOWN_KEYS: &[&str] = &[
    "seed",
    "protocol.mu",
    "protocol.phi",
    "protocol.nbar",
    "protocol.configuration",
    "environment.omega_m",
    "environment.q",
    "environment.nbar_bath",
    "environment.correlator",
    "detector.eta",
    "detector.dark_prob",
    "detector.dark_rate",
    "detector.window",
    "detector.alpha",
    "map.quantity",
    "verify.order",
    "verify.samples",
    "verify.seeds",
    "verify.chi",
    "sideband.g0_hz",
    "sideband.kappa_hz",
    "sideband.omega_m_hz",
    "sideband.c_pulse",
    "grid.mu",
    "grid.phi",
    "grid.nbar_bath",
    "grid.eta",
    "grid.alpha",
    "grid.t_kappa",
];

#[derive(Clone, Debug, Default)]
pub struct Config {
    values: BTreeMap<String, toml::Value>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let mut values = BTreeMap::new();
        for (key, value) in table {
            match value {
                toml::Value::Table(section) => {
                    for (k, v) in section {
                        values.insert(format!("{key}.{k}"), v);
                    }
                }
                v => {
                    values.insert(key, v);
                }
            }
        }
        for key in values.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Config(format!("unknown key `{key}`")));
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn number(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => value_number(v).map_err(|e| CliError::Config(format!("`{key}`: {e}"))),
        }
    }

    pub fn integer(&self, key: &str, default: u64) -> Result<u64, CliError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(*i as u64),
            Some(v) => Err(CliError::Config(format!("`{key}` must be a non-negative integer, got {v}"))),
        }
    }

    pub fn string(&self, key: &str, default: &str) -> Result<String, CliError> {
        match self.values.get(key) {
            None => Ok(default.to_string()),
            Some(toml::Value::String(s)) => Ok(s.clone()),
            Some(v) => Err(CliError::Config(format!("`{key}` must be a string, got {v}"))),
        }
    }

    /// Sweep axis `name`: `grid.<name>` if set, else the scalar `<section>.<name>`, else `default`.
    pub fn axis(&self, name: &str, section: &str, default: &str) -> Result<Vec<f64>, CliError> {
        let err = |key: &str, e: String| CliError::Config(format!("`{key}`: {e}"));
        let grid_key = format!("grid.{name}");
        let scalar_key = format!("{section}.{name}");
        let points = if let Some(v) = self.values.get(&grid_key) {
            value_grid(v).map_err(|e| err(&grid_key, e))?
        } else if let Some(v) = self.values.get(&scalar_key) {
            vec![value_number(v).map_err(|e| err(&scalar_key, e))?]
        } else {
            parse_grid(default).map_err(|e| err(&grid_key, e))?
        };
        if points.is_empty() {
            return Err(CliError::Config(format!("grid `{name}` is empty")));
        }
        Ok(points)
    }

    /// Fails if a grid axis is set that the subcommand does not sweep.
    pub fn reject_axes_except(&self, allowed: &[&str]) -> Result<(), CliError> {
        for key in self.values.keys() {
            if let Some(axis) = key.strip_prefix("grid.") {
                if !allowed.contains(&axis) {
                    return Err(CliError::Config(format!("grid axis `{axis}` is not used by this subcommand")));
                }
            }
        }
        Ok(())
    }
}

fn value_number(v: &toml::Value) -> Result<f64, String> {
    match v {
        toml::Value::Float(x) => Ok(*x),
        toml::Value::Integer(i) => Ok(*i as f64),
        toml::Value::String(s) => parse_number(s),
        other => Err(format!("expected a number, got {other}")),
    }
}

fn value_grid(v: &toml::Value) -> Result<Vec<f64>, String> {
    match v {
        toml::Value::Array(items) => items.iter().map(value_number).collect(),
        toml::Value::String(s) => parse_grid(s),
        other => Ok(vec![value_number(other)?]),
    }
}

/// A number, optionally with a factor of pi: `1.5`, `pi`, `-2pi`, `3*pi/4`, `pi/2`.
pub fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let bad = || format!("cannot parse `{s}` as a number");
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim().parse::<f64>().map_err(|_| bad())?),
        None => (s, 1.0),
    };
    let value = if let Some(prefix) = num.strip_suffix("pi") {
        let prefix = prefix.trim().trim_end_matches('*').trim();
        let factor = match prefix {
            "" | "+" => 1.0,
            "-" => -1.0,
            p => p.parse::<f64>().map_err(|_| bad())?,
        };
        factor * PI
    } else {
        num.parse::<f64>().map_err(|_| bad())?
    };
    if !(den != 0.0) {
        return Err(bad());
    }
    Ok(value / den)
}

pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let s = s.trim();
    for (name, geometric) in [("lin", false), ("log", true)] {
        if let Some(rest) = s.strip_prefix(name) {
            let inner = rest
                .trim()
                .strip_prefix('(')
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(|| format!("expected `{name}(start, stop, n)`, got `{s}`"))?;
            let parts: Vec<&str> = inner.split(',').collect();
            if parts.len() != 3 {
                return Err(format!("expected `{name}(start, stop, n)`, got `{s}`"));
            }
            let a = parse_number(parts[0])?;
            let b = parse_number(parts[1])?;
            let n: usize = parts[2].trim().parse().map_err(|_| format!("point count `{}` is not an integer", parts[2].trim()))?;
            if n == 0 {
                return Err("grid needs at least one point".into());
            }
            if geometric && !(a > 0.0 && b > 0.0) {
                return Err(format!("log grid needs positive end points, got `{s}`"));
            }
            return Ok((0..n)
                .map(|k| {
                    if n == 1 {
                        return a;
                    }
                    let t = k as f64 / (n - 1) as f64;
                    if k == n - 1 {
                        b
                    } else if geometric {
                        a * (b / a).powf(t)
                    } else {
                        a + (b - a) * t
                    }
                })
                .collect());
        }
    }
    s.split(',').map(parse_number).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_with_pi() {
        assert_eq!(parse_number("1.5").unwrap(), 1.5);
        assert_eq!(parse_number("pi").unwrap(), PI);
        assert_eq!(parse_number("-pi").unwrap(), -PI);
        assert_eq!(parse_number("2pi").unwrap(), 2.0 * PI);
        assert_eq!(parse_number("3*pi/4").unwrap(), 3.0 * PI / 4.0);
        assert_eq!(parse_number(" pi / 2 ").unwrap(), PI / 2.0);
        assert_eq!(parse_number("1e-3").unwrap(), 1e-3);
        assert!(parse_number("p1").is_err());
        assert!(parse_number("1/0").is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("lin(0, 1, 5)").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_grid("lin(0, 2pi, 3)").unwrap(), vec![0.0, PI, 2.0 * PI]);
        let log = parse_grid("log(1, 100, 3)").unwrap();
        assert_eq!((log[0], log[2]), (1.0, 100.0));
        assert!((log[1] - 10.0).abs() < 1e-12);
        assert_eq!(parse_grid("lin(2, 3, 1)").unwrap(), vec![2.0]);
        assert_eq!(parse_grid("0.1, 0.2,pi").unwrap(), vec![0.1, 0.2, PI]);
        assert!(parse_grid("lin(0, 1)").is_err());
        assert!(parse_grid("lin(0, 1, 0)").is_err());
        assert!(parse_grid("log(0, 1, 3)").is_err());
    }

    #[test]
    fn sections_flatten_and_unknown_keys_fail() {
        let cfg = Config::parse("seed = 3\n[protocol]\nmu = 0.5\nphi = \"pi\"\n[grid]\nmu = [1, 2]\n").unwrap();
        assert_eq!(cfg.integer("seed", 0).unwrap(), 3);
        assert_eq!(cfg.number("protocol.phi", 0.0).unwrap(), PI);
        assert_eq!(cfg.axis("mu", "protocol", "0").unwrap(), vec![1.0, 2.0]);
        assert_eq!(cfg.axis("phi", "protocol", "0").unwrap(), vec![PI]);
        assert_eq!(cfg.axis("nbar", "protocol", "lin(0, 1, 2)").unwrap(), vec![0.0, 1.0]);
        assert!(cfg.reject_axes_except(&["phi"]).is_err());
        assert!(Config::parse("[protocol]\nmoo = 1\n").is_err());
        assert!(Config::parse("[grid]\nmu = []\n").unwrap().axis("mu", "protocol", "1").is_err());
    }
}
