//! Flat `key=value` configuration: files, command-line overrides, manifests.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

/// Splits `key=value`, trimming both sides.
pub fn parse_pair(s: &str) -> CliResult<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("expected key=value, got {s:?}")))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(CliError::config(format!("empty key in {s:?}")));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        Self {
            entries: pairs
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    /// Parses a config file. `#` starts a comment; blank lines are skipped.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = parse_pair(line).map_err(|e| match e {
                CliError::Config(m) => CliError::config(format!("line {}: {m}", i + 1)),
                other => other,
            })?;
            if cfg.entries.insert(k.clone(), v).is_some() {
                return Err(CliError::config(format!("line {}: duplicate key {k}", i + 1)));
            }
        }
        Ok(cfg)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Applies overrides whose keys must already exist. All unknown keys
    /// are reported together and nothing is changed in that case.
    pub fn apply(&mut self, overrides: &[(String, String)]) -> CliResult<()> {
        let unknown: Vec<&str> = overrides
            .iter()
            .map(|(k, _)| k.as_str())
            .filter(|k| !self.entries.contains_key(*k))
            .collect();
        if !unknown.is_empty() {
            return Err(CliError::config(format!("unknown keys: {}", unknown.join(", "))));
        }
        for (k, v) in overrides {
            self.entries.insert(k.clone(), v.clone());
        }
        Ok(())
    }

    pub fn get_str(&self, key: &str) -> CliResult<&str> {
        self.entries
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| CliError::config(format!("missing key {key}")))
    }

    pub fn get<V: FromStr>(&self, key: &str) -> CliResult<V> {
        let raw = self.get_str(key)?;
        raw.parse()
            .map_err(|_| CliError::config(format!("{key} = {raw:?} does not parse")))
    }

    /// A float that must be finite.
    pub fn num(&self, key: &str) -> CliResult<f64> {
        let v: f64 = self.get(key)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(CliError::config(format!("{key} must be finite")))
        }
    }

    pub fn flag(&self, key: &str) -> CliResult<bool> {
        match self.get_str(key)? {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(CliError::config(format!("{key} = {other:?} is not a boolean"))),
        }
    }

    /// Comma-separated floats.
    pub fn list(&self, key: &str) -> CliResult<Vec<f64>> {
        self.get_str(key)?
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| CliError::config(format!("{key}: {s:?} is not a number")))
            })
            .collect()
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print_round_trip() {
        let c = Config::parse("# header\nb = 2\n\na=1 # trailing\n").unwrap();
        assert_eq!(c.get::<i32>("a").unwrap(), 1);
        assert_eq!(Config::parse(&c.to_string()).unwrap(), c);
    }

    #[test]
    fn unknown_override_keys_are_all_listed() {
        let mut c = Config::from_pairs([("dx", "0.1")]);
        let err = c
            .apply(&[("dx".into(), "0.2".into()), ("foo".into(), "1".into()), ("bar".into(), "2".into())])
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("foo") && msg.contains("bar"), "{msg}");
        assert_eq!(c.get_str("dx").unwrap(), "0.1");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn malformed_input() {
        assert!(Config::parse("novalue\n").is_err());
        assert!(Config::parse("a=1\na=2\n").is_err());
        let c = Config::from_pairs([("x", "abc"), ("inf", "inf"), ("l", "1, 2,3")]);
        assert!(c.num("x").is_err());
        assert!(c.num("inf").is_err());
        assert_eq!(c.list("l").unwrap(), vec![1.0, 2.0, 3.0]);
    }
}
