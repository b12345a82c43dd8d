//! Flat key=value experiment configuration.
//!
//! A config file is plain text: one `key=value` per line, `#` comments,
//! blank lines ignored. Command-line flags override file values. Every
//! run echoes its fully resolved configuration to `config.resolved` in
//! the output directory; that file parses back into the identical
//! configuration, so re-running from the echo reproduces the run.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

/// Raw parsed keys with consumption tracking, so unknown keys fail loud.
#[derive(Debug, Default)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
    consumed: BTreeSet<String>,
}

impl ConfigMap {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected key=value", lineno + 1))?;
            let key = key.trim().to_string();
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                bail!("config line {}: duplicate key {key}", lineno + 1);
            }
        }
        Ok(ConfigMap {
            values,
            consumed: BTreeSet::new(),
        })
    }

    /// Inserts or replaces a value (flag overrides).
    pub fn set(&mut self, key: &str, value: String) {
        self.values.insert(key.to_string(), value);
    }

    pub fn take(&mut self, key: &str) -> Option<String> {
        self.consumed.insert(key.to_string());
        self.values.get(key).cloned()
    }

    pub fn string(&mut self, key: &str, default: &str) -> String {
        self.take(key).unwrap_or_else(|| default.to_string())
    }

    pub fn parsed<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|e| anyhow!("config key {key}={raw}: {e}")),
        }
    }

    pub fn pair_f64(&mut self, key: &str, default: [f64; 2]) -> Result<[f64; 2]> {
        match self.take(key) {
            None => Ok(default),
            Some(raw) => {
                let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
                if parts.len() != 2 {
                    bail!("config key {key}={raw}: expected two comma-separated numbers");
                }
                Ok([
                    parts[0]
                        .parse()
                        .map_err(|e| anyhow!("config key {key}: {e}"))?,
                    parts[1]
                        .parse()
                        .map_err(|e| anyhow!("config key {key}: {e}"))?,
                ])
            }
        }
    }

    pub fn list_usize(&mut self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.take(key) {
            None => Ok(default.to_vec()),
            Some(raw) if raw.trim().is_empty() => Ok(Vec::new()),
            Some(raw) => raw
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse()
                        .map_err(|e| anyhow!("config key {key}={raw}: {e}"))
                })
                .collect(),
        }
    }

    pub fn optional_path(&mut self, key: &str) -> Option<PathBuf> {
        self.take(key).map(PathBuf::from)
    }

    /// Errors on any key that no command consumed.
    pub fn finish(&self) -> Result<()> {
        let leftover: Vec<&String> = self
            .values
            .keys()
            .filter(|k| !self.consumed.contains(*k))
            .collect();
        if leftover.is_empty() {
            Ok(())
        } else {
            bail!(
                "unknown config keys: {}",
                leftover
                    .iter()
                    .map(|s| s.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            )
        }
    }
}

/// Flag-level overrides shared by every command.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub dry_run: bool,
}

impl Overrides {
    pub fn apply(&self, map: &mut ConfigMap) {
        if let Some(seed) = self.seed {
            map.set("seed", seed.to_string());
        }
        if let Some(out) = &self.out {
            map.set("out", out.display().to_string());
        }
        if let Some(workers) = self.workers {
            map.set("workers", workers.to_string());
        }
    }
}

/// Writes the resolved key set, sorted, one `key=value` per line.
pub fn write_resolved(path: &Path, entries: &BTreeMap<String, String>) -> Result<()> {
    let mut text = String::new();
    for (key, value) in entries {
        text.push_str(&format!("{key}={value}\n"));
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_pair(v: [f64; 2]) -> String {
    format!("{},{}", v[0], v[1])
}

pub fn fmt_list(v: &[usize]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_defaults_and_overrides() {
        let mut map = ConfigMap::from_text("# experiment\nseed = 7\nheight=4 # rows\n").unwrap();
        Overrides {
            seed: Some(9),
            ..Default::default()
        }
        .apply(&mut map);
        assert_eq!(map.parsed::<u64>("seed", 42).unwrap(), 9);
        assert_eq!(map.parsed::<usize>("height", 8).unwrap(), 4);
        assert_eq!(map.parsed::<usize>("width", 8).unwrap(), 8);
        map.take("out");
        map.take("workers");
        map.finish().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut map = ConfigMap::from_text("heihgt=4\n").unwrap();
        let _ = map.parsed::<usize>("height", 8);
        assert!(map.finish().is_err());
    }

    #[test]
    fn duplicate_and_malformed_lines_fail() {
        assert!(ConfigMap::from_text("a=1\na=2\n").is_err());
        assert!(ConfigMap::from_text("just words\n").is_err());
    }

    #[test]
    fn pairs_and_lists() {
        let mut map = ConfigMap::from_text("theta_true=0.1, 0.5\ndraws=1,10\n").unwrap();
        assert_eq!(map.pair_f64("theta_true", [0.0, 0.0]).unwrap(), [0.1, 0.5]);
        assert_eq!(map.list_usize("draws", &[1]).unwrap(), vec![1, 10]);
        assert_eq!(map.pair_f64("prior_low", [-0.5, 0.0]).unwrap(), [-0.5, 0.0]);
    }
}
