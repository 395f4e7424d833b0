//! Plain-text `key=value` run configuration with CLI-flag overrides.
//!
//! Precedence: built-in default < config-file value < command-line flag.
//! Keys are spelled exactly like the long flags without the leading dashes
//! (`epochs`, `train-per-class`, ...). Lines starting with `#` and blank
//! lines are ignored.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                anyhow!(
                    "{}:{}: expected key=value, found '{line}'",
                    path.display(),
                    idx + 1
                )
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(RunConfig { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Flag value if given, else config value, else `default`.
    pub fn resolve<T: std::str::FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.get(key) {
            Some(raw) => raw
                .parse()
                .map_err(|e| anyhow!("config key '{key}': {e} (value '{raw}')")),
            None => Ok(default),
        }
    }

    /// Flag value if given, else config value; error when neither exists.
    pub fn resolve_required<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.get(key) {
            Some(raw) => raw
                .parse()
                .map_err(|e| anyhow!("config key '{key}': {e} (value '{raw}')")),
            None => Err(anyhow!(
                "missing required setting '{key}' (pass --{key} or set it in the config file)"
            )),
        }
    }

    pub fn resolve_path(&self, flag: Option<PathBuf>, key: &str) -> Result<PathBuf> {
        if let Some(p) = flag {
            return Ok(p);
        }
        match self.get(key) {
            Some(raw) => Ok(PathBuf::from(raw)),
            None => Err(anyhow!(
                "missing required setting '{key}' (pass --{key} or set it in the config file)"
            )),
        }
    }

    pub fn resolve_path_opt(&self, flag: Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.or_else(|| self.get(key).map(PathBuf::from))
    }
}

/// `a:b:n` -> `n` evenly spaced scales from `a` to `b` inclusive.
pub fn parse_scale_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(anyhow!("scale grid '{spec}' must be start:end:count"));
    }
    let start: f64 = parts[0].parse().context("scale grid start")?;
    let end: f64 = parts[1].parse().context("scale grid end")?;
    let count: usize = parts[2].parse().context("scale grid count")?;
    if count == 0 {
        return Err(anyhow!("scale grid needs at least one point"));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    Ok((0..count)
        .map(|k| start + (end - start) * k as f64 / (count - 1) as f64)
        .collect())
}

/// `a..b` -> inclusive state-count range.
pub fn parse_state_range(spec: &str) -> Result<std::ops::RangeInclusive<usize>> {
    let (lo, hi) = spec
        .split_once("..")
        .ok_or_else(|| anyhow!("state range '{spec}' must be lo..hi"))?;
    let lo: usize = lo.trim().parse().context("state range start")?;
    let hi: usize = hi.trim().parse().context("state range end")?;
    if lo == 0 || hi < lo {
        return Err(anyhow!("state range '{spec}' is empty or starts at 0"));
    }
    Ok(lo..=hi)
}

/// Comma-separated per-class counts.
pub fn parse_per_class(spec: &str) -> Result<Vec<usize>> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|e| anyhow!("per-class count '{s}': {e}"))
        })
        .collect()
}
