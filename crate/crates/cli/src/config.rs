//! Flat `key = value` run configuration. Precedence: flags, then the config
//! file, then built-in defaults.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::CliError;

/// Every accepted key with its default ("" means unset).
pub const KEYS: &[(&str, &str)] = &[
    ("corpus", ""),
    ("labels", ""),
    ("graph", ""),
    ("lexicon", ""),
    ("stopwords", ""),
    ("media_root", ""),
    ("seed", "0"),
    ("split.train", "0.7"),
    ("split.dev", "0.2"),
    ("split.test", "0.1"),
    ("split.neg_per_pos", "10"),
    ("split.keyword", "ivory"),
    ("hitl.n", "100"),
    ("hitl.k", "2500"),
    ("hitl.n_stop", "8000"),
    ("hitl.annotators", "2"),
    ("hitl.pool_fraction", "1.0"),
    ("hitl.dev_fraction", "0.2"),
    ("hitl.english_only", "false"),
    ("model.lr", "0.5"),
    ("model.l2", "0.1"),
    ("model.epochs", "300"),
    ("model.patience", "30"),
    ("model.min_df", "1"),
    ("model.batch_size", ""),
    ("wordfilter.keywords", "ivory"),
    ("external.program", ""),
    ("external.args", ""),
    ("external.url", ""),
    ("external.variant", "text"),
    ("external.layout", ""),
    ("external.timeout_secs", "30"),
    ("external.parallelism", "4"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn is_key(k: &str) -> bool {
    KEYS.iter().any(|(name, _)| *name == k)
}

impl RunConfig {
    pub fn defaults() -> Self {
        RunConfig { values: KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect() }
    }

    /// Parses `key = value` lines. `#` starts a comment line.
    pub fn parse_into(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("{origin}:{}: expected key=value", i + 1)))?;
            self.set(k.trim(), v.trim()).map_err(|e| match e {
                CliError::Usage(m) => CliError::Usage(format!("{origin}:{}: {m}", i + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Domain(wltscan::Error::io(path, e)))?;
        let mut c = Self::defaults();
        c.parse_into(&text, &path.display().to_string())?;
        Ok(c)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !is_key(key) {
            return Err(CliError::Usage(format!("unknown config key {key:?}")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a flag value when present.
    pub fn set_opt(&mut self, key: &str, value: Option<impl Display>) -> Result<(), CliError> {
        match value {
            Some(v) => self.set(key, &v.to_string()),
            None => Ok(()),
        }
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map_or("", String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        self.raw(key)
            .parse()
            .map_err(|e| CliError::Usage(format!("config {key}={:?}: {e}", self.raw(key))))
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        if self.raw(key).is_empty() {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        let v = self.raw(key);
        (!v.is_empty()).then(|| PathBuf::from(v))
    }

    /// A path that must be set and exist.
    pub fn existing(&self, key: &str) -> Result<PathBuf, CliError> {
        let p = self
            .path(key)
            .ok_or_else(|| CliError::Usage(format!("{key} is required (flag or config key)")))?;
        if !p.exists() {
            return Err(CliError::Domain(wltscan::Error::InvalidInput(format!(
                "{key} path {} does not exist",
                p.display()
            ))));
        }
        Ok(p)
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.get("seed")
    }

    /// SHA-256 over the sorted effective `key=value` lines.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.values {
            h.update(format!("{k}={v}\n"));
        }
        hex::encode(h.finalize())
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// Lines every artifact header starts with.
    pub fn header(&self, command: &str) -> Result<Vec<String>, CliError> {
        Ok(vec![
            format!("wltscan {command}"),
            format!("seed={}", self.seed()?),
            format!("config={}", self.fingerprint()),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_errors() {
        let mut c = RunConfig::defaults();
        c.parse_into("# comment\nseed = 7\nsplit.keyword=tusk\n", "cfg").unwrap();
        assert_eq!(c.seed().unwrap(), 7);
        c.set_opt("seed", Some(9)).unwrap();
        c.set_opt("seed", None::<u64>).unwrap();
        assert_eq!(c.seed().unwrap(), 9);
        assert!(matches!(c.parse_into("nope=1", "cfg"), Err(CliError::Usage(_))));
        assert!(matches!(c.parse_into("seed", "cfg"), Err(CliError::Usage(_))));
        c.set("seed", "x").unwrap();
        assert!(c.seed().is_err());
    }

    #[test]
    fn fingerprint_tracks_values() {
        let a = RunConfig::defaults();
        let mut b = RunConfig::defaults();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.set("seed", "1").unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
