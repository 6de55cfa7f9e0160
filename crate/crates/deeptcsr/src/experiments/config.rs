//! Flat key-value experiment configuration.
//!
//! Config files hold one `dotted.key = value` pair per line; `#` starts
//! a comment. Command-line `KEY=VALUE` overrides win over file values,
//! and a command records every key it actually used (including applied
//! defaults) into `resolved_config.json`, which is sufficient to rerun
//! the command bit-identically.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvConfig {
    map: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = KvConfig::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::invalid_config(format!(
                    "{}:{}: expected `key = value`, got `{raw}`",
                    path.display(),
                    idx + 1
                )));
            };
            cfg.map
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(cfg)
    }

    /// Reads a `resolved_config.json` written by a previous run; the
    /// recorded `command` key is dropped. Rerunning a command from this
    /// config reproduces its outputs byte for byte.
    pub fn from_resolved_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let map: BTreeMap<String, String> = serde_json::from_str(&text).map_err(|e| {
            Error::invalid_config(format!("{}: {e}", path.display()))
        })?;
        let mut cfg = KvConfig { map };
        cfg.map.remove("command");
        Ok(cfg)
    }

    /// Applies `KEY=VALUE` strings, later entries winning.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for item in overrides {
            let item = item.as_ref();
            let Some((key, value)) = item.split_once('=') else {
                return Err(Error::invalid_config(format!(
                    "override `{item}` is not of the form KEY=VALUE"
                )));
            };
            self.map
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.map.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }
}

/// Reads typed values out of a [`KvConfig`] while recording everything it
/// resolved (explicit or defaulted) for the resolved-config echo.
#[derive(Debug)]
pub struct Resolver<'a> {
    cfg: &'a KvConfig,
    resolved: BTreeMap<String, String>,
}

impl<'a> Resolver<'a> {
    pub fn new(cfg: &'a KvConfig) -> Self {
        Resolver {
            cfg,
            resolved: BTreeMap::new(),
        }
    }

    fn record(&mut self, key: &str, value: String) {
        self.resolved.insert(key.to_string(), value);
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        let v = self.cfg.get(key).map(str::to_string);
        if let Some(ref v) = v {
            self.record(key, v.clone());
        }
        v
    }

    fn parse<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
        raw.parse().map_err(|_| {
            Error::invalid_config(format!(
                "key `{key}`: cannot parse `{raw}` as {}",
                std::any::type_name::<T>()
            ))
        })
    }

    pub fn str_or(&mut self, key: &str, default: &str) -> String {
        match self.raw(key) {
            Some(v) => v,
            None => {
                self.record(key, default.to_string());
                default.to_string()
            }
        }
    }

    pub fn require_str(&mut self, key: &str) -> Result<String> {
        self.raw(key)
            .ok_or_else(|| Error::invalid_config(format!("missing required key `{key}`")))
    }

    pub fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            Some(v) => Self::parse(key, &v),
            None => {
                self.record(key, format!("{default:?}"));
                Ok(default)
            }
        }
    }

    pub fn usize_or(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.raw(key) {
            Some(v) => Self::parse(key, &v),
            None => {
                self.record(key, default.to_string());
                Ok(default)
            }
        }
    }

    pub fn u64_or(&mut self, key: &str, default: u64) -> Result<u64> {
        match self.raw(key) {
            Some(v) => Self::parse(key, &v),
            None => {
                self.record(key, default.to_string());
                Ok(default)
            }
        }
    }

    pub fn bool_or(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            Some(v) => Self::parse(key, &v),
            None => {
                self.record(key, default.to_string());
                Ok(default)
            }
        }
    }

    /// Optional comma-separated float list.
    pub fn f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => parse_list(key, &v).map(Some),
        }
    }

    pub fn f64_list_or(&mut self, key: &str, default: &str) -> Result<Vec<f64>> {
        let v = self.str_or(key, default);
        parse_list(key, &v)
    }

    pub fn u64_list_or(&mut self, key: &str, default: &str) -> Result<Vec<u64>> {
        let v = self.str_or(key, default);
        parse_list(key, &v)
    }

    pub fn usize_list_or(&mut self, key: &str, default: &str) -> Result<Vec<usize>> {
        let v = self.str_or(key, default);
        parse_list(key, &v)
    }

    pub fn str_list_or(&mut self, key: &str, default: &str) -> Vec<String> {
        self.str_or(key, default)
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect()
    }

    /// Flags keys the command never read, to catch typos early.
    pub fn reject_unknown_keys(&self) -> Result<()> {
        for key in self.cfg.keys() {
            if !self.resolved.contains_key(key) {
                return Err(Error::invalid_config(format!(
                    "unknown config key `{key}`"
                )));
            }
        }
        Ok(())
    }

    /// Writes the resolved key set (plus the command name) as JSON.
    pub fn write_resolved(&self, out_dir: &Path, command: &str) -> Result<()> {
        let mut all = self.resolved.clone();
        all.insert("command".to_string(), command.to_string());
        let path = out_dir.join("resolved_config.json");
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = std::io::BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, &all)
            .map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
        w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        w.flush().map_err(|e| Error::io(&path, e))
    }

    /// Extra resolved entries derived by the command itself.
    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.record(key, value.to_string());
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, raw: &str) -> Result<Vec<T>> {
    let items: Vec<&str> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(Error::invalid_config(format!("key `{key}` is an empty list")));
    }
    items
        .into_iter()
        .map(|s| {
            s.parse().map_err(|_| {
                Error::invalid_config(format!("key `{key}`: cannot parse list item `{s}`"))
            })
        })
        .collect()
}
