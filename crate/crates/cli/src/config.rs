//! Flat `key = value` configuration files.
//!
//! One setting per line, `#` starts a comment, keys are the long flag names
//! without the leading dashes. A flag given on the command line wins over
//! the file, which wins over the built-in default.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;
use std::sync::Mutex;

use crate::error::CliError;

pub fn parse(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("config line {}: expected key = value, got {raw:?}", n + 1)))?;
        let key = k.trim().to_string();
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(CliError::usage(format!("config line {}: duplicate key {key}", n + 1)));
        }
    }
    Ok(out)
}

/// Resolves settings and records the effective values for the manifest.
pub struct Settings {
    file: BTreeMap<String, String>,
    consumed: Mutex<BTreeSet<String>>,
    resolved: Mutex<BTreeMap<String, String>>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", p.display())))?;
                parse(&text)?
            }
            None => BTreeMap::new(),
        };
        Ok(Settings {
            file,
            consumed: Mutex::new(BTreeSet::new()),
            resolved: Mutex::new(BTreeMap::new()),
        })
    }

    fn from_file<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.consumed.lock().unwrap().insert(key.to_string());
        match self.file.get(key) {
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::usage(format!("config key {key}: cannot parse {v:?}"))),
            None => Ok(None),
        }
    }

    /// Flag, else config file, else `default`.
    pub fn get<T: FromStr + ToString>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError> {
        let v = match flag {
            Some(v) => {
                self.consumed.lock().unwrap().insert(key.to_string());
                v
            }
            None => self.from_file(key)?.unwrap_or(default),
        };
        self.resolved.lock().unwrap().insert(key.to_string(), v.to_string());
        Ok(v)
    }

    /// Flag, else config file, else absent.
    pub fn get_opt<T: FromStr + ToString>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError> {
        let v = match flag {
            Some(v) => {
                self.consumed.lock().unwrap().insert(key.to_string());
                Some(v)
            }
            None => self.from_file(key)?,
        };
        if let Some(v) = &v {
            self.resolved.lock().unwrap().insert(key.to_string(), v.to_string());
        }
        Ok(v)
    }

    /// Fails on config keys the command never asked for.
    pub fn finish(&self) -> Result<BTreeMap<String, String>, CliError> {
        let consumed = self.consumed.lock().unwrap();
        if let Some(k) = self.file.keys().find(|k| !consumed.contains(*k)) {
            return Err(CliError::usage(format!("unknown config key {k}")));
        }
        Ok(self.resolved.lock().unwrap().clone())
    }
}
