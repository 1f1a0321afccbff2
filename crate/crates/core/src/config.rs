//! `key = value` configuration files.
//!
//! One key per line, `#` starts a comment, values are JSON literals (numbers,
//! booleans, arrays, objects). Errors carry the 1-based line number.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::solver::SolverConfig;
use crate::synth::SynthConfig;

#[derive(Debug, Default)]
pub struct KvFile {
    entries: HashMap<String, (usize, Value)>,
    /// Line number past the last line, used for missing-key errors.
    end_line: usize,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = HashMap::new();
        let mut end_line = 1;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            end_line = line + 1;
            let content = strip_comment(raw).trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config {
                    line,
                    message: "empty key".into(),
                });
            }
            let value: Value = serde_json::from_str(value.trim()).map_err(|e| Error::Config {
                line,
                message: format!("bad value for `{key}`: {e}"),
            })?;
            if let Some((first, _)) = entries.insert(key.to_string(), (line, value)) {
                return Err(Error::Config {
                    line,
                    message: format!("duplicate key `{key}` (first set on line {first})"),
                });
            }
        }
        Ok(Self { entries, end_line })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn take<T: DeserializeOwned>(&mut self, key: &str) -> Result<Option<T>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, value)) => serde_json::from_value(value)
                .map(Some)
                .map_err(|e| Error::Config {
                    line,
                    message: format!("bad value for `{key}`: {e}"),
                }),
        }
    }

    fn require<T: DeserializeOwned>(&mut self, key: &str) -> Result<T> {
        self.take(key)?.ok_or_else(|| Error::Config {
            line: self.end_line,
            message: format!("missing required key `{key}`"),
        })
    }

    fn finish(self) -> Result<()> {
        if let Some((key, (line, _))) = self.entries.into_iter().min_by_key(|(_, (l, _))| *l) {
            return Err(Error::Config {
                line,
                message: format!("unknown key `{key}`"),
            });
        }
        Ok(())
    }
}

fn strip_comment(line: &str) -> &str {
    // '#' inside a JSON string would be cut too; config values never contain one.
    line.split_once('#').map_or(line, |(head, _)| head)
}

pub fn parse_synth_config(text: &str) -> Result<SynthConfig> {
    let mut kv = KvFile::parse(text)?;
    let cfg = SynthConfig {
        nt: kv.require("nt")?,
        nx: kv.require("nx")?,
        dt: kv.require("dt")?,
        dx: kv.require("dx")?,
        reflections: kv.take("reflections")?.unwrap_or_default(),
        groundroll: kv.take("groundroll")?.unwrap_or_default(),
        noise_level: kv.take("noise_level")?.unwrap_or(0.0),
        target_snr_db: kv.require("target_snr_db")?,
        seed: kv.take("seed")?.unwrap_or(0),
    };
    kv.finish()?;
    Ok(cfg)
}

pub fn read_synth_config(path: impl AsRef<Path>) -> Result<SynthConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_synth_config(&text)
}

/// Keys not present keep their default. `rho` sets all three penalties and is
/// overridden by any of `rho1`, `rho2`, `rho3`.
pub fn parse_solver_config(text: &str) -> Result<SolverConfig> {
    let mut kv = KvFile::parse(text)?;
    let mut cfg = SolverConfig::default();
    if let Some(v) = kv.take("lambda_s")? {
        cfg.lambda_s = v;
    }
    if let Some(v) = kv.take("lambda_g")? {
        cfg.lambda_g = v;
    }
    if let Some(v) = kv.take::<f64>("rho")? {
        cfg.rho1 = v;
        cfg.rho2 = v;
        cfg.rho3 = v;
    }
    if let Some(v) = kv.take("rho1")? {
        cfg.rho1 = v;
    }
    if let Some(v) = kv.take("rho2")? {
        cfg.rho2 = v;
    }
    if let Some(v) = kv.take("rho3")? {
        cfg.rho3 = v;
    }
    if let Some(v) = kv.take("max_iter")? {
        cfg.max_iter = v;
    }
    if let Some(v) = kv.take("eps")? {
        cfg.eps = v;
    }
    if let Some(v) = kv.take("record_history")? {
        cfg.record_history = v;
    }
    if let Some(v) = kv.take("rank_cap")? {
        cfg.rank_cap = v;
    }
    kv.finish()?;
    Ok(cfg)
}

pub fn read_solver_config(path: impl AsRef<Path>) -> Result<SolverConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_solver_config(&text)
}
