//! Layered configuration: built-in defaults < TOML file < `--set` overrides.
//!
//! TOML tables flatten to dotted keys, so
//!
//! ```toml
//! seed = 3
//! [stage.spatial]
//! epochs = 4
//! ```
//!
//! sets `seed` and `stage.spatial.epochs`. Arrays join with commas.

use std::path::Path;

use stpt_core::config::RunConfig;

use crate::io::{read_text, Error, Result};

/// Dotted `(key, value)` pairs of a TOML document, in document order.
pub fn flatten_toml(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::ConfigFile {
        path: path.to_path_buf(),
        msg: e.message().to_string(),
    })?;
    let mut out = Vec::new();
    flatten(&table, "", path, &mut out)?;
    Ok(out)
}

fn flatten(table: &toml::Table, prefix: &str, path: &Path, out: &mut Vec<(String, String)>) -> Result<()> {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(t, &key, path, out)?,
            other => out.push((key.clone(), scalar(other, &key, path)?)),
        }
    }
    Ok(())
}

fn scalar(v: &toml::Value, key: &str, path: &Path) -> Result<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        toml::Value::Array(items) => items.iter().map(|i| scalar(i, key, path)).collect::<Result<Vec<_>>>()?.join(","),
        _ => return Err(Error::ConfigFile { path: path.to_path_buf(), msg: format!("{key}: unsupported value type") }),
    })
}

/// Split a `key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s.split_once('=').ok_or_else(|| Error::Usage(format!("override `{s}` is not of the form key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Resolve defaults, then `file`, then `overrides`, and validate the result.
pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(p) = file {
        for (k, v) in flatten_toml(&read_text(p)?, p)? {
            cfg.set(&k, &v)?;
        }
    }
    cfg.apply(overrides.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    Ok(cfg)
}
