//! Flat `key = value` config files mirroring the command-line flags.
//!
//! ```text
//! # small-sample, weak-separation setting
//! p = 100
//! n = 50
//! nu2 = 0.5
//! methods = nl,linear-a,linear-b,bayes
//! ```
//!
//! Each entry becomes `--key value`, inserted before the flags given on the
//! command line so that the latter take precedence.

use std::path::Path;

use crate::error::{HarnessError, Result};

pub fn parse_config(text: &str, origin: &str) -> Result<Vec<(String, String)>> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| HarnessError::Config {
            path: origin.to_string(),
            line: i + 1,
            message: format!("expected 'key = value', found '{line}'"),
        })?;
        let key = key.trim().trim_start_matches("--");
        if key.is_empty() || key == "config" {
            return Err(HarnessError::Config {
                path: origin.to_string(),
                line: i + 1,
                message: format!("invalid key '{key}'"),
            });
        }
        entries.push((key.to_string(), value.trim().to_string()));
    }
    Ok(entries)
}

pub fn load_config(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    parse_config(&text, &path.display().to_string())
}

/// Splices a `--config FILE` (or `--config=FILE`) option into the argument
/// list: the file's entries are placed right after the subcommand.
pub fn expand_config_args(args: Vec<String>) -> Result<Vec<String>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            let path = it
                .next()
                .ok_or_else(|| HarnessError::Invalid("--config needs a file path".into()))?;
            config = Some(path);
        } else if let Some(path) = a.strip_prefix("--config=") {
            config = Some(path.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let entries = load_config(Path::new(&path))?;
    // program name, then the subcommand if any
    let split = rest.iter().skip(1).position(|a| !a.starts_with('-')).map_or(rest.len(), |i| i + 2);
    let mut out: Vec<String> = rest[..split].to_vec();
    for (k, v) in entries {
        out.push(format!("--{k}"));
        out.push(v);
    }
    out.extend_from_slice(&rest[split..]);
    Ok(out)
}
