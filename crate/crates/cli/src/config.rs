//! JSON experiment configs: loading, validation and merging with flags.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

pub const SEED_ENV: &str = "MA_LAB_SEED";
pub const DEFAULT_SEED: u64 = 0;

/// Top-level keys shared by every command.
#[derive(Debug, Default, Clone)]
pub struct Globals {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub output: Option<PathBuf>,
}

/// A parsed config: the shared keys plus the command's own arguments.
#[derive(Debug, Default)]
pub struct Config {
    pub globals: Globals,
    pub args: Map<String, Value>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Reads a config and checks that it was written for `command`.
pub fn load(path: &Path, command: &str) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text, command)
}

pub fn parse(text: &str, command: &str) -> Result<Config, CliError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| usage(format!("config is not valid JSON: {e}")))?;
    let Value::Object(mut map) = value else {
        return Err(usage("config must be a JSON object"));
    };
    match map.remove("command") {
        Some(Value::String(c)) if c == command => {}
        Some(Value::String(c)) => {
            return Err(usage(format!("config is for '{c}', not '{command}'")))
        }
        Some(_) => return Err(usage("config key 'command' must be a string")),
        None => return Err(usage("config is missing the 'command' key")),
    }
    let mut globals = Globals::default();
    if let Some(v) = map.remove("seed") {
        globals.seed = Some(
            v.as_u64()
                .ok_or_else(|| usage("config key 'seed' must be a nonnegative integer"))?,
        );
    }
    if let Some(v) = map.remove("jobs") {
        let j = v
            .as_u64()
            .filter(|&j| j >= 1)
            .ok_or_else(|| usage("config key 'jobs' must be a positive integer"))?;
        globals.jobs = Some(j as usize);
    }
    if let Some(v) = map.remove("output") {
        globals.output =
            Some(PathBuf::from(v.as_str().ok_or_else(|| {
                usage("config key 'output' must be a string")
            })?));
    }
    Ok(Config { globals, args: map })
}

fn is_unset(v: &Value) -> bool {
    matches!(v, Value::Null | Value::Bool(false))
}

/// Overlays the flags given on the command line onto the config arguments.
/// Unknown config keys are rejected by the argument type.
pub fn merge<T: Serialize + DeserializeOwned>(
    flags: &T,
    config: Map<String, Value>,
) -> Result<T, CliError> {
    let Value::Object(given) = serde_json::to_value(flags).map_err(|e| usage(e.to_string()))?
    else {
        return Err(usage("arguments must serialize to an object"));
    };
    let mut merged = config;
    for (k, v) in given {
        if !is_unset(&v) {
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| usage(format!("config: {e}")))
}

/// Flag, then config, then `MA_LAB_SEED`, then the built-in default.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            usage(format!(
                "{SEED_ENV} must be a nonnegative integer, got '{v}'"
            ))
        }),
        Err(_) => Ok(DEFAULT_SEED),
    }
}
