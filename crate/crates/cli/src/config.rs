//! Config resolution: defaults, then the optional config file (flat
//! `key = value` lines or a JSON object), then flag overrides; the result is
//! validated by the library before anything runs.

use std::fs;
use std::path::Path;

use serde_json::{Map, Value};
use spikelattice::experiments::ExperimentConfig;

use crate::{CliError, CliResult, Overrides};

/// Effective configuration for the current invocation.
pub fn resolve(overrides: &Overrides) -> CliResult<ExperimentConfig> {
    let mut config = match &overrides.config {
        Some(path) => load_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(gamma) = overrides.gamma {
        config.gamma = gamma;
    }
    if let Some(n) = overrides.n {
        config.n = n;
    }
    if let Some(replicas) = overrides.replicas {
        config.replicas = replicas;
    }
    if let Some(horizon) = overrides.horizon {
        config.horizon = horizon;
    }
    if let Some(seed) = overrides.seed {
        config.master_seed = seed;
    }
    if let Some(factor) = overrides.margin_factor {
        config.margin_factor = factor;
    }
    config.validate()?;
    Ok(config)
}

fn load_file(path: &Path) -> CliResult<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|err| CliError::Usage(format!("config {}: {err}", path.display())))?;
    let parsed = if text.trim_start().starts_with('{') {
        serde_json::from_str(&text)
    } else {
        serde_json::from_value(Value::Object(parse_flat(&text)?))
    };
    parsed.map_err(|err| CliError::Usage(format!("config {}: {err}", path.display())))
}

/// Flat form: one `key = value` per line, `#` comments, values in JSON syntax
/// (numbers, booleans, arrays). Unknown keys are rejected by the typed
/// deserialization, exactly as for JSON configs.
fn parse_flat(text: &str) -> CliResult<Map<String, Value>> {
    let mut map = Map::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("config line {}: expected `key = value`", lineno + 1))
        })?;
        let value: Value = serde_json::from_str(value.trim()).map_err(|err| {
            CliError::Usage(format!("config line {}: bad value: {err}", lineno + 1))
        })?;
        map.insert(key.trim().to_string(), value);
    }
    Ok(map)
}
