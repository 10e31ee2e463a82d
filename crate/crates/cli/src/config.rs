//! Merging file configs with command-line flags.

use std::path::Path;

use anyhow::{anyhow, Context};
use clap::parser::ValueSource;
use clap::ArgMatches;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::Failure;

/// Read a TOML or JSON config. A run record is accepted too, in which case
/// its echoed `config` object is used.
pub fn read_config_file(path: &Path) -> Result<Map<String, Value>, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))
        .map_err(Failure::Validation)?;
    let value: Value = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| Failure::Validation(anyhow!("config: {e}")))?
    } else {
        let t: toml::Value = toml::from_str(&text).map_err(|e| Failure::Validation(anyhow!("config: {e}")))?;
        serde_json::to_value(t).map_err(|e| Failure::Validation(anyhow!("config: {e}")))?
    };
    let mut obj = match value {
        Value::Object(m) => m,
        _ => return Err(Failure::Validation(anyhow!("config: expected a table of settings"))),
    };
    if obj.contains_key("schema_version") {
        if let Some(Value::Object(inner)) = obj.remove("config") {
            return Ok(inner);
        }
    }
    Ok(obj)
}

fn given_on_command_line(matches: &ArgMatches, key: &str) -> bool {
    matches!(
        matches.try_get_raw(key).ok().flatten().and(matches.value_source(key)),
        Some(ValueSource::CommandLine | ValueSource::EnvVariable)
    )
}

/// Defaults < config file < explicit flags. Returns the merged settings and
/// their canonical JSON echo.
pub fn merge<T: Serialize + DeserializeOwned>(
    parsed: &T,
    matches: &ArgMatches,
    file: Option<&Path>,
) -> Result<(T, Value), Failure> {
    let mut merged = match serde_json::to_value(parsed).map_err(|e| Failure::Runtime(e.into()))? {
        Value::Object(m) => m,
        _ => unreachable!("argument structs serialize to objects"),
    };
    if let Some(path) = file {
        for (k, v) in read_config_file(path)? {
            if !merged.contains_key(&k) {
                return Err(Failure::Validation(anyhow!("invalid {k}: unknown config key")));
            }
            if !given_on_command_line(matches, &k) {
                merged.insert(k, v);
            }
        }
    }
    let value = Value::Object(merged);
    let out: T = serde_json::from_value(value.clone()).map_err(|e| Failure::Validation(anyhow!("config: {e}")))?;
    Ok((out, value))
}
