//! Layered settings: command-line flag, then config file, then built-in default.
//!
//! A config file is TOML (or JSON when the name ends in `.json`). Top-level
//! scalar keys apply to every subcommand; a table named after the subcommand
//! (`[train-codebook]` or `[train_codebook]`) applies to that one only and
//! wins over the top level. Dashes in keys are read as underscores.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::UsageError;

fn normalize(key: &str) -> String {
    key.replace('-', "_")
}

fn load(path: &Path) -> anyhow::Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("config {}: {e}", path.display())))?;
    let value = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        serde_json::from_str::<Value>(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())))?
    } else {
        let table: toml::Table =
            toml::from_str(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())))?;
        serde_json::to_value(table)?
    };
    match value {
        Value::Object(map) => Ok(map),
        _ => Err(UsageError(format!("config {}: top level must be a table", path.display())).into()),
    }
}

/// Fills every unset field of `cli` from the config file. Returns the merged
/// settings and their JSON form for the run manifest.
pub fn resolve<A: Serialize + DeserializeOwned>(
    cli: &A,
    file: Option<&Path>,
    section: &str,
) -> anyhow::Result<(A, Value)> {
    let Value::Object(flags) = serde_json::to_value(cli)? else {
        anyhow::bail!("settings must serialize as a table");
    };
    let mut merged = Map::new();
    if let Some(path) = file {
        let doc = load(path)?;
        let section = normalize(section);
        let mut scoped = None;
        for (k, v) in doc {
            let k = normalize(&k);
            match v {
                Value::Object(table) if k == section => scoped = Some(table),
                Value::Object(_) => {}
                v if flags.contains_key(&k) => {
                    merged.insert(k, v);
                }
                _ => {}
            }
        }
        for (k, v) in scoped.unwrap_or_default() {
            let k = normalize(&k);
            if !flags.contains_key(&k) {
                return Err(UsageError(format!("config {}: unknown key '{k}' for {section}", path.display())).into());
            }
            merged.insert(k, v);
        }
    }
    for (k, v) in flags {
        if !v.is_null() {
            merged.insert(k, v);
        }
    }
    let value = Value::Object(merged);
    let resolved = serde_json::from_value(value.clone()).map_err(|e| UsageError(format!("config: {e}")))?;
    Ok((resolved, value))
}
