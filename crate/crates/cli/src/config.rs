//! Flat JSON settings files merged with command-line flags.

use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::Usage;

/// Parses `path` as a flat JSON object.
pub fn read_object(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(Usage(format!("{}: config must be a JSON object", path.display())).into()),
        Err(e) => Err(Usage(format!("{}: {e}", path.display())).into()),
    }
}

/// Settings = defaults, overridden by the config file, overridden by
/// flags. Keys unknown to `T` are rejected.
pub fn merge<T>(file: Option<&Path>, flags: Map<String, Value>) -> Result<(T, Map<String, Value>)>
where
    T: Serialize + DeserializeOwned + Default,
{
    let known = match serde_json::to_value(T::default())? {
        Value::Object(m) => m,
        _ => unreachable!("settings serialize to objects"),
    };
    let mut merged = match file {
        Some(p) => read_object(p)?,
        None => Map::new(),
    };
    if let Some(k) = merged.keys().find(|k| !known.contains_key(*k)) {
        let mut valid: Vec<&str> = known.keys().map(String::as_str).collect();
        valid.sort_unstable();
        return Err(Usage(format!("unknown config key `{k}` (valid keys: {})", valid.join(", "))).into());
    }
    for (k, v) in flags {
        if !v.is_null() {
            merged.insert(k, v);
        }
    }
    let settings = serde_json::from_value(Value::Object(merged.clone())).map_err(|e| Usage(format!("config: {e}")))?;
    Ok((settings, merged))
}

/// Records `settings` under `command` in `dir/config.echo.json`, keeping
/// entries written by other subcommands.
pub fn echo(dir: &Path, command: &str, settings: &impl Serialize) -> Result<()> {
    let path = dir.join("config.echo.json");
    let mut all = if path.exists() { read_object(&path).unwrap_or_default() } else { Map::new() };
    all.insert(command.to_string(), serde_json::to_value(settings)?);
    let text = serde_json::to_string_pretty(&Value::Object(all))?;
    std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
