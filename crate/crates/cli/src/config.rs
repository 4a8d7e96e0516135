//! Flag/config-file resolution and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

/// Options every subcommand accepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Common {
    pub seed: u64,
    pub threads: usize,
    pub strict: bool,
    pub out: PathBuf,
}

impl Default for Common {
    fn default() -> Self {
        Common {
            seed: 0,
            threads: 1,
            strict: true,
            out: PathBuf::from("out"),
        }
    }
}

const COMMON_KEYS: [&str; 4] = ["seed", "threads", "strict", "out"];

/// Keys of `value` that were actually given: nulls (absent options) and
/// `false` (unset switches) are dropped.
pub fn given(value: impl Serialize) -> Map<String, Value> {
    match serde_json::to_value(value) {
        Ok(Value::Object(mut map)) => {
            map.retain(|_, v| !v.is_null() && *v != Value::Bool(false));
            map
        }
        _ => Map::new(),
    }
}

/// Reads a config file: either a flat object of option values or a run
/// manifest, whose `config` is used if its command matches.
fn read_config(path: &Path, command: &str) -> Result<Map<String, Value>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let Value::Object(mut map) = value else {
        return Err(CliError::Config(format!("{}: expected a JSON object", path.display())));
    };
    if let (Some(Value::String(cmd)), Some(Value::Object(_))) = (map.get("command"), map.get("config")) {
        if cmd != command {
            return Err(CliError::Config(format!(
                "{}: manifest is for `{cmd}`, not `{command}`",
                path.display()
            )));
        }
        let Some(Value::Object(config)) = map.remove("config") else { unreachable!() };
        return Ok(config);
    }
    Ok(map)
}

/// Merges defaults, then the config file, then flags.
pub fn resolve<O: DeserializeOwned>(
    command: &str,
    config_file: Option<&Path>,
    common_flags: Map<String, Value>,
    flags: Map<String, Value>,
) -> Result<(Common, O), CliError> {
    let mut specific = match config_file {
        Some(path) => read_config(path, command)?,
        None => Map::new(),
    };
    let mut common = Map::new();
    for key in COMMON_KEYS {
        if let Some(v) = specific.remove(key) {
            common.insert(key.to_string(), v);
        }
    }
    common.extend(common_flags);
    specific.extend(flags);
    let common: Common = serde_json::from_value(Value::Object(common))
        .map_err(|e| CliError::Config(e.to_string()))?;
    let specific: O = serde_json::from_value(Value::Object(specific))
        .map_err(|e| CliError::Config(e.to_string()))?;
    if common.threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    Ok((common, specific))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// Every resolved option, usable as `--config`.
    pub config: Map<String, Value>,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: BTreeMap<String, PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub duration_secs: f64,
}

impl RunManifest {
    pub fn new<O: Serialize>(command: &str, common: &Common, options: &O) -> Self {
        let mut config = match serde_json::to_value(common) {
            Ok(Value::Object(map)) => map,
            _ => Map::new(),
        };
        if let Ok(Value::Object(map)) = serde_json::to_value(options) {
            config.extend(map);
        }
        RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            duration_secs: 0.0,
        }
    }

    pub fn write(mut self, out: &Path, elapsed: Duration) -> Result<(), CliError> {
        self.duration_secs = elapsed.as_secs_f64();
        let path = out.join(MANIFEST);
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }
}
