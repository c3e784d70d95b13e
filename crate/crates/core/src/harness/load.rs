//! Reading scenarios and configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::scenario::{validate_scenario, ScenarioSpec, SCHEMA_VERSION};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Deserialize with the failing field path and position in the error.
fn parse<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse {
            path: path.to_path_buf(),
            field,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })
}

pub fn parse_scenario(path: &Path, text: &str) -> Result<ScenarioSpec> {
    // Check the version before the schema so that files written for another
    // version fail with a clear message instead of a field error.
    if let Ok(value) = serde_json::from_str::<serde_json::Value>(text) {
        if let Some(found) = value.get("schema_version").and_then(|v| v.as_u64()) {
            if found != u64::from(SCHEMA_VERSION) {
                return Err(Error::SchemaVersion {
                    path: path.to_path_buf(),
                    found: found.min(u64::from(u32::MAX)) as u32,
                    expected: SCHEMA_VERSION,
                });
            }
        }
    }
    let spec: ScenarioSpec = parse(path, text)?;
    let violations = validate_scenario(&spec);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    Ok(spec)
}

/// Parse and validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioSpec> {
    let path = path.as_ref();
    parse_scenario(path, &read(path)?)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let config: RunConfig = parse(path, &read(path)?)?;
    config.validate()?;
    Ok(config)
}

/// All `*.json` files of a directory, sorted by file name, each loaded
/// independently so one bad file does not hide the others.
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Vec<(PathBuf, Result<ScenarioSpec>)>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::NoScenarios);
    }
    Ok(paths
        .into_iter()
        .map(|p| {
            let spec = load_scenario(&p);
            (p, spec)
        })
        .collect())
}
