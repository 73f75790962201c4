//! JSON artifacts. Every file is an envelope carrying the schema version,
//! the artifact kind and the seed of the run that produced it.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema_version: u32,
    pub kind: String,
    pub seed: u64,
    pub data: T,
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, kind: &str, seed: u64, data: &T) -> Result<()> {
    let env = Envelope { schema_version: SCHEMA_VERSION, kind: kind.to_string(), seed, data };
    let mut text = serde_json::to_string_pretty(&env)
        .map_err(|e| CliError::Artifact { path: path.into(), message: e.to_string() })?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<Envelope<T>> {
    if !path.exists() {
        return Err(CliError::MissingArtifact(path.into()));
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let env: Envelope<T> = serde_json::from_str(&text)
        .map_err(|e| CliError::Artifact { path: path.into(), message: e.to_string() })?;
    if env.schema_version != SCHEMA_VERSION {
        return Err(CliError::Artifact {
            path: path.into(),
            message: format!("schema version {} (expected {SCHEMA_VERSION})", env.schema_version),
        });
    }
    if env.kind != kind {
        return Err(CliError::Artifact { path: path.into(), message: format!("kind `{}` (expected `{kind}`)", env.kind) });
    }
    Ok(env)
}

/// Either a value or the error that prevented computing it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome<T> {
    Ok(T),
    Error(String),
}

impl<T> Outcome<T> {
    pub fn from_result<E: std::fmt::Display>(r: std::result::Result<T, E>) -> Self {
        match r {
            Ok(v) => Outcome::Ok(v),
            Err(e) => Outcome::Error(e.to_string()),
        }
    }

    pub fn into_result(self) -> std::result::Result<T, String> {
        match self {
            Outcome::Ok(v) => Ok(v),
            Outcome::Error(e) => Err(e),
        }
    }
}
