//! Run configuration: loading, flag overrides and the content hash.

use crate::error::CliError;
use henonlab::family::FamilySpec;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use std::path::Path;

/// A family given inline or as a path to a JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FamilyRef {
    Inline(FamilySpec),
    Path(String),
}

/// Config file contents. Every key is optional; flags override keys.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub family: Option<FamilyRef>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tol: Option<f64>,
    /// Execution setting only: excluded from the hash and from outputs.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub params: Map<String, Value>,
}

/// The effective configuration of a run; outputs are a function of this alone.
#[derive(Debug, Clone, Serialize)]
pub struct Effective {
    pub command: String,
    pub family: Option<FamilySpec>,
    pub seed: u64,
    pub tol: Option<f64>,
    pub params: Value,
}

impl Effective {
    pub fn sha256(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::new("config", format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::new("config", format!("{}: {e}", path.display())))
    }

    /// Reads a family file reference into an inline spec.
    pub fn resolve_family(&self) -> Result<Option<FamilySpec>, CliError> {
        match &self.family {
            None => Ok(None),
            Some(FamilyRef::Inline(spec)) => Ok(Some(spec.clone())),
            Some(FamilyRef::Path(p)) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::new("config", format!("{p}: {e}")))?;
                let spec: FamilySpec = serde_json::from_str(&text).map_err(|e| CliError::new("family", format!("{p}: {e}")))?;
                Ok(Some(spec))
            }
        }
    }

    pub fn set_param(&mut self, key: &str, value: Value) {
        self.params.insert(key.to_string(), value);
    }
}

/// Parses `KEY=VALUE`, reading the value as JSON and falling back to a string.
pub fn parse_assignment(text: &str) -> Result<(String, Value), CliError> {
    let (k, v) = text.split_once('=').ok_or_else(|| CliError::new("usage", format!("expected KEY=VALUE, got '{text}'")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.to_string(), value))
}

/// Worker count from the flag/config, then HENONLAB_WORKERS.
pub fn worker_count(explicit: Option<usize>) -> Result<Option<usize>, CliError> {
    if let Some(n) = explicit {
        return Ok(Some(n));
    }
    match std::env::var("HENONLAB_WORKERS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| CliError::new("config", format!("HENONLAB_WORKERS must be a positive integer, got '{v}'"))),
        Err(_) => Ok(None),
    }
}
