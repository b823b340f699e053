//! Artifact envelopes and atomic writes.

use crate::config::Effective;
use crate::error::CliError;
use serde_json::{json, Value};
use std::io::Write;
use std::path::{Path, PathBuf};

pub const TOOL: &str = "henonlab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Side file of a run.
pub enum Extra {
    Csv(String, String),
    Pgm(String, Vec<u8>),
}

pub struct Artifacts {
    pub result: Value,
    pub extras: Vec<Extra>,
}

impl Artifacts {
    pub fn json(result: Value) -> Self {
        Artifacts { result, extras: Vec::new() }
    }
}

pub fn envelope(eff: &Effective, hash: &str, result: Value) -> Value {
    json!({
        "tool": TOOL,
        "version": VERSION,
        "command": eff.command,
        "config_sha256": hash,
        "config": eff,
        "result": result,
    })
}

pub fn error_report(command: &str, hash: Option<&str>, err: &CliError) -> Value {
    json!({
        "tool": TOOL,
        "version": VERSION,
        "command": command,
        "config_sha256": hash,
        "error": err,
    })
}

/// CSV with a leading provenance comment.
pub fn stamp_csv(body: &str, hash: &str) -> Vec<u8> {
    format!("# {TOOL} {VERSION} config_sha256={hash}\n{body}").into_bytes()
}

/// PGM with the provenance as a header comment after the magic number.
pub fn stamp_pgm(bytes: &[u8], hash: &str) -> Vec<u8> {
    let mut out = b"P5\n".to_vec();
    out.extend_from_slice(format!("# {TOOL} {VERSION} config_sha256={hash}\n").as_bytes());
    out.extend_from_slice(bytes.strip_prefix(b"P5\n").unwrap_or(bytes));
    out
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp: PathBuf = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let io = |e: std::io::Error| CliError::new("io", format!("{}: {e}", path.display()));
    {
        let mut f = std::fs::File::create(&tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        io(e)
    })
}

pub fn pretty(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s.into_bytes()
}
