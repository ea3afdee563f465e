//! Deterministic CSV and meta.json writers.
//!
//! Every number is printed with 17 significant digits so the files
//! round-trip exactly; identical runs therefore produce byte-identical
//! output regardless of worker count.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{runtime_error, CommandKind, Failure, RunConfig, ARTIFACT_VERSION};

/// Full-precision decimal rendering of one value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a header line plus rows, creating the directory if needed.
pub fn write_csv(dir: &Path, name: &str, header: &str, rows: &[String]) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir)
        .map_err(|e| runtime_error(anyhow::anyhow!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    let mut text = String::with_capacity(rows.len() * 64 + header.len() + 2);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    fs::write(&path, text)
        .map_err(|e| runtime_error(anyhow::anyhow!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

/// Companion record for every output file: the exact resolved
/// configuration plus the version and command that produced it,
/// sufficient to reproduce the run bitwise by passing this file back
/// through `--config`.
#[derive(Debug, Serialize)]
pub struct Meta<'a> {
    pub artifact_version: &'static str,
    pub command: &'static str,
    /// Desk-scale factor that was applied to reach this config.
    pub scale_applied: f64,
    /// Polarization offset fitted during the run, when one was.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fitted_b: Option<f64>,
    pub config: &'a RunConfig,
}

impl<'a> Meta<'a> {
    pub fn new(kind: CommandKind, scale_applied: f64, config: &'a RunConfig) -> Self {
        Self {
            artifact_version: ARTIFACT_VERSION,
            command: kind.name(),
            scale_applied,
            fitted_b: None,
            config,
        }
    }
}

pub fn write_meta(dir: &Path, meta: &Meta<'_>) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir)
        .map_err(|e| runtime_error(anyhow::anyhow!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join("meta.json");
    let mut text = serde_json::to_string_pretty(meta)
        .map_err(|e| runtime_error(anyhow::anyhow!("cannot serialize meta: {e}")))?;
    text.push('\n');
    fs::write(&path, text)
        .map_err(|e| runtime_error(anyhow::anyhow!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}
