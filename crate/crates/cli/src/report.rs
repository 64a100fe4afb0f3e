//! Deterministic artifact writers.
//!
//! Every artifact is a pure function of the resolved configuration: floats
//! are printed in Rust's shortest round-trip form, JSON is pretty-printed
//! with stable key order (struct field order), rows follow input order, and
//! nothing embeds timestamps or absolute paths. Two runs with the same
//! inputs produce byte-identical files.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, Result};

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::config(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// CSV from string records with proper quoting; the header goes first.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header).expect("in-memory write");
    for row in rows {
        wtr.write_record(row).expect("in-memory write");
    }
    let bytes = wtr.into_inner().expect("in-memory flush");
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn fmt(v: f64) -> String {
    format!("{v}")
}

/// `<dir>/<stem>_<instance>.<ext>`; per-instance artifact naming.
pub fn instance_path(dir: &Path, stem: &str, instance: usize, ext: &str) -> PathBuf {
    dir.join(format!("{stem}_{instance}.{ext}"))
}
