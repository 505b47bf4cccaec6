//! CSV tables and the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// A table with string cells, written as RFC 4180 CSV.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.into_error()))
    }
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool_version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub replicates: usize,
    pub files: Vec<String>,
    pub config: &'a serde_json::Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes every table to `<out>/<name>.csv`, echoes them to stdout and
/// writes `<out>/manifest.json`.
pub fn emit<C: Serialize>(
    out: &Path,
    command: &str,
    config: &C,
    seed: u64,
    replicates: usize,
    tables: &[Table],
) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(out)?;
    let config_json = serde_json::to_value(config).map_err(|e| CliError::Config(e.to_string()))?;
    let canonical = serde_json::to_vec(&config_json).map_err(|e| CliError::Config(e.to_string()))?;
    let mut files = Vec::new();
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for t in tables {
        let bytes = t.to_csv()?;
        let file = format!("{}.csv", t.name);
        std::fs::write(out.join(&file), &bytes)?;
        lock.write_all(&bytes)?;
        files.push(file);
    }
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        command: command.into(),
        config_sha256: sha256_hex(&canonical),
        seed,
        replicates,
        files,
        config: &config_json,
    };
    let path = out.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}
