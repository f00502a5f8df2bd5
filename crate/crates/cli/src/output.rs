//! CSV tables, digests and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use mmconc::sampling::fmt_f64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of the canonical config echo, carried on every CSV row.
pub fn input_digest(cfg: &RunConfig) -> String {
    sha256_hex(cfg.echo().as_bytes())
}

/// A CSV body under construction. Every row gets the digest as its last
/// column when rendered.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: Table) {
        assert_eq!(self.columns, other.columns);
        self.rows.extend(other.rows);
    }

    pub fn render(&self, digest: &str) -> String {
        let mut out = self.columns.join(",");
        out.push_str(",digest\n");
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push(',');
            out.push_str(digest);
            out.push('\n');
        }
        out
    }
}

pub fn num(x: f64) -> String {
    fmt_f64(x)
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub started: String,
    pub finished: String,
    pub input_digest: String,
    /// File name to sha256 of its bytes.
    pub files: BTreeMap<String, String>,
}

pub fn timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Writes each `(name, body)` under `dir` and returns the manifest path.
pub fn write_outputs(
    dir: &Path,
    files: &[(String, String)],
    mut manifest: RunManifest,
) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    for (name, body) in files {
        std::fs::write(dir.join(name), body)?;
        manifest.files.insert(name.clone(), sha256_hex(body.as_bytes()));
    }
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}
