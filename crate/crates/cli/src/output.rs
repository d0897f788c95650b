//! JSON and CSV emission with reproducibility metadata.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const TOOL: &str = "moran";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub seed: u64,
}

impl Meta {
    /// Hash over the config bytes and the normalized command line.
    pub fn new(config_bytes: &[u8], invocation: &str, seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(config_bytes);
        h.update([0u8]);
        h.update(invocation.as_bytes());
        Meta {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            config_hash: hex::encode(h.finalize()),
            seed,
        }
    }
}

/// Tabular view of a result.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Table {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub struct Output {
    pub json: serde_json::Value,
    pub table: Table,
}

impl Output {
    pub fn new<T: Serialize>(result: &T, table: Table) -> CliResult<Self> {
        Ok(Output {
            json: serde_json::to_value(result).map_err(|e| CliError::config(e.to_string()))?,
            table,
        })
    }
}

pub fn render(out: &Output, meta: &Meta, format: Format) -> String {
    match format {
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                meta: &'a Meta,
                result: &'a serde_json::Value,
            }
            let mut s = serde_json::to_string_pretty(&Doc {
                meta,
                result: &out.json,
            })
            .expect("serializable");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "# tool={} version={} config_hash={} seed={}",
                meta.tool, meta.version, meta.config_hash, meta.seed
            );
            s.push_str(&out.table.header.join(","));
            s.push('\n');
            for row in &out.table.rows {
                s.push_str(&row.join(","));
                s.push('\n');
            }
            s
        }
    }
}

pub fn write(text: &str, path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::io("<stdout>", e))
        }
    }
}
