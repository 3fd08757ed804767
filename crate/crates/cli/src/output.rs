//! Report writers. Each file starts with a header block naming the tool
//! version, the config digest and the seed.

use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Header {
    pub fn new(command: &str, config_sha256: &str, seed: u64) -> Self {
        Self {
            tool: "strongsec",
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            config_sha256: config_sha256.into(),
            seed,
        }
    }
}

/// Row object from any serializable value; keys keep declaration order.
pub fn row<T: Serialize>(value: &T) -> Map<String, Value> {
    match serde_json::to_value(value).expect("report types serialize") {
        Value::Object(m) => m,
        v => Map::from_iter([("value".to_string(), v)]),
    }
}

/// Adds `extra` in front of the fields of `rest`.
pub fn prefixed(extra: Map<String, Value>, rest: Map<String, Value>) -> Map<String, Value> {
    let mut m = extra;
    for (k, v) in rest {
        m.entry(k).or_insert(v);
    }
    m
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, v)| flatten(&key(k), v, out)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, v)| flatten(&key(&i.to_string()), v, out)),
        Value::Null => out.push((prefix.into(), String::new())),
        Value::String(s) => out.push((prefix.into(), s.clone())),
        v => out.push((prefix.into(), v.to_string())),
    }
}

pub fn render(header: &Header, rows: &[Map<String, Value>], format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Json => {
            let doc = serde_json::json!({ "header": header, "results": rows });
            let mut bytes = serde_json::to_vec_pretty(&doc).expect("json values serialize");
            bytes.push(b'\n');
            Ok(bytes)
        }
        Format::Csv => {
            let mut bytes = Vec::new();
            writeln!(bytes, "# tool: {} {}", header.tool, header.version)?;
            writeln!(bytes, "# command: {}", header.command)?;
            writeln!(bytes, "# config_sha256: {}", header.config_sha256)?;
            writeln!(bytes, "# seed: {}", header.seed)?;
            let flat: Vec<Vec<(String, String)>> = rows
                .iter()
                .map(|r| {
                    let mut cells = Vec::new();
                    flatten("", &Value::Object(r.clone()), &mut cells);
                    cells
                })
                .collect();
            let mut columns: Vec<String> = Vec::new();
            for (k, _) in flat.iter().flatten() {
                if !columns.contains(k) {
                    columns.push(k.clone());
                }
            }
            let mut w = csv::Writer::from_writer(bytes);
            w.write_record(&columns).map_err(csv_err)?;
            for cells in &flat {
                let record = columns.iter().map(|c| cells.iter().find(|(k, _)| k == c).map_or("", |(_, v)| v.as_str()));
                w.write_record(record).map_err(csv_err)?;
            }
            Ok(w.into_inner().map_err(|e| CliError::Io(e.into_error()))?)
        }
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

pub fn emit(bytes: &[u8], out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, bytes)?;
        }
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}
