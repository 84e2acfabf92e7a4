use std::collections::BTreeMap;
use std::io::Write;

use chrono::{DateTime, Utc};
use serde::Serialize;
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Csv,
}

/// Shortest representation that parses back to the same double; integral
/// values drop the trailing `.0`, `+∞` prints as `inf`.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let mut buf = ryu::Buffer::new();
    let s = buf.format_finite(x);
    s.strip_suffix(".0").unwrap_or(s).to_string()
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub tool_version: String,
    pub seed: u64,
    pub timestamp: String,
}

/// UTC time of the run; `SOURCE_DATE_EPOCH` pins it for reproducible output.
fn timestamp() -> String {
    let time = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| DateTime::<Utc>::from_timestamp(secs, 0))
        .unwrap_or_else(Utc::now);
    time.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

impl RunManifest {
    pub fn new<P: Serialize>(command: &str, params: &P, seed: u64) -> Self {
        let parameters = match serde_json::to_value(params) {
            Ok(Value::Object(map)) => map.into_iter().collect(),
            _ => BTreeMap::new(),
        };
        Self {
            command: command.into(),
            parameters,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed,
            timestamp: timestamp(),
        }
    }
}

pub fn print_json<T: Serialize>(manifest: &RunManifest, result: &T) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Envelope<'a, T> {
        manifest: &'a RunManifest,
        result: &'a T,
    }
    let value = serde_json::to_value(Envelope { manifest, result })
        .map_err(|e| CliError::Input(format!("serializing output: {e}")))?;
    let text = serde_json::to_string_pretty(&value)
        .map_err(|e| CliError::Input(format!("serializing output: {e}")))?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(|e| CliError::Input(e.to_string()))
}

pub fn print_csv(header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    let io = |e: csv::Error| CliError::Input(e.to_string());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Input(e.to_string()))
}
