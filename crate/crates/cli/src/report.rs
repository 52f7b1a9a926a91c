//! Report documents: stable JSON with sorted keys and 17 significant digits,
//! plus a flattened CSV view of the records.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Top-level report. Object keys come out sorted because `serde_json::Map`
/// is ordered.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: String,
    pub config: Value,
    pub summary: Value,
    pub records: Vec<Value>,
    pub wall_time: Option<f64>,
}

impl Report {
    pub fn new(command: &str, config: Value) -> Self {
        Self {
            command: command.to_string(),
            config,
            summary: Value::Null,
            records: Vec::new(),
            wall_time: None,
        }
    }

    pub fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("command".into(), Value::String(self.command.clone()));
        m.insert("config".into(), self.config.clone());
        m.insert("records".into(), Value::Array(self.records.clone()));
        m.insert("summary".into(), self.summary.clone());
        m.insert("tool_version".into(), Value::String(TOOL_VERSION.into()));
        if let Some(t) = self.wall_time {
            m.insert("wall_time_seconds".into(), Value::from(t));
        }
        Value::Object(m)
    }

    pub fn to_json(&self, pretty: bool) -> String {
        let mut out = String::new();
        write_value(&mut out, &self.to_value(), pretty, 0);
        out.push('\n');
        out
    }

    pub fn write_json(&self, path: &Path, pretty: bool) -> io::Result<()> {
        std::fs::write(path, self.to_json(pretty))
    }

    pub fn write_csv(&self, path: &Path) -> io::Result<()> {
        let rows: Vec<Vec<(String, String)>> = self
            .records
            .iter()
            .map(|r| {
                let mut cells = Vec::new();
                flatten("", r, &mut cells);
                cells
            })
            .collect();
        let columns: BTreeSet<&str> = rows.iter().flatten().map(|(k, _)| k.as_str()).collect();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&columns)?;
        for row in &rows {
            let rec: Vec<&str> = columns
                .iter()
                .map(|c| row.iter().find(|(k, _)| k == c).map_or("", |(_, v)| v.as_str()))
                .collect();
            w.write_record(&rec)?;
        }
        w.flush()
    }
}

pub fn to_value<S: Serialize>(x: &S) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

/// Formats a float with 17 significant digits; non-finite values become null.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn format_number(n: &serde_json::Number) -> String {
    if n.is_f64() {
        format_f64(n.as_f64().unwrap_or(f64::NAN))
    } else {
        n.to_string()
    }
}

fn write_value(out: &mut String, v: &Value, pretty: bool, depth: usize) {
    let indent = |out: &mut String, d: usize| {
        if pretty {
            out.push('\n');
            for _ in 0..d {
                out.push_str("  ");
            }
        }
    };
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => out.push_str(&format_number(n)),
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                indent(out, depth + 1);
                write_value(out, item, pretty, depth + 1);
            }
            indent(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                indent(out, depth + 1);
                let _ = write!(out, "{}:", Value::String(k.clone()));
                if pretty {
                    out.push(' ');
                }
                write_value(out, item, pretty, depth + 1);
            }
            indent(out, depth);
            out.push('}');
        }
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, item) in map {
                flatten(&key(k), item, out);
            }
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), item, out);
            }
        }
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        Value::Number(n) => out.push((prefix.to_string(), format_number(n))),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
    }
}
