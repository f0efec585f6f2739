//! Output documents and their JSON/CSV rendering.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{CommandKind, RunConfig};
use crate::CliError;

pub const SCHEMA_ID: &str = "fracheat-output/1";

/// A constant reported with where its value comes from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constant {
    pub value: f64,
    pub provenance: &'static str,
}

/// Rows of the per-draw CSV emitted by `simulate`.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawTable {
    pub columns: Vec<String>,
    pub rows: Vec<(u64, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Document {
    pub schema: &'static str,
    pub command: CommandKind,
    pub inputs: RunConfig,
    pub values: Map<String, Value>,
    pub error_estimates: Map<String, Value>,
    pub constants: BTreeMap<String, Constant>,
    pub converged: bool,
    #[serde(skip)]
    pub draws: Option<DrawTable>,
}

impl Document {
    pub fn new(inputs: &RunConfig) -> Self {
        Self {
            schema: SCHEMA_ID,
            command: inputs.command,
            inputs: inputs.clone(),
            values: Map::new(),
            error_estimates: Map::new(),
            constants: BTreeMap::new(),
            converged: true,
            draws: None,
        }
    }

    pub fn value(&mut self, key: &str, v: impl Serialize) {
        self.values.insert(key.to_string(), to_value(v));
    }

    pub fn error(&mut self, key: &str, v: impl Serialize) {
        self.error_estimates.insert(key.to_string(), to_value(v));
    }

    pub fn constant(&mut self, key: &str, value: f64, provenance: &'static str) {
        self.constants.insert(key.to_string(), Constant { value, provenance });
    }
}

fn to_value(v: impl Serialize) -> Value {
    // Non-finite floats serialize as null.
    serde_json::to_value(v).unwrap_or(Value::Null)
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        Value::Array(a) => {
            for (i, v) in a.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), v, out);
            }
        }
        Value::Number(n) => {
            let s = match (n.as_u64(), n.as_i64(), n.as_f64()) {
                (Some(u), _, _) => u.to_string(),
                (_, Some(i), _) => i.to_string(),
                (_, _, Some(f)) => fmt_f64(f),
                _ => n.to_string(),
            };
            out.push((prefix.to_string(), s));
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        Value::Null => out.push((prefix.to_string(), String::new())),
    }
}

pub fn render_json(doc: &Document) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(doc).map_err(|e| CliError::Io(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

/// `section,name,value` rows, or one row per draw for `simulate`.
pub fn render_csv(doc: &Document) -> Result<Vec<u8>, CliError> {
    let io = |e: csv::Error| CliError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    if let Some(table) = &doc.draws {
        let mut header = vec!["draw".to_string()];
        header.extend(table.columns.iter().cloned());
        w.write_record(&header).map_err(io)?;
        for (draw, values) in &table.rows {
            let mut rec = vec![draw.to_string()];
            rec.extend(values.iter().map(|v| fmt_f64(*v)));
            w.write_record(&rec).map_err(io)?;
        }
    } else {
        w.write_record(["section", "name", "value"]).map_err(io)?;
        let sections = [
            ("values", Value::Object(doc.values.clone())),
            ("error_estimates", Value::Object(doc.error_estimates.clone())),
            ("constants", to_value(&doc.constants)),
        ];
        for (section, v) in &sections {
            let mut rows = Vec::new();
            flatten("", v, &mut rows);
            for (name, value) in rows {
                w.write_record([*section, name.as_str(), value.as_str()]).map_err(io)?;
            }
        }
        w.write_record(["status", "converged", if doc.converged { "true" } else { "false" }])
            .map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers see either nothing or the whole document.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
