//! Report documents emitted by every command.
//!
//! Results are flat tables so the same document renders as JSON (one file)
//! or CSV (one file per table). Prediction measures and performance scores
//! are multiplied by 100 at construction time unless raw output is requested;
//! library values stay unit-scaled.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use instability_core::Measure;
use serde::ser::{Serialize, Serializer};
use serde_json::Value;

pub const TOOL_NAME: &str = "instab";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Null,
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Int(v) => s.serialize_i64(*v),
            Cell::Num(v) if v.is_finite() => s.serialize_f64(*v),
            Cell::Num(v) => s.serialize_str(&non_finite(*v)),
            Cell::Text(t) => s.serialize_str(t),
            Cell::Null => s.serialize_unit(),
        }
    }
}

fn non_finite(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl Cell {
    fn csv_field(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) if v.is_finite() => v.to_string(),
            Cell::Num(v) => non_finite(*v),
            Cell::Text(t) => t.clone(),
            Cell::Null => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Null, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Measure> for Cell {
    fn from(v: Measure) -> Self {
        Cell::Text(v.name().to_string())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Percent,
    Raw,
}

impl Scale {
    fn factor(self) -> f64 {
        match self {
            Scale::Percent => 100.0,
            Scale::Raw => 1.0,
        }
    }

    /// Scales prediction measures; representation measures are unchanged.
    pub fn measure(self, measure: Measure, value: f64) -> f64 {
        if measure.is_prediction() {
            value * self.factor()
        } else {
            value
        }
    }

    /// Scales a performance score (accuracy, F1, MCC).
    pub fn score(self, value: f64) -> f64 {
        value * self.factor()
    }

    pub fn name(self) -> &'static str {
        match self {
            Scale::Percent => "percent",
            Scale::Raw => "raw",
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Input {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ReportDocument {
    pub tool: Tool,
    pub command: String,
    pub inputs: Vec<Input>,
    pub parameters: BTreeMap<String, Value>,
    pub scale: &'static str,
    pub results: Vec<Table>,
    /// Capability gaps and undefined quantities; not failures.
    pub annotations: Vec<String>,
    /// Hard failures; a document with errors exits nonzero.
    pub errors: Vec<String>,
}

impl ReportDocument {
    pub fn new(command: &str, scale: Scale) -> Self {
        ReportDocument {
            tool: Tool {
                name: TOOL_NAME,
                version: TOOL_VERSION,
            },
            command: command.to_string(),
            inputs: Vec::new(),
            parameters: BTreeMap::new(),
            scale: scale.name(),
            results: Vec::new(),
            annotations: Vec::new(),
            errors: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Into<Value>) {
        self.parameters.insert(key.to_string(), value.into());
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.results.iter().find(|t| t.name == name)
    }

    pub fn has_errors(&self) -> bool {
        !self.errors.is_empty()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes one CSV per result table plus `metadata.csv` and
    /// `annotations.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut meta = Table::new("metadata", &["key", "value"]);
        meta.push(vec!["tool".into(), self.tool.name.into()]);
        meta.push(vec!["version".into(), self.tool.version.into()]);
        meta.push(vec!["command".into(), self.command.clone().into()]);
        meta.push(vec!["scale".into(), self.scale.into()]);
        for input in &self.inputs {
            meta.push(vec![format!("input:{}", input.path).into(), input.sha256.clone().into()]);
        }
        for (k, v) in &self.parameters {
            meta.push(vec![format!("param:{k}").into(), v.to_string().into()]);
        }
        let mut notes = Table::new("annotations", &["kind", "message"]);
        for a in &self.annotations {
            notes.push(vec!["annotation".into(), a.clone().into()]);
        }
        for e in &self.errors {
            notes.push(vec!["error".into(), e.clone().into()]);
        }
        for table in std::iter::once(&meta).chain(&self.results).chain(std::iter::once(&notes)) {
            write_table(&dir.join(format!("{}.csv", table.name)), table)?;
        }
        Ok(())
    }
}

fn write_table(path: &Path, table: &Table) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::csv_field))?;
    }
    w.flush()
}
