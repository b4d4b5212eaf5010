//! Experiment reports and the files written from them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::dynamics::Trace;
use crate::error::{Error, Result};
use crate::harness::plot;

/// One value in a summary table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Flag(bool),
    Empty,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(i) => Some(i as f64),
            Cell::Num(x) => Some(x),
            Cell::Flag(b) => Some(if b { 1.0 } else { 0.0 }),
            Cell::Empty => None,
        }
    }

    fn write_csv(&self, out: &mut String) {
        let _ = match *self {
            Cell::Int(i) => write!(out, "{i}"),
            Cell::Num(x) => write!(out, "{x}"),
            Cell::Flag(b) => write!(out, "{}", u8::from(b)),
            Cell::Empty => Ok(()),
        };
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Cell {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Cell {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Cell {
        Cell::Int(i as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Cell {
        Cell::Flag(b)
    }
}

/// Column-named table, written as CSV with a header row.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Table {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<Cell>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                cell.write_csv(&mut out);
            }
            out.push('\n');
        }
        out
    }
}

/// Everything one experiment produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub name: String,
    /// Resolved device and experiment settings the run actually used.
    pub config: Value,
    /// Configuration document that reproduces the run when fed back to the
    /// CLI. Set by the CLI; absent for library calls.
    pub input: Option<Value>,
    pub metadata: BTreeMap<String, Value>,
    pub summary: Table,
    pub tables: Vec<(String, Table)>,
    pub traces: Vec<(String, Trace)>,
}

impl ExperimentReport {
    pub fn new(name: &str, config: Value, summary: Table) -> ExperimentReport {
        ExperimentReport {
            name: name.to_string(),
            config,
            input: None,
            metadata: BTreeMap::new(),
            summary,
            tables: Vec::new(),
            traces: Vec::new(),
        }
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.metadata.insert(key.to_string(), v);
    }

    pub fn trace(&self, name: &str) -> Option<&Trace> {
        self.traces.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    fn file_stem(&self, part: &str) -> String {
        format!("{}_{}", self.name, part)
    }

    /// Write CSV files, optional SVG plots and `manifest.json` into `dir`.
    /// Returns the written paths in a fixed order.
    pub fn write(&self, dir: &Path, with_plots: bool) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let mut written = Vec::new();
        let mut put = |name: String, body: &str| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| io_err(&path, e))?;
            written.push(path);
            Ok(())
        };

        put(format!("{}.csv", self.file_stem("summary")), &self.summary.to_csv())?;
        for (name, table) in &self.tables {
            put(format!("{}.csv", self.file_stem(name)), &table.to_csv())?;
        }
        for (name, trace) in &self.traces {
            put(format!("{}.csv", self.file_stem(name)), &trace.to_csv())?;
        }
        if with_plots {
            if let Some(svg) = plot::table_plot(&format!("{} summary", self.name), &self.summary) {
                put(format!("{}.svg", self.file_stem("summary")), &svg)?;
            }
            for (name, trace) in &self.traces {
                let svg = plot::trace_plot(&format!("{} {}", self.name, name), trace);
                put(format!("{}.svg", self.file_stem(name)), &svg)?;
            }
        }

        let outputs: Vec<String> = written
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        let manifest = json!({
            "experiment": self.name,
            "config": self.input,
            "resolved": self.config,
            "metadata": self.metadata,
            "outputs": outputs,
        });
        let body = serde_json::to_string_pretty(&manifest).expect("manifest is plain JSON");
        let path = dir.join("manifest.json");
        fs::write(&path, body + "\n").map_err(|e| io_err(&path, e))?;
        written.push(path);
        Ok(written)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}
