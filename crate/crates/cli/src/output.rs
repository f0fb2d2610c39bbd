//! CSV tables and the JSON run report.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// One CSV cell. Floats always print with 17 significant digits.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    B(bool),
    S(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}
impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::I(v as i64)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::F(v) => f.write_str(&format_float(*v)),
            Cell::I(v) => write!(f, "{v}"),
            Cell::B(v) => f.write_str(if *v { "1" } else { "0" }),
            // commas and quotes never appear in our labels; strip them anyway
            Cell::S(s) => f.write_str(&s.replace([',', '"', '\n'], " ")),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self { header: header.iter().map(|s| s.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width differs from the header");
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_file(path, &self.render())
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Reproducible record of a run. Wall time is kept out of it (see
/// [`write_timing`]) so that reruns produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config_hash: String,
    pub scenario: String,
    pub seed: u64,
    pub summary: Value,
    pub rows: Vec<Value>,
    pub pass: bool,
    /// Files written next to the report.
    pub files: Vec<String>,
}

impl RunReport {
    pub fn file_name(command: &str) -> String {
        format!("{command}.json")
    }

    pub fn write(&self, out: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        write_file(&out.join(Self::file_name(&self.command)), &(text + "\n"))
    }
}

pub fn write_timing(out: &Path, command: &str, seconds: f64, threads: usize) -> Result<(), CliError> {
    let mut s = String::new();
    writeln!(s, "command,wall_time_s,threads").unwrap();
    writeln!(s, "{command},{seconds:.6},{threads}").unwrap();
    write_file(&out.join(format!("{command}.timing")), &s)
}
