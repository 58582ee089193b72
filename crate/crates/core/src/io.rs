//! Bit-stable CSV and JSON serialization of reports.
//!
//! Floats are written with 17 significant digits in scientific notation, so
//! parsing a written value gives back the same `f64`. Lines end in `\n`.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::report::{Check, DiagnosticReport};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
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

pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&v| Cell::Num(v)).collect());
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            for (k, cell) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                match cell {
                    Cell::Num(v) => out.push_str(&format_f64(*v)),
                    Cell::Text(s) => out.push_str(s),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv_string())
    }

    /// Numeric column by header name.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        self.rows
            .iter()
            .map(|r| match &r[k] {
                Cell::Num(v) => Some(*v),
                Cell::Text(_) => None,
            })
            .collect()
    }
}

/// Parses a CSV produced by [`CsvTable::to_csv_string`] back into numbers
/// (text cells become NaN).
pub fn parse_numeric_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().map(|h| h.split(',').map(str::to_string).collect()).unwrap_or_default();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(|c| c.parse::<f64>().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary<'a> {
    pub command: &'a str,
    pub pass: bool,
    pub checks: Vec<SummaryCheck<'a>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryCheck<'a> {
    pub report: &'a str,
    pub name: &'a str,
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: bool,
}

impl<'a> SummaryCheck<'a> {
    fn from_check(report: &'a str, c: &'a Check) -> Self {
        Self {
            report,
            name: &c.name,
            value: c.value.is_finite().then_some(c.value),
            tolerance: c.tolerance,
            pass: c.pass,
        }
    }
}

/// Summary JSON listing every check of every report with its verdict.
pub fn summary_json(command: &str, reports: &[DiagnosticReport]) -> String {
    let checks: Vec<SummaryCheck> =
        reports.iter().flat_map(|r| r.checks.iter().map(move |c| SummaryCheck::from_check(&r.name, c))).collect();
    let summary = Summary { command, pass: checks.iter().all(|c| c.pass), checks };
    let mut s = serde_json::to_string_pretty(&summary).expect("summary is always serializable");
    let _ = writeln!(s);
    s
}
