//! CSV tables and run manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    /// 17 significant digits, `.` decimal, independent of locale.
    pub fn render(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x:.16e}"),
            Cell::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Text(_) => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// A rectangular table with one header row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&x| Cell::Num(x)).collect());
    }

    pub fn column(&self, name: &str) -> Option<Vec<Cell>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j].clone()).collect())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }
}

/// Everything needed to reproduce and audit one CSV artifact.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub csv: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub timings: BTreeMap<String, f64>,
    pub diagnostics: BTreeMap<String, f64>,
    /// Open questions or validity limits met during the run.
    pub flags: Vec<String>,
    /// Invariant or tolerance failures; nonempty means exit code 1.
    pub failures: Vec<String>,
    pub status: &'static str,
}

impl RunManifest {
    pub fn new(command: &str, csv: &str, config: serde_json::Value, seed: u64) -> Self {
        Self {
            tool: "microchem",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            csv: csv.to_string(),
            config,
            seed,
            timings: BTreeMap::new(),
            diagnostics: BTreeMap::new(),
            flags: Vec::new(),
            failures: Vec::new(),
            status: "ok",
        }
    }

    pub fn time(&mut self, what: &str, elapsed: Duration) {
        self.timings.insert(what.to_string(), elapsed.as_secs_f64());
    }
}

/// Writes `<stem>.csv` and `<stem>.manifest.json` into `dir`.
pub fn write_artifacts(
    dir: &Path,
    stem: &str,
    table: &CsvTable,
    manifest: &RunManifest,
) -> Result<(PathBuf, PathBuf), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let manifest_path = dir.join(format!("{stem}.manifest.json"));
    std::fs::write(&csv_path, table.to_csv()?)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", csv_path.display())))?;
    let json = serde_json::to_string_pretty(manifest).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(&manifest_path, json + "\n")
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", manifest_path.display())))?;
    Ok((csv_path, manifest_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_round_trip_digits() {
        let x = 0.1 + 0.2;
        let s = Cell::Num(x).render();
        assert_eq!(s.parse::<f64>().unwrap(), x);
        assert_eq!(Cell::Num(1.0).render(), "1.0000000000000000e0");
    }

    #[test]
    fn header_then_rows() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.push(vec![Cell::Num(1.0), "x,y".into()]);
        let text = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(text, "a,b\n1.0000000000000000e0,\"x,y\"\n");
    }
}
