//! CSV and JSON artifacts.
//!
//! CSV headers carry the provenance of each column as `name[provenance]`.
//! JSON reports are wrapped in an envelope with a schema version, the
//! producing command and the run configuration. Floats are written in Rust's
//! shortest round-trip form, so identical inputs give identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::solver::RadialSolution;

pub const SCHEMA_VERSION: u32 = 1;

/// Where a number comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Formula,
    Quadrature,
    Solver,
    Fit,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Formula => "formula",
            Provenance::Quadrature => "quadrature",
            Provenance::Solver => "solver",
            Provenance::Fit => "fit",
        }
    }
}

/// A numeric table with per-column provenance.
#[derive(Debug, Clone)]
pub struct Table {
    columns: Vec<(String, Provenance)>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[(&str, Provenance)]) -> Self {
        Self {
            columns: columns.iter().map(|(c, p)| (c.to_string(), *p)).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the header"
        );
        self.rows.push(row);
    }

    pub fn headers(&self) -> Vec<String> {
        self.columns
            .iter()
            .map(|(c, p)| format!("{c}[{}]", p.as_str()))
            .collect()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.headers())?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:?}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, D: Serialize> {
    schema_version: u32,
    command: &'a str,
    /// Provenance of the top-level sections of `data`.
    provenance: &'a [(&'a str, Provenance)],
    config: &'a C,
    data: &'a D,
}

/// Writes `data` as pretty-printed JSON inside the versioned envelope.
pub fn write_json<C: Serialize, D: Serialize>(
    path: &Path,
    command: &str,
    provenance: &[(&str, Provenance)],
    config: &C,
    data: &D,
) -> Result<()> {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        provenance,
        config,
        data,
    };
    let mut text = serde_json::to_string_pretty(&env)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes `stem.csv` with columns `r, u, w` and `stem.json` with the
/// solution metadata. Returns both paths.
pub fn write_solution(dir: &Path, stem: &str, sol: &RadialSolution) -> Result<(PathBuf, PathBuf)> {
    let mut t = Table::new(&[
        ("r", Provenance::Formula),
        ("u", Provenance::Solver),
        ("w", Provenance::Solver),
    ]);
    for (r, u, w) in sol.rows() {
        t.push(vec![r, u, w]);
    }
    let csv_path = dir.join(format!("{stem}.csv"));
    t.write_csv(&csv_path)?;
    let json_path = dir.join(format!("{stem}.json"));
    let mut text = serde_json::to_string_pretty(&sol.metadata())?;
    text.push('\n');
    fs::write(&json_path, text)?;
    Ok((csv_path, json_path))
}
