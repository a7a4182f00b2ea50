use std::fmt::Display;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::suites::{PerturbationReport, RatioReport};
use crate::error::Result;

/// Header plus rows, written with fixed formatting so reruns are byte-identical.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// Shortest round-trip representation.
pub fn cell<T: Display>(v: T) -> String {
    v.to_string()
}

pub fn write_csv(path: &Path, table: &CsvTable) -> Result<()> {
    fs::write(path, table.render())?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Provenance of one run. Deliberately free of timestamps.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_name: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub threads: usize,
    pub outputs: Vec<String>,
}

impl RatioReport {
    /// `n,seed_base,seed,numerator,denominator,ratio`
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["n", "seed_base", "seed", "numerator", "denominator", "ratio"]);
        for tr in &self.traces {
            for s in &tr.samples {
                t.push(vec![
                    cell(tr.n),
                    cell(tr.seed_base),
                    cell(s.seed),
                    cell(s.numerator),
                    cell(s.denominator),
                    cell(s.ratio),
                ]);
            }
        }
        t
    }
}

impl PerturbationReport {
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&[
            "r",
            "seed",
            "h_norm",
            "b_norm",
            "v_sup",
            "v_norm",
            "u_norm",
            "identity_residual",
        ]);
        for r in &self.rows {
            t.push(vec![
                cell(r.r),
                cell(r.seed),
                cell(r.h_norm),
                cell(r.b_norm),
                cell(r.v_sup),
                cell(r.v_norm),
                cell(r.u_norm),
                cell(r.identity_residual),
            ]);
        }
        t
    }
}
