//! CSV and JSON output. CSV files are long-format with a header row and
//! complex numbers split into `re`/`im` columns; metadata travels in a JSON
//! object next to them.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::quadform::OperatorMatrix;

pub const TOOL_NAME: &str = "gaussweyl";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Outcome of the contract attached to a command.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ContractStatus {
    pub ok: bool,
    pub violations: Vec<String>,
}

impl ContractStatus {
    pub fn passed() -> Self {
        ContractStatus {
            ok: true,
            violations: Vec::new(),
        }
    }

    pub fn check(&mut self, cond: bool, what: impl Into<String>) {
        if !cond {
            self.ok = false;
            self.violations.push(what.into());
        }
    }
}

/// Top-level JSON object written by every command.
#[derive(Debug, Clone, Serialize)]
pub struct Report<C: Serialize, R: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub reference: String,
    pub config: C,
    pub quadrature: Vec<serde_json::Value>,
    pub contract: ContractStatus,
    pub results: R,
}

impl<C: Serialize, R: Serialize> Report<C, R> {
    pub fn new(reference: impl Into<String>, config: C, results: R) -> Self {
        Report {
            tool: TOOL_NAME,
            version: TOOL_VERSION,
            reference: reference.into(),
            config,
            quadrature: Vec::new(),
            contract: ContractStatus::passed(),
            results,
        }
    }
}

pub fn write_json<T: Serialize, W: Write>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

/// One CSV row per serialized record, header taken from the field names.
pub fn write_rows_csv<T: Serialize, W: Write>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct MatrixRow {
    pub row_index: usize,
    pub col_index: usize,
    pub row_alpha: String,
    pub col_alpha: String,
    pub re: f64,
    pub im: f64,
}

pub fn matrix_rows(m: &OperatorMatrix) -> Vec<MatrixRow> {
    let idx = m.truncation.indices();
    let n = m.dim();
    let mut rows = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let v = m.matrix.get(i, j);
            rows.push(MatrixRow {
                row_index: i,
                col_index: j,
                row_alpha: idx[i].to_string(),
                col_alpha: idx[j].to_string(),
                re: v.re,
                im: v.im,
            });
        }
    }
    rows
}

pub fn write_matrix_csv<W: Write>(out: W, m: &OperatorMatrix) -> Result<()> {
    write_rows_csv(out, &matrix_rows(m))
}
