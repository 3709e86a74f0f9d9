//! NDS*: `(3·mAP + Σ(1 − min(1, e)))/6` over the translation, scale and
//! orientation errors.

use std::io::Read;

use serde::Deserialize;

use crate::{Error, Result};

/// Tolerance used when checking reported 3-decimal scores.
pub const TABLE_TOLERANCE: f64 = 5e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionScores {
    pub map: f64,
    pub mate: f64,
    pub mase: f64,
    pub maoe: f64,
}

fn check_map(map: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&map) {
        return Err(Error::OutOfRange(format!("mAP = {map}")));
    }
    Ok(())
}

fn check_errors(errors: &[f64]) -> Result<()> {
    if let Some(e) = errors.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
        return Err(Error::OutOfRange(format!("TP error = {e}")));
    }
    Ok(())
}

pub fn nds_star(s: &DetectionScores) -> Result<f64> {
    check_map(s.map)?;
    let errors = [s.mate, s.mase, s.maoe];
    check_errors(&errors)?;
    let tp: f64 = errors.iter().map(|e| 1.0 - e.min(1.0)).sum();
    Ok((3.0 * s.map + tp) / 6.0)
}

/// Variant over an arbitrary set of N error terms: `(N·mAP + Σ(1 − min(1, e)))/(2N)`.
/// Keeps mAP at half the weight; with N = 3 it equals [`nds_star`].
pub fn nds_star_generic(map: f64, errors: &[f64]) -> Result<f64> {
    check_map(map)?;
    check_errors(errors)?;
    if errors.is_empty() {
        return Err(Error::OutOfRange("no TP error terms".into()));
    }
    let n = errors.len() as f64;
    let tp: f64 = errors.iter().map(|e| 1.0 - e.min(1.0)).sum();
    Ok((n * map + tp) / (2.0 * n))
}

/// One reported result row with its published score.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TableRow {
    pub table: String,
    pub setting: String,
    pub method: String,
    pub map: f64,
    pub mate: f64,
    pub mase: f64,
    pub maoe: f64,
    pub nds: f64,
}

impl TableRow {
    pub fn scores(&self) -> DetectionScores {
        DetectionScores { map: self.map, mate: self.mate, mase: self.mase, maoe: self.maoe }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowCheck {
    pub row: TableRow,
    pub computed: f64,
    pub pass: bool,
}

impl RowCheck {
    pub fn diff(&self) -> f64 {
        self.computed - self.row.nds
    }
}

/// Reads rows with header `table,setting,method,map,mate,mase,maoe,nds`.
pub fn read_table_csv<R: Read>(input: R) -> Result<Vec<TableRow>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input)
        .deserialize()
        .map(|r| r.map_err(|e| Error::Format(format!("CSV: {e}"))))
        .collect()
}

/// Recomputes every row; a row passes if `|computed − reported| ≤ tol`.
pub fn check_rows(rows: &[TableRow], tol: f64) -> Result<Vec<RowCheck>> {
    rows.iter()
        .map(|row| {
            let computed = nds_star(&row.scores())?;
            // reported values are 3-decimal strings; absorb binary rounding at the boundary
            let pass = (computed - row.nds).abs() <= tol + 1e-12;
            Ok(RowCheck { row: row.clone(), computed, pass })
        })
        .collect()
}
