//! Sweep CSV rows and golden-file comparison.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::models::{DifficultySource, Ledger, ModelKind, ModelParams, TieBreak};

/// Header of every sweep CSV, in order.
pub const COLUMNS: [&str; 13] = [
    "model",
    "tie_break_mode",
    "difficulty_source",
    "ledger_function",
    "acceptable_path_param",
    "max_fork",
    "max_pool",
    "fee",
    "guaranteed_fee",
    "alpha",
    "Honest",
    "ARR Revenue",
    "Threshold",
];

/// Written in the value columns of a point whose solve failed.
pub const ERROR_MARKER: &str = "error";

/// A value column: empty, a number, or a failed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Empty,
    Value(f64),
    Failed,
}

impl Cell {
    fn render(self) -> String {
        match self {
            Cell::Empty => String::new(),
            Cell::Value(v) => v.to_string(),
            Cell::Failed => ERROR_MARKER.to_string(),
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Cell::Value(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub model: ModelKind,
    pub params: ModelParams<f64>,
    /// Whether `alpha` applies (not for threshold rows).
    pub has_alpha: bool,
    pub honest: Cell,
    pub revenue: Cell,
    pub threshold: Cell,
}

impl SweepRecord {
    pub fn row(&self) -> Vec<String> {
        let p = &self.params;
        vec![
            self.model.to_string(),
            p.tie_break.to_string(),
            p.difficulty_source.to_string(),
            p.ledger.to_string(),
            p.fork_sensitivity.to_string(),
            p.max_fork.to_string(),
            p.max_pool.to_string(),
            p.whale_fee.to_string(),
            p.guaranteed_fee.to_string(),
            if self.has_alpha {
                p.alpha.to_string()
            } else {
                String::new()
            },
            self.honest.render(),
            self.revenue.render(),
            self.threshold.render(),
        ]
    }
}

/// Checks that an enum cell holds the exact vocabulary name (no aliases).
fn check_enum<T: FromStr<Err = Error> + ToString>(column: &str, cell: &str) -> Result<()> {
    let parsed: T = cell
        .parse()
        .map_err(|e: Error| Error::Schema(format!("column {column}: {e}")))?;
    if parsed.to_string() != cell {
        return Err(Error::Schema(format!(
            "column {column}: {cell:?} is an alias; expected {:?}",
            parsed.to_string()
        )));
    }
    Ok(())
}

fn check_cell(column: &str, cell: &str) -> Result<()> {
    match column {
        "model" => check_enum::<ModelKind>(column, cell),
        "tie_break_mode" => check_enum::<TieBreak>(column, cell),
        "difficulty_source" => check_enum::<DifficultySource>(column, cell),
        "ledger_function" => check_enum::<Ledger>(column, cell),
        _ if cell.is_empty() || cell == ERROR_MARKER || cell.parse::<f64>().is_ok() => Ok(()),
        _ => Err(Error::Schema(format!(
            "column {column}: {cell:?} is not a number"
        ))),
    }
}

/// Reads a sweep CSV, checking the header and every cell.
pub fn read_sweep_csv(path: &Path) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != COLUMNS {
        return Err(Error::Schema(format!(
            "{}: header {:?} does not match {:?}",
            path.display(),
            header,
            COLUMNS
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row: Vec<String> = rec.iter().map(str::to_string).collect();
        for (column, cell) in COLUMNS.iter().zip(&row) {
            check_cell(column, cell)
                .map_err(|e| Error::Schema(format!("{} row {}: {e}", path.display(), i + 1)))?;
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Absolute tolerances for numeric columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tolerances {
    pub default: f64,
    pub columns: BTreeMap<String, f64>,
}

impl Tolerances {
    pub fn uniform(tol: f64) -> Self {
        Self {
            default: tol,
            columns: BTreeMap::new(),
        }
    }

    /// Adds `column=tol` overrides, e.g. `Threshold=1e-3`.
    pub fn with(mut self, spec: &str) -> Result<Self> {
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (column, tol) = item.split_once('=').ok_or_else(|| {
                Error::Config(format!("tolerance {item:?}: expected column=value"))
            })?;
            let column = column.trim();
            if !COLUMNS.contains(&column) {
                return Err(Error::Config(format!(
                    "tolerance for unknown column {column:?}"
                )));
            }
            let tol: f64 = tol
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("tolerance {item:?}: bad number")))?;
            self.columns.insert(column.to_string(), tol);
        }
        Ok(self)
    }

    pub fn of(&self, column: &str) -> f64 {
        self.columns.get(column).copied().unwrap_or(self.default)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    /// Data row, counting from 1.
    pub row: usize,
    pub column: String,
    pub got: String,
    pub expected: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub rows: usize,
    pub golden_rows: usize,
    pub mismatches: Vec<Mismatch>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.rows == self.golden_rows && self.mismatches.is_empty()
    }
}

fn cells_agree(got: &str, expected: &str, tol: f64) -> bool {
    if got == expected {
        return true;
    }
    match (got.parse::<f64>(), expected.parse::<f64>()) {
        (Ok(a), Ok(b)) => (a - b).abs() <= tol,
        _ => false,
    }
}

/// Compares a sweep CSV against a golden file row by row.
pub fn verify_csv(file: &Path, golden: &Path, tolerances: &Tolerances) -> Result<VerifyReport> {
    let got = read_sweep_csv(file)?;
    let expected = read_sweep_csv(golden)?;
    let mut mismatches = Vec::new();
    for (i, (g, e)) in got.iter().zip(&expected).enumerate() {
        for (c, column) in COLUMNS.iter().enumerate() {
            if !cells_agree(&g[c], &e[c], tolerances.of(column)) {
                mismatches.push(Mismatch {
                    row: i + 1,
                    column: column.to_string(),
                    got: g[c].clone(),
                    expected: e[c].clone(),
                });
            }
        }
    }
    Ok(VerifyReport {
        rows: got.len(),
        golden_rows: expected.len(),
        mismatches,
    })
}
