//! CSV tables with fixed float formatting, written atomically.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::CliError;

/// 17 significant digits, so values round-trip and output is byte-stable.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Column names `prefix_1 .. prefix_n`.
pub fn vector_columns(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}_{i}")).collect()
}

/// Column names `prefix_11 .. prefix_rc`, row-major. Indices are separated
/// by `_` once either dimension reaches 10.
pub fn matrix_columns(prefix: &str, rows: usize, cols: usize) -> Vec<String> {
    let sep = if rows >= 10 || cols >= 10 { "_" } else { "" };
    (1..=rows).flat_map(|i| (1..=cols).map(move |j| format!("{prefix}_{i}{sep}{j}"))).collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Row) {
        debug_assert_eq!(row.0.len(), self.header.len());
        self.rows.push(row.0);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Writes to a temporary file beside `path` and renames it into place,
    /// so a failed run never leaves a partial file behind.
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let err = |e: csv::Error| CliError::Input(format!("{}: {e}", path.display()));
            w.write_record(&self.header).map_err(err)?;
            for r in &self.rows {
                w.write_record(r).map_err(err)?;
            }
            w.flush().map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        }
        write_atomic(path, &buf)
    }
}

/// Builder for one CSV row.
#[derive(Clone, Debug, Default)]
pub struct Row(Vec<String>);

impl Row {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num(mut self, v: f64) -> Self {
        self.0.push(fmt(v));
        self
    }

    pub fn vector(mut self, v: &DVector<f64>) -> Self {
        self.0.extend(v.iter().map(|x| fmt(*x)));
        self
    }

    /// Row-major.
    pub fn matrix(mut self, m: &DMatrix<f64>) -> Self {
        for i in 0..m.nrows() {
            self.0.extend(m.row(i).iter().map(|x| fmt(*x)));
        }
        self
    }

    pub fn text(mut self, s: &str) -> Self {
        self.0.push(s.to_string());
        self
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// A numeric CSV read back: header plus rows of floats.
#[derive(Clone, Debug, PartialEq)]
pub struct NumericTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl NumericTable {
    /// Parses CSV text with a header row; every cell must be a float.
    /// Errors name the record line and column.
    pub fn parse(src: &str, what: &str) -> Result<Self, CliError> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(src.as_bytes());
        let header: Vec<String> = rd
            .headers()
            .map_err(|e| CliError::Input(format!("{what}: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.is_empty() || header.iter().all(String::is_empty) {
            return Err(CliError::Input(format!("{what}: missing header row")));
        }
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(|e| CliError::Input(format!("{what}: {e}")))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.len() != header.len() {
                return Err(CliError::Input(format!("{what}:{line}: expected {} fields, got {}", header.len(), rec.len())));
            }
            let row = rec
                .iter()
                .enumerate()
                .map(|(c, cell)| {
                    cell.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| CliError::Input(format!("{what}:{line}:{}: not a finite number: {cell:?}", c + 1)))
                })
                .collect::<Result<Vec<f64>, _>>()?;
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    /// Index of each named column, in order.
    pub fn columns(&self, names: &[String], what: &str) -> Result<Vec<usize>, CliError> {
        names
            .iter()
            .map(|n| {
                self.header
                    .iter()
                    .position(|h| h == n)
                    .ok_or_else(|| CliError::Input(format!("{what}: missing column {n:?}")))
            })
            .collect()
    }
}
