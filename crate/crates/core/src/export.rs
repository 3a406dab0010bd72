//! RFC-4180 tables with an optional one-line `#` header carrying the run
//! configuration. Reals are written with 17 significant digits.

use std::io::Write;

use crate::error::{Error, Result};
use crate::expansion::ExpansionEvaluation;
use crate::sgd::EstimateWithError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Real(v) => format_real(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
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

/// Scientific notation with 17 significant digits.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                got: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Column `name` as reals; non-real cells become NaN.
    pub fn real_column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match r[k] {
                    Cell::Real(v) => v,
                    Cell::Int(v) => v as f64,
                    Cell::Text(_) => f64::NAN,
                })
                .collect(),
        )
    }
}

/// Writes `# {header}` (when given) followed by the table.
pub fn write_csv<W: Write>(mut out: W, header: Option<&str>, table: &Table) -> Result<()> {
    if let Some(h) = header {
        if h.contains('\n') {
            return Err(Error::InvalidParameter("CSV header must be a single line".into()));
        }
        write!(out, "# {h}\r\n")?;
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(&table.columns).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(header: Option<&str>, table: &Table) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, header, table)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

/// Columns (n, value, std_error, n_samples).
pub fn estimates_table(ns: &[usize], estimates: &[EstimateWithError]) -> Table {
    let mut t = Table::new(["n", "value", "std_error", "n_samples"]);
    for (n, e) in ns.iter().zip(estimates) {
        t.rows.push(vec![(*n).into(), e.value.into(), e.std_error.into(), e.n_samples.into()]);
    }
    t
}

/// Columns (x, t, u0, u1, u_trunc, method); x is the first coordinate, with
/// further coordinates as x2, x3, ... when d > 1.
pub fn expansion_table(evals: &[ExpansionEvaluation]) -> Table {
    let d = evals.first().map_or(1, |e| e.x.len());
    let mut cols: Vec<String> = vec!["x".into()];
    cols.extend((2..=d).map(|k| format!("x{k}")));
    cols.extend(["t", "u0", "u1", "u_trunc", "method"].map(String::from));
    let mut t = Table::new(cols);
    for e in evals {
        let mut row: Vec<Cell> = e.x.iter().map(|v| Cell::Real(*v)).collect();
        row.extend([e.t.into(), e.u0.into(), e.u1.into(), e.u_trunc.into(), e.method.as_str().into()]);
        t.rows.push(row);
    }
    t
}

/// Long format (path, step, x...) for recorded chains.
pub fn paths_table(paths: &[Vec<Vec<f64>>]) -> Table {
    let d = paths.first().and_then(|p| p.first()).map_or(1, Vec::len);
    let mut cols = vec!["path".to_string(), "step".to_string()];
    cols.extend((1..=d).map(|k| format!("x{k}")));
    let mut t = Table::new(cols);
    for (i, p) in paths.iter().enumerate() {
        for (n, x) in p.iter().enumerate() {
            let mut row = vec![Cell::from(i), Cell::from(n)];
            row.extend(x.iter().map(|v| Cell::Real(*v)));
            t.rows.push(row);
        }
    }
    t
}

/// Long format (path, t, x...) for recorded diffusion paths.
pub fn sde_paths_table(paths: &[Vec<(f64, Vec<f64>)>]) -> Table {
    let d = paths.first().and_then(|p| p.first()).map_or(1, |(_, x)| x.len());
    let mut cols = vec!["path".to_string(), "t".to_string()];
    cols.extend((1..=d).map(|k| format!("x{k}")));
    let mut t = Table::new(cols);
    for (i, p) in paths.iter().enumerate() {
        for (s, x) in p {
            let mut row = vec![Cell::from(i), Cell::Real(*s)];
            row.extend(x.iter().map(|v| Cell::Real(*v)));
            t.rows.push(row);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_and_quoting() {
        let mut t = Table::new(["a", "b"]);
        t.push(vec![1.5.into(), "x,y".into()]).unwrap();
        let s = to_csv_string(Some("{\"k\":1}"), &t).unwrap();
        assert_eq!(s, "# {\"k\":1}\r\na,b\r\n1.5000000000000000e0,\"x,y\"\r\n");
    }

    #[test]
    fn rejects_ragged_rows() {
        let mut t = Table::new(["a", "b"]);
        assert!(t.push(vec![1.0.into()]).is_err());
    }

    #[test]
    fn multiline_header_rejected() {
        assert!(to_csv_string(Some("a\nb"), &Table::new(["a"])).is_err());
    }

    #[test]
    fn non_finite_reals() {
        assert_eq!(format_real(f64::NAN), "nan");
        assert_eq!(format_real(f64::NEG_INFINITY), "-inf");
    }

    proptest! {
        #[test]
        fn reals_round_trip(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let back: f64 = format_real(v).parse().unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }
    }
}
