use mems_core::{BifurcationCurve, CurvePoint, TermCause};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use std::io;
use std::path::Path;

pub const CURVE_HEADER: [&str; 6] = ["alpha", "abs_u0", "lambda", "branch_id", "fold_flag", "term_cause"];

/// 17 significant digits; parses back to the same f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    B(bool),
    S(String),
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::F(x) => fmt_f64(*x),
            Cell::I(i) => i.to_string(),
            Cell::B(b) => b.to_string(),
            Cell::S(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F(x) => serde_json::Number::from_f64(*x).map(Value::Number).unwrap_or(Value::Null),
            Cell::I(i) => Value::from(*i),
            Cell::B(b) => Value::Bool(*b),
            Cell::S(s) => Value::String(s.clone()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> io::Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::text))?;
        }
        w.into_inner().map_err(|e| io::Error::other(e.to_string()))
    }

    /// Array of row objects.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    let m: Map<String, Value> = self.header.iter().cloned().zip(r.iter().map(Cell::json)).collect();
                    Value::Object(m)
                })
                .collect(),
        )
    }
}

pub fn curve_table(curve: &BifurcationCurve) -> Table {
    let mut t = Table::new(&CURVE_HEADER);
    for p in &curve.points {
        t.push(vec![Cell::F(p.alpha), Cell::F(p.abs_u0), Cell::F(p.lambda), Cell::I(p.branch_id as i64), Cell::B(p.fold_flag), Cell::S(p.term_cause.to_string())]);
    }
    t
}

pub fn curve_to_csv(curve: &BifurcationCurve) -> io::Result<Vec<u8>> {
    curve_table(curve).to_csv()
}

pub fn curve_to_json(curve: &BifurcationCurve) -> serde_json::Result<Vec<u8>> {
    serde_json::to_vec_pretty(curve)
}

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("header must be {expected}, got {got}")]
    Header { expected: String, got: String },
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
}

/// Inverse of `curve_to_csv`. The CSV carries no ε, so it is passed in.
pub fn curve_from_csv(bytes: &[u8], eps: f64) -> Result<BifurcationCurve, ParseError> {
    let mut r = csv::Reader::from_reader(bytes);
    let h: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if h != CURVE_HEADER {
        return Err(ParseError::Header { expected: CURVE_HEADER.join(","), got: h.join(",") });
    }
    let mut curve = BifurcationCurve::new(eps);
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |msg: String| ParseError::Row { row: i + 1, msg };
        let f = |k: usize| rec[k].parse::<f64>().map_err(|e| bad(format!("{}: {e}", CURVE_HEADER[k])));
        curve.points.push(CurvePoint {
            alpha: f(0)?,
            abs_u0: f(1)?,
            lambda: f(2)?,
            branch_id: rec[3].parse().map_err(|e| bad(format!("branch_id: {e}")))?,
            fold_flag: rec[4].parse().map_err(|e| bad(format!("fold_flag: {e}")))?,
            term_cause: rec[5].parse::<TermCause>().map_err(bad)?,
        });
    }
    Ok(curve)
}

pub fn curve_from_json(bytes: &[u8]) -> Result<BifurcationCurve, ParseError> {
    Ok(serde_json::from_slice(bytes)?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}
