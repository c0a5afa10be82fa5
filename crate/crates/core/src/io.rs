//! Text formats for clouds, weighted measures, Gaussians and affine maps.
//!
//! Clouds are CSV with header `x0,x1,...,x{d-1}` and one point per row.
//! Weighted measures append a trailing `w` column. Gaussians are JSON
//! objects `{"mean":[...],"cov":[[...],...]}` and affine maps
//! `{"matrix":[[...],...],"shift":[...]}`.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{AffineMap, EmpiricalCloud, GaussianSpec, WeightedMeasure};

/// A measure as read from CSV: uniform unless a `w` column is present.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureInput {
    Cloud(EmpiricalCloud),
    Weighted(WeightedMeasure),
}

impl MeasureInput {
    pub fn dim(&self) -> usize {
        match self {
            MeasureInput::Cloud(c) => c.dim(),
            MeasureInput::Weighted(w) => w.dim(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            MeasureInput::Cloud(c) => c.len(),
            MeasureInput::Weighted(w) => w.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_weighted(&self) -> WeightedMeasure {
        match self {
            MeasureInput::Cloud(c) => WeightedMeasure::from_cloud(c),
            MeasureInput::Weighted(w) => w.clone(),
        }
    }
}

/// Shortest representation that round-trips; exponent form outside
/// `[1e-5, 1e16)` so tiny gaps stay readable.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

/// Parses cloud CSV text from any reader.
pub fn read_measure<R: Read>(reader: R) -> Result<MeasureInput> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(e.to_string()))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    let weighted = names.last() == Some(&"w");
    let d = if weighted { names.len() - 1 } else { names.len() };
    if d == 0 {
        return Err(Error::EmptyInput);
    }
    for (k, name) in names.iter().take(d).enumerate() {
        if *name != format!("x{k}") {
            return Err(parse_err(format!(
                "column {k} is named '{name}', expected 'x{k}'"
            )));
        }
    }
    let mut rows = Vec::new();
    let mut weights = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        if record.len() != names.len() {
            return Err(parse_err(format!(
                "row {line} has {} fields, expected {}",
                record.len(),
                names.len()
            )));
        }
        let mut values = Vec::with_capacity(names.len());
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(format!("row {line}, column {col}: '{field}'")))?;
            values.push(v);
        }
        if weighted {
            weights.push(values.pop().unwrap_or_default());
        }
        rows.push(values);
    }
    if weighted {
        Ok(MeasureInput::Weighted(WeightedMeasure::new(&rows, weights)?))
    } else {
        Ok(MeasureInput::Cloud(EmpiricalCloud::from_rows(&rows)?))
    }
}

pub fn read_measure_path(path: &Path) -> Result<MeasureInput> {
    read_measure(std::fs::File::open(path)?)
}

fn header(d: usize, weighted: bool) -> String {
    let mut cols: Vec<String> = (0..d).map(|k| format!("x{k}")).collect();
    if weighted {
        cols.push("w".to_string());
    }
    cols.join(",")
}

pub fn write_cloud<W: Write>(mut out: W, cloud: &EmpiricalCloud) -> Result<()> {
    writeln!(out, "{}", header(cloud.dim(), false))?;
    for i in 0..cloud.len() {
        let row: Vec<String> = cloud.point(i).iter().map(|&v| fmt_f64(v)).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_weighted<W: Write>(mut out: W, m: &WeightedMeasure) -> Result<()> {
    writeln!(out, "{}", header(m.dim(), true))?;
    for i in 0..m.len() {
        let mut row: Vec<String> = m.point(i).iter().map(|&v| fmt_f64(v)).collect();
        row.push(fmt_f64(m.weights()[i]));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct GaussianJson {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct AffineJson {
    matrix: Vec<Vec<f64>>,
    shift: Vec<f64>,
}

fn square_matrix(rows: &[Vec<f64>], d: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(parse_err(format!("{what} must be {d}×{d}")));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

pub fn parse_gaussian(text: &str) -> Result<GaussianSpec> {
    let raw: GaussianJson = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    let d = raw.mean.len();
    let cov = square_matrix(&raw.cov, d, "cov")?;
    GaussianSpec::new(DVector::from_vec(raw.mean), cov)
}

pub fn gaussian_to_json(g: &GaussianSpec) -> String {
    let d = g.dim();
    let raw = GaussianJson {
        mean: g.mean().iter().copied().collect(),
        cov: (0..d)
            .map(|i| (0..d).map(|j| g.covariance()[(i, j)]).collect())
            .collect(),
    };
    serde_json::to_string(&raw).expect("plain numbers serialize")
}

pub fn parse_affine(text: &str) -> Result<AffineMap> {
    let raw: AffineJson = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    let d = raw.shift.len();
    let m = square_matrix(&raw.matrix, d, "matrix")?;
    AffineMap::new(m, DVector::from_vec(raw.shift))
}
