//! Dataset representation, augmented covariates and CSV ingestion.
//!
//! Covariates are stored row-major in one dense buffer. A response column is
//! optional; when present every row carries one.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("dataset is empty")]
    Empty,
    #[error("malformed row {row}: expected {expected} fields, found {found}")]
    MalformedRow { row: usize, expected: usize, found: usize },
    #[error("row {row}: non-numeric value {value:?} in column {column:?}")]
    NonNumeric { row: usize, column: String, value: String },
    #[error("row {row}: non-finite value {value:?} in column {column:?}")]
    NonFinite { row: usize, column: String, value: String },
    #[error("response column {0:?} not found in header")]
    MissingResponseColumn(String),
    #[error("column {0:?} has zero variance and cannot be standardized")]
    ConstantColumn(String),
    #[error("inconsistent shape: {0}")]
    Shape(String),
    #[error("log transform of column {column:?} at row {row}: value + offset = {shifted} is not positive")]
    LogDomain { row: usize, column: String, shifted: f64 },
}

/// One observation `d = (y, x)` with an owned covariate vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    pub x: Vec<f64>,
    pub y: Option<f64>,
}

impl DataPoint {
    pub fn new(x: Vec<f64>, y: Option<f64>) -> Self {
        Self { x, y }
    }

    pub fn as_ref(&self) -> PointRef<'_> {
        PointRef { x: &self.x, y: self.y }
    }
}

/// Borrowed view of a single row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointRef<'a> {
    pub x: &'a [f64],
    pub y: Option<f64>,
}

impl PointRef<'_> {
    pub fn to_owned(&self) -> DataPoint {
        DataPoint { x: self.x.to_vec(), y: self.y }
    }
}

/// Covariate vector with a leading constant: `z = (1, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedCovariate(Vec<f64>);

impl AugmentedCovariate {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// The original covariates, i.e. `z` without its leading 1.
    pub fn covariates(&self) -> &[f64] {
        &self.0[1..]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

pub fn augment(x: &[f64]) -> AugmentedCovariate {
    let mut z = Vec::with_capacity(x.len() + 1);
    z.push(1.0);
    z.extend_from_slice(x);
    AugmentedCovariate(z)
}

/// Linear index `θᵀz` without materializing `z`.
#[inline]
pub fn linear_index(theta: &[f64], x: &[f64]) -> f64 {
    debug_assert_eq!(theta.len(), x.len() + 1);
    let mut t = theta[0];
    for (b, v) in theta[1..].iter().zip(x) {
        t += b * v;
    }
    t
}

/// Per-column affine transform applied by standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    y: Option<Vec<f64>>,
    q: usize,
    column_names: Vec<String>,
    response_name: Option<String>,
    standardization: Option<Standardization>,
}

impl Dataset {
    /// Build from a flat row-major covariate buffer.
    pub fn from_flat(
        x: Vec<f64>,
        q: usize,
        y: Option<Vec<f64>>,
        column_names: Vec<String>,
    ) -> Result<Self, DataError> {
        if q == 0 && !x.is_empty() {
            return Err(DataError::Shape("q = 0 with covariate data".into()));
        }
        let n = if q == 0 { y.as_ref().map_or(0, Vec::len) } else { x.len() / q };
        if n == 0 {
            return Err(DataError::Empty);
        }
        if q > 0 && x.len() != n * q {
            return Err(DataError::Shape(format!("buffer of {} is not a multiple of q = {q}", x.len())));
        }
        if let Some(y) = &y {
            if y.len() != n {
                return Err(DataError::Shape(format!("{} responses for {n} rows", y.len())));
            }
        }
        if column_names.len() != q {
            return Err(DataError::Shape(format!("{} names for {q} columns", column_names.len())));
        }
        for (k, v) in x.iter().enumerate() {
            if !v.is_finite() {
                return Err(DataError::NonFinite {
                    row: k / q,
                    column: column_names[k % q].clone(),
                    value: v.to_string(),
                });
            }
        }
        if let Some(y) = &y {
            if let Some(i) = y.iter().position(|v| !v.is_finite()) {
                return Err(DataError::NonFinite { row: i, column: "response".into(), value: y[i].to_string() });
            }
        }
        Ok(Self { x, y, q, column_names, response_name: None, standardization: None })
    }

    pub fn from_points(points: &[DataPoint]) -> Result<Self, DataError> {
        let first = points.first().ok_or(DataError::Empty)?;
        let q = first.x.len();
        let has_y = first.y.is_some();
        let mut x = Vec::with_capacity(points.len() * q);
        let mut y = has_y.then(|| Vec::with_capacity(points.len()));
        for (i, p) in points.iter().enumerate() {
            if p.x.len() != q {
                return Err(DataError::Shape(format!("row {i} has {} covariates, expected {q}", p.x.len())));
            }
            if p.y.is_some() != has_y {
                return Err(DataError::Shape(format!("row {i}: response present on some rows only")));
            }
            x.extend_from_slice(&p.x);
            if let (Some(y), Some(v)) = (y.as_mut(), p.y) {
                y.push(v);
            }
        }
        let names = (1..=q).map(|j| format!("x{j}")).collect();
        Self::from_flat(x, q, y, names)
    }

    pub fn with_response_name(mut self, name: impl Into<String>) -> Self {
        self.response_name = Some(name.into());
        self
    }

    pub fn n(&self) -> usize {
        if self.q == 0 {
            self.y.as_ref().map_or(0, Vec::len)
        } else {
            self.x.len() / self.q
        }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Row `i` covariates.
    #[inline]
    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.q..(i + 1) * self.q]
    }

    #[inline]
    pub fn y(&self, i: usize) -> Option<f64> {
        self.y.as_ref().map(|y| y[i])
    }

    pub fn point(&self, i: usize) -> PointRef<'_> {
        PointRef { x: self.x(i), y: self.y(i) }
    }

    pub fn responses(&self) -> Option<&[f64]> {
        self.y.as_deref()
    }

    pub fn has_response(&self) -> bool {
        self.y.is_some()
    }

    pub fn covariates_flat(&self) -> &[f64] {
        &self.x
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn response_name(&self) -> Option<&str> {
        self.response_name.as_deref()
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    pub fn is_standardized(&self) -> bool {
        self.standardization.is_some()
    }

    pub fn rows(&self) -> impl Iterator<Item = PointRef<'_>> + '_ {
        (0..self.n()).map(move |i| self.point(i))
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(indices.len() * self.q);
        for &i in indices {
            x.extend_from_slice(self.x(i));
        }
        let y = self.y.as_ref().map(|y| indices.iter().map(|&i| y[i]).collect());
        Dataset {
            x,
            y,
            q: self.q,
            column_names: self.column_names.clone(),
            response_name: self.response_name.clone(),
            standardization: self.standardization.clone(),
        }
    }

    /// Shift each column to mean 0 and scale it to unit sample standard deviation.
    pub fn standardize(&self) -> Result<Dataset, DataError> {
        let n = self.n();
        let q = self.q;
        let mut means = vec![0.0; q];
        for i in 0..n {
            for (m, v) in means.iter_mut().zip(self.x(i)) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n as f64);
        let mut ss = vec![0.0; q];
        for i in 0..n {
            for ((s, v), m) in ss.iter_mut().zip(self.x(i)).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let denom = n.saturating_sub(1).max(1) as f64;
        let mut scales = Vec::with_capacity(q);
        for (j, s) in ss.iter().enumerate() {
            let sd = (s / denom).sqrt();
            if !(sd > 0.0) || sd <= f64::EPSILON * means[j].abs() {
                return Err(DataError::ConstantColumn(self.column_names[j].clone()));
            }
            scales.push(sd);
        }
        let mut x = self.x.clone();
        for row in x.chunks_mut(q) {
            for ((v, m), s) in row.iter_mut().zip(&means).zip(&scales) {
                *v = (*v - m) / s;
            }
        }
        Ok(Dataset {
            x,
            standardization: Some(Standardization { means, scales }),
            ..self.clone()
        })
    }

    /// Undo a previous [`Dataset::standardize`]. A no-op on raw data.
    pub fn destandardize(&self) -> Dataset {
        let Some(st) = &self.standardization else {
            return self.clone();
        };
        let mut x = self.x.clone();
        for row in x.chunks_mut(self.q) {
            for ((v, m), s) in row.iter_mut().zip(&st.means).zip(&st.scales) {
                *v = *v * s + m;
            }
        }
        Dataset { x, standardization: None, ..self.clone() }
    }

    /// Replace each covariate by `ln(x + offset)`.
    pub fn log_transform(&self, offset: f64) -> Result<Dataset, DataError> {
        let mut x = self.x.clone();
        for (k, v) in x.iter_mut().enumerate() {
            let shifted = *v + offset;
            if !(shifted > 0.0) {
                return Err(DataError::LogDomain {
                    row: k / self.q,
                    column: self.column_names[k % self.q].clone(),
                    shifted,
                });
            }
            *v = shifted.ln();
        }
        Ok(Dataset { x, ..self.clone() })
    }

    /// Write with a header row; the response (if any) comes first.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = Vec::with_capacity(self.q + 1);
        if self.y.is_some() {
            header.push(self.response_name.as_deref().unwrap_or("y"));
        }
        header.extend(self.column_names.iter().map(String::as_str));
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(self.q + 1);
        for i in 0..self.n() {
            record.clear();
            if let Some(y) = self.y(i) {
                record.push(format_float(y));
            }
            record.extend(self.x(i).iter().map(|v| format_float(*v)));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest decimal text that parses back to the same value.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

pub fn load_csv(
    path: impl AsRef<Path>,
    response_column: Option<&str>,
    standardize: bool,
) -> Result<Dataset, DataError> {
    read_csv(File::open(path)?, response_column, standardize)
}

pub fn read_csv<R: Read>(
    reader: R,
    response_column: Option<&str>,
    standardize: bool,
) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(DataError::Empty);
    }
    let response_idx = match response_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DataError::MissingResponseColumn(name.to_owned()))?,
        ),
        None => None,
    };
    let column_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != response_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut x = Vec::new();
    let mut y = response_idx.map(|_| Vec::new());
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(DataError::MalformedRow { row, expected: header.len(), found: record.len() });
        }
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| DataError::NonNumeric {
                row,
                column: header[j].clone(),
                value: cell.to_owned(),
            })?;
            if !value.is_finite() {
                return Err(DataError::NonFinite { row, column: header[j].clone(), value: cell.to_owned() });
            }
            if Some(j) == response_idx {
                y.as_mut().expect("response buffer").push(value);
            } else {
                x.push(value);
            }
        }
    }
    let q = column_names.len();
    let mut data = Dataset::from_flat(x, q, y, column_names)?;
    if let Some(name) = response_column {
        data = data.with_response_name(name);
    }
    if standardize {
        data = data.standardize()?;
    }
    Ok(data)
}
