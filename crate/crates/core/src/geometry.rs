//! Vector primitives: cosine similarity, pairwise mean pooling and batched
//! pair-vs-candidate scoring.
//!
//! Vectors are stored as raw `f32` (never pre-normalised, so that mean pooling
//! operates on the raw encoder outputs). Every reduction accumulates in `f64`.

use alloc::vec::Vec;
use core::cell::OnceCell;

use crate::error::{Error, Result};

/// A finite, non-empty embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(Vec<f32>);

impl Vector {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self(values))
    }

    /// Rounds `f64` values to `f32` storage.
    pub fn from_f64(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| v as f32).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    /// Multiplies every entry by `factor`.
    pub fn scaled(&self, factor: f32) -> Result<Self> {
        Self::new(self.0.iter().map(|v| v * factor).collect())
    }
}

impl AsRef<[f32]> for Vector {
    fn as_ref(&self) -> &[f32] {
        &self.0
    }
}

#[inline]
pub fn dot(u: &[f32], v: &[f32]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(&a, &b)| f64::from(a) * f64::from(b))
        .sum()
}

#[inline]
pub fn norm(u: &[f32]) -> f64 {
    libm::sqrt(dot(u, u))
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimMismatch { expected, found })
    }
}

/// Cosine between two raw slices with precomputed norms.
#[inline]
pub(crate) fn cosine_with_norms(u: &[f32], nu: f64, v: &[f32], nv: f64) -> f64 {
    dot(u, v) / (nu * nv)
}

pub fn cosine_slices(u: &[f32], v: &[f32]) -> Result<f64> {
    check_dims(u.len(), v.len())?;
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm { what: "", row: None });
    }
    Ok(cosine_with_norms(u, nu, v, nv))
}

/// `dot(u, v) / (|u| |v|)`.
pub fn cosine(u: &Vector, v: &Vector) -> Result<f64> {
    cosine_slices(&u.0, &v.0)
}

/// Elementwise average `(u + v) / 2`.
pub fn mean_pool(u: &Vector, v: &Vector) -> Result<Vector> {
    check_dims(u.dim(), v.dim())?;
    Ok(Vector(mean_pool_slices(&u.0, &v.0)))
}

pub(crate) fn mean_pool_slices(u: &[f32], v: &[f32]) -> Vec<f32> {
    u.iter().zip(v).map(|(a, b)| (a + b) * 0.5).collect()
}

/// Row-major `f32` matrix whose row norms are computed on first use and cached.
#[derive(Debug, Clone)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
    norms: OnceCell<Vec<f64>>,
}

impl PartialEq for Matrix {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.data == other.data
    }
}

impl Matrix {
    pub fn from_flat(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if cols == 0 {
            return Err(Error::EmptyVector);
        }
        check_dims(rows * cols, data.len())?;
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            rows,
            cols,
            data,
            norms: OnceCell::new(),
        })
    }

    /// Stacks vectors of a common dimension `cols`.
    pub fn from_rows<'a, I>(cols: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Vector>,
    {
        let mut data = Vec::new();
        let mut n = 0;
        for row in rows {
            check_dims(cols, row.dim())?;
            data.extend_from_slice(row.as_slice());
            n += 1;
        }
        Self::from_flat(n, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_vector(&self, r: usize) -> Vector {
        Vector(self.row(r).to_vec())
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn norms(&self) -> &[f64] {
        self.norms
            .get_or_init(|| (0..self.rows).map(|r| norm(self.row(r))).collect())
    }

    /// Index of the first zero-norm row, if any.
    pub fn first_zero_row(&self) -> Option<usize> {
        self.norms().iter().position(|&n| n == 0.0)
    }
}

/// Row-major `f64` score table.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ScoreMatrix {
    pub fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Scores of one candidate (column) across all rows.
    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }
}

/// Cosine of every pair-mean row against every candidate row
/// (`pairs.rows() x candidates.rows()`).
pub fn batch_pair_candidate_scores(pairs: &Matrix, candidates: &Matrix) -> Result<ScoreMatrix> {
    check_dims(pairs.cols(), candidates.cols())?;
    if let Some(row) = pairs.first_zero_row() {
        return Err(Error::ZeroNorm { what: "pair", row: Some(row) });
    }
    if let Some(row) = candidates.first_zero_row() {
        return Err(Error::ZeroNorm { what: "candidate", row: Some(row) });
    }
    let pn = pairs.norms();
    let cn = candidates.norms();
    let mut data = Vec::with_capacity(pairs.rows() * candidates.rows());
    for p in 0..pairs.rows() {
        let pr = pairs.row(p);
        for c in 0..candidates.rows() {
            data.push(cosine_with_norms(pr, pn[p], candidates.row(c), cn[c]));
        }
    }
    ScoreMatrix::from_flat(pairs.rows(), candidates.rows(), data)
}
