//! Row-major storage for input locations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n` points in `dim` dimensions, stored row by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    dim: usize,
    data: Vec<f64>,
}

impl Inputs {
    pub fn new(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("input dimension must be positive".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} values do not form rows of length {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    /// One-dimensional inputs.
    pub fn from_1d(x: Vec<f64>) -> Self {
        Self { dim: 1, data: x }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(1, |r| r.len());
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidArgument("rows have different lengths".into()));
        }
        Self::new(rows.concat(), dim)
    }

    /// An empty set of points in `dim` dimensions.
    pub fn empty(dim: usize) -> Self {
        Self { dim, data: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Values of one coordinate across all points.
    pub fn column(&self, d: usize) -> Vec<f64> {
        self.rows().map(|r| r[d]).collect()
    }

    /// Points at the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self { dim: self.dim, data }
    }

    /// Contiguous block of rows `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self { dim: self.dim, data: self.data[start * self.dim..end * self.dim].to_vec() }
    }

    /// Index of the first row holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.rows().position(|r| r.iter().any(|v| !v.is_finite()))
    }

    /// Per-dimension `(min, max)`.
    pub fn ranges(&self) -> Vec<(f64, f64)> {
        let mut out = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim];
        for r in self.rows() {
            for (o, v) in out.iter_mut().zip(r) {
                o.0 = o.0.min(*v);
                o.1 = o.1.max(*v);
            }
        }
        out
    }
}
