use crate::error::{Error, Result};

use super::grid::Grid;

/// Values of a scalar function at every node of one grid.
///
/// Storage order follows the grid: interior nodes first, then boundary nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid_id: u64,
    n_interior: usize,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(Error::GridMismatch);
        }
        Ok(ScalarField {
            grid_id: grid.id(),
            n_interior: grid.num_interior(),
            values,
        })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        ScalarField {
            grid_id: grid.id(),
            n_interior: grid.num_interior(),
            values: grid.coords().iter().map(|&p| f(p)).collect(),
        }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self::from_fn(grid, |_| c)
    }

    /// Interior values plus explicit boundary values.
    pub fn from_parts(grid: &Grid, interior: &[f64], boundary: &[f64]) -> Result<Self> {
        if interior.len() != grid.num_interior() || boundary.len() != grid.num_boundary() {
            return Err(Error::GridMismatch);
        }
        let mut values = Vec::with_capacity(grid.num_nodes());
        values.extend_from_slice(interior);
        values.extend_from_slice(boundary);
        Self::from_values(grid, values)
    }

    pub fn grid_id(&self) -> u64 {
        self.grid_id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn interior(&self) -> &[f64] {
        &self.values[..self.n_interior]
    }

    pub fn boundary(&self) -> &[f64] {
        &self.values[self.n_interior..]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise map producing a new field on the same grid.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            grid_id: self.grid_id,
            n_interior: self.n_interior,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &ScalarField) -> Result<Self> {
        if other.grid_id != self.grid_id {
            return Err(Error::GridMismatch);
        }
        Ok(ScalarField {
            grid_id: self.grid_id,
            n_interior: self.n_interior,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + s * b)
                .collect(),
        })
    }

    /// Sup-norm of `self - other`.
    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        if other.grid_id != self.grid_id {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

/// A symmetric 2x2 matrix per interior node, stored as `[m11, m22, m12]`.
///
/// In one dimension only `m11` is meaningful and the other slots are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    grid_id: u64,
    dim: usize,
    entries: Vec<[f64; 3]>,
}

impl MatrixField {
    pub fn new(grid: &Grid, entries: Vec<[f64; 3]>) -> Result<Self> {
        if entries.len() != grid.num_interior() {
            return Err(Error::GridMismatch);
        }
        let dim = grid.dim();
        let entries = if dim == 1 {
            entries.into_iter().map(|m| [m[0], 0.0, 0.0]).collect()
        } else {
            entries
        };
        Ok(MatrixField {
            grid_id: grid.id(),
            dim,
            entries,
        })
    }

    pub fn grid_id(&self) -> u64 {
        self.grid_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[[f64; 3]] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub(crate) fn with_entries(&self, entries: Vec<[f64; 3]>) -> Self {
        MatrixField {
            grid_id: self.grid_id,
            dim: self.dim,
            entries,
        }
    }
}

/// Smallest eigenvalue of a symmetric matrix stored as `[m11, m22, m12]`.
pub fn min_eigenvalue(m: [f64; 3], dim: usize) -> f64 {
    if dim == 1 {
        return m[0];
    }
    let tr = 0.5 * (m[0] + m[1]);
    let disc = (0.5 * (m[0] - m[1])).hypot(m[2]);
    tr - disc
}
