//! Gridded real-valued fields.
//!
//! Axis 0 of `values` is axis 1 of the physical grid (rows, North-South),
//! axis 1 is axis 2 (columns, East-West). Every transform in the crate uses
//! this convention.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Default grid spacing in km.
pub const DEFAULT_GRID_SPACING: f64 = 2.8;

#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    pub values: Array2<f64>,
    /// km per grid point
    pub grid_spacing: f64,
    pub name: String,
    pub time: String,
}

impl Field2D {
    /// Builds a field, rejecting grids smaller than 2x2 and non-finite values.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        Self::with_spacing(values, DEFAULT_GRID_SPACING)
    }

    pub fn with_spacing(values: Array2<f64>, grid_spacing: f64) -> Result<Self> {
        let (rows, cols) = values.dim();
        if rows < 2 || cols < 2 {
            return Err(Error::Validation(format!(
                "field must be at least 2x2, got {rows}x{cols}"
            )));
        }
        if let Some((idx, v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value {v} at ({}, {})",
                idx.0, idx.1
            )));
        }
        if !(grid_spacing.is_finite() && grid_spacing > 0.0) {
            return Err(Error::Validation(format!(
                "grid spacing must be positive, got {grid_spacing}"
            )));
        }
        Ok(Self {
            values,
            grid_spacing,
            name: String::new(),
            time: String::new(),
        })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dim()
    }
}

/// Rectangle of grid points, used to locate an original field inside its
/// padded grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Region {
    pub row0: usize,
    pub col0: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Region {
    pub fn full(dims: (usize, usize)) -> Self {
        Self {
            row0: 0,
            col0: 0,
            rows: dims.0,
            cols: dims.1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn fits_in(&self, dims: (usize, usize)) -> bool {
        self.row0 + self.rows <= dims.0 && self.col0 + self.cols <= dims.1
    }
}

pub(crate) fn is_power_of_two(n: usize) -> bool {
    n >= 1 && n.is_power_of_two()
}
