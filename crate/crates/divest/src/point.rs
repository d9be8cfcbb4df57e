//! Flat storage for sets of points in the unit cube.

use crate::{Error, Result};

/// A set of `d`-dimensional points stored row-major in one contiguous buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    /// Create an empty set of points of the given dimension.
    pub fn new(dim: usize) -> Self {
        PointSet {
            dim,
            coords: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, n: usize) -> Self {
        PointSet {
            dim,
            coords: Vec::with_capacity(dim * n),
        }
    }

    /// Build from a flat row-major coordinate buffer.
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("dimension must be at least 1"));
        }
        if coords.len() % dim != 0 {
            return Err(Error::domain(format!(
                "flat buffer of {} coordinates is not a multiple of dim {}",
                coords.len(),
                dim
            )));
        }
        Ok(PointSet { dim, coords })
    }

    pub fn push(&mut self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch(point.len(), self.dim));
        }
        self.coords.extend_from_slice(point);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// First `k` points as a borrowed-then-copied subset.
    pub fn take(&self, k: usize) -> PointSet {
        PointSet {
            dim: self.dim,
            coords: self.coords[..k * self.dim].to_vec(),
        }
    }

    /// Points from index `k` onward.
    pub fn skip(&self, k: usize) -> PointSet {
        PointSet {
            dim: self.dim,
            coords: self.coords[k * self.dim..].to_vec(),
        }
    }

    /// Check every coordinate lies in [0,1].
    pub fn validate_unit_cube(&self) -> Result<()> {
        for (i, &c) in self.coords.iter().enumerate() {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::domain(format!(
                    "coordinate {} of point {} is {} (outside [0,1])",
                    i % self.dim,
                    i / self.dim,
                    c
                )));
            }
        }
        Ok(())
    }
}
