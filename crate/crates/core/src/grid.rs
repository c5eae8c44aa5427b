//! Uniform node-centered discretization of the truncated plane `[-L, L]^2`.
//!
//! Nodes are stored row-major: the value at `(x_i, y_j)` lives at index
//! `j * n + i`. The node count per side is odd so that the origin is a node;
//! coordinates are computed as `(i - center) * h`, which makes the grid exactly
//! antisymmetric about the origin in floating point.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GlError, Result};

pub const MIN_POINTS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    half_width: f64,
    n: usize,
}

impl Grid2D {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(GlError::InvalidGrid(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        if n < MIN_POINTS {
            return Err(GlError::InvalidGrid(format!(
                "need at least {MIN_POINTS} points per side, got {n}"
            )));
        }
        if n.is_multiple_of(2) {
            return Err(GlError::InvalidGrid(format!(
                "points per side must be odd so the origin is a node, got {n}"
            )));
        }
        Ok(Self { half_width, n })
    }

    /// Grid with the given half width and (approximately) the given spacing.
    pub fn with_spacing(half_width: f64, h: f64) -> Result<Self> {
        let cells = (2.0 * half_width / h).round() as usize;
        let n = if cells.is_multiple_of(2) { cells + 1 } else { cells + 2 };
        Self::new(half_width, n)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }

    pub fn center(&self) -> usize {
        (self.n - 1) / 2
    }

    /// Coordinate of the i-th node along either axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - self.center() as f64) * self.h()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.n, idx / self.n)
    }

    #[inline]
    pub fn xy(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.ij(idx);
        (self.coord(i), self.coord(j))
    }

    pub fn origin(&self) -> usize {
        self.idx(self.center(), self.center())
    }

    #[inline]
    pub fn is_boundary(&self, idx: usize) -> bool {
        let (i, j) = self.ij(idx);
        i == 0 || j == 0 || i == self.n - 1 || j == self.n - 1
    }

    /// Boundary node indices in a fixed order (bottom, right, top, left; corners once).
    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&m| self.is_boundary(m)).collect()
    }

    /// Distance (in nodes) from the nearest boundary edge.
    pub fn boundary_distance(&self, idx: usize) -> usize {
        let (i, j) = self.ij(idx);
        let n = self.n - 1;
        i.min(j).min(n - i).min(n - j)
    }

    /// Values of `f` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> RealField {
        RealField {
            grid: *self,
            values: (0..self.len())
                .map(|m| {
                    let (x, y) = self.xy(m);
                    f(x, y)
                })
                .collect(),
        }
    }

    pub fn sample_complex(&self, f: impl Fn(f64, f64) -> Complex64) -> ComplexField {
        ComplexField {
            grid: *self,
            values: (0..self.len())
                .map(|m| {
                    let (x, y) = self.xy(m);
                    f(x, y)
                })
                .collect(),
        }
    }
}

/// `<x> = (1 + x^2 + y^2)^{1/2}`
#[inline]
pub fn japanese_bracket(x: f64, y: f64) -> f64 {
    (1.0 + x * x + y * y).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    pub grid: Grid2D,
    pub values: Vec<f64>,
}

impl RealField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid2D, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(GlError::ShapeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn ensure_finite(&self, what: &'static str) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(GlError::NonFinite { what, index }),
            None => Ok(()),
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    pub grid: Grid2D,
    pub values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_values(grid: Grid2D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(GlError::ShapeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn ensure_finite(&self, what: &'static str) -> Result<()> {
        match self
            .values
            .iter()
            .position(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            Some(index) => Err(GlError::NonFinite { what, index }),
            None => Ok(()),
        }
    }

    pub fn re(&self) -> RealField {
        RealField {
            grid: self.grid,
            values: self.values.iter().map(|z| z.re).collect(),
        }
    }

    pub fn im(&self) -> RealField {
        RealField {
            grid: self.grid,
            values: self.values.iter().map(|z| z.im).collect(),
        }
    }

    pub fn abs(&self) -> RealField {
        RealField {
            grid: self.grid,
            values: self.values.iter().map(|z| z.norm()).collect(),
        }
    }

    pub fn from_parts(re: &RealField, im: &RealField) -> Self {
        Self {
            grid: re.grid,
            values: re
                .values
                .iter()
                .zip(&im.values)
                .map(|(&a, &b)| Complex64::new(a, b))
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.norm()))
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| s * v).collect(),
        }
    }
}
