//! Uniform spatial grid on [0, L] and real-valued fields living on it.
//!
//! All integrals use the composite trapezoid rule. The grid includes both
//! endpoints; Neumann boundary behaviour comes from the cosine basis used in
//! [`crate::spectral`], not from ghost nodes.

use crate::error::{domain, usage, Result};

/// Closed uniform grid on `[0, L]` with `n_points` nodes (both endpoints
/// included).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    length: f64,
    n_points: usize,
}

impl Grid {
    pub fn new(length: f64, n_points: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(domain(format!("grid length must be positive, got {length}")));
        }
        if n_points < 3 {
            return Err(domain(format!("grid needs at least 3 points, got {n_points}")));
        }
        Ok(Grid { length, n_points })
    }

    /// Grid with spacing as close as possible to `dx` (rounded to an integer
    /// number of intervals).
    pub fn with_spacing(length: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(domain(format!("grid spacing must be positive, got {dx}")));
        }
        let intervals = (length / dx).round() as usize;
        Grid::new(length, intervals.max(2) + 1)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        self.length / (self.n_points - 1) as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        self.length * j as f64 / (self.n_points - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.node(j)).collect()
    }

    /// Trapezoid quadrature weight of node `j` (already times the spacing).
    pub fn weight(&self, j: usize) -> f64 {
        let w = if j == 0 || j == self.n_points - 1 { 0.5 } else { 1.0 };
        w * self.spacing()
    }
}

/// A real function sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(usage(format!(
                "field has {} values for a {}-point grid",
                values.len(),
                grid.n_points()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(domain("field values must be finite".to_string()));
        }
        Ok(Field { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        let n = grid.n_points();
        Field::new(grid, vec![value; n])
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..grid.n_points()).map(|j| f(grid.node(j))).collect();
        Field::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(usage("fields live on different grids".to_string()));
        }
        Ok(())
    }
}

/// Trapezoid-rule L² scalar product `⟨f, g⟩`.
pub fn inner(f: &Field, g: &Field) -> Result<f64> {
    f.check_same_grid(g)?;
    Ok(inner_slices(f.grid(), f.values(), g.values()))
}

pub(crate) fn inner_slices(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for j in 0..grid.n_points() {
        acc += grid.weight(j) * a[j] * b[j];
    }
    acc
}

/// Trapezoid-rule L¹ norm `∫ |f|`.
pub fn norm_1(f: &Field) -> f64 {
    norm_1_slice(f.grid(), f.values())
}

pub(crate) fn norm_1_slice(grid: &Grid, values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for j in 0..grid.n_points() {
        acc += grid.weight(j) * values[j].abs();
    }
    acc
}

/// Sup norm `max_j |f(x_j)|`.
pub fn norm_inf(f: &Field) -> f64 {
    norm_inf_slice(f.values())
}

pub(crate) fn norm_inf_slice(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
}

/// Trapezoid-rule L² norm.
pub fn norm_2(f: &Field) -> f64 {
    inner_slices(f.grid(), f.values(), f.values()).max(0.0).sqrt()
}
