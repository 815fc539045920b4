use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};

use super::grid::Grid;
use crate::error::{Error, Result};

/// K-component grid function. Row k holds component k at the interior
/// points in [`Grid::index`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Array2<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Array2<f64>) -> Result<Self> {
        if values.ncols() != grid.points() || values.nrows() == 0 {
            return Err(Error::dimension(format!(
                "field values {:?} do not match grid with {} points",
                values.dim(),
                grid.points()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field entry {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid, components: usize) -> Self {
        Self {
            grid,
            values: Array2::zeros((components, grid.points())),
        }
    }

    /// `f(k, coords)` sampled at every interior point.
    pub fn from_fn(
        grid: Grid,
        components: usize,
        f: impl Fn(usize, &[f64]) -> f64,
    ) -> Result<Self> {
        let mut values = Array2::zeros((components, grid.points()));
        for p in 0..grid.points() {
            let x = grid.coords(p);
            for k in 0..components {
                values[[k, p]] = f(k, &x);
            }
        }
        Self::new(grid, values)
    }

    /// Inverse of [`Field::flat`]: component-major stacking.
    pub fn from_flat(grid: Grid, components: usize, flat: ArrayView1<f64>) -> Result<Self> {
        if flat.len() != components * grid.points() {
            return Err(Error::dimension(format!(
                "flat vector of length {} cannot hold {components} components on {} points",
                flat.len(),
                grid.points()
            )));
        }
        let values = flat
            .to_owned()
            .into_shape_with_order((components, grid.points()))
            .expect("length checked");
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn component(&self, k: usize) -> ArrayView1<'_, f64> {
        self.values.row(k)
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Unknown index `k * M + p`.
    pub fn flat(&self) -> Array1<f64> {
        Array1::from_iter(self.values.iter().copied())
    }

    /// h-weighted discrete L² inner product.
    pub fn dot(&self, other: &Field) -> f64 {
        self.grid.cell_weight() * (&self.values * &other.values).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn check_compatible(&self, grid: &Grid, components: usize) -> Result<()> {
        if self.grid != *grid || self.components() != components {
            return Err(Error::dimension(format!(
                "field ({}, K={}) does not match ({}, K={components})",
                self.grid.describe(),
                self.components(),
                grid.describe()
            )));
        }
        Ok(())
    }
}

pub type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Analytic initial profile, one closed-form function per component.
#[derive(Clone)]
pub struct Profile {
    pub name: String,
    pub components: Vec<PointFn>,
}

impl std::fmt::Debug for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Profile")
            .field("name", &self.name)
            .field("components", &self.components.len())
            .finish()
    }
}

impl Profile {
    pub fn new(name: impl Into<String>, components: Vec<PointFn>) -> Self {
        Self {
            name: name.into(),
            components,
        }
    }

    pub fn sample(&self, grid: &Grid) -> Result<Field> {
        Field::from_fn(*grid, self.components.len(), |k, x| (self.components[k])(x))
    }

    /// Largest magnitude on the boundary, sampled at the boundary nodes of `grid`.
    pub fn boundary_max(&self, grid: &Grid) -> f64 {
        let mut pts: Vec<Vec<f64>> = Vec::new();
        let xs: Vec<f64> = (0..=grid.nx() + 1).map(|i| i as f64 * grid.hx()).collect();
        if grid.dim() == 1 {
            pts.push(vec![0.0]);
            pts.push(vec![1.0]);
        } else {
            let ys: Vec<f64> = (0..=grid.ny() + 1).map(|i| i as f64 * grid.hy()).collect();
            for &x in &xs {
                pts.push(vec![x, 0.0]);
                pts.push(vec![x, 1.0]);
            }
            for &y in &ys {
                pts.push(vec![0.0, y]);
                pts.push(vec![1.0, y]);
            }
        }
        let mut m = 0.0f64;
        for f in &self.components {
            for p in &pts {
                m = m.max(f(p).abs());
            }
        }
        m
    }
}
