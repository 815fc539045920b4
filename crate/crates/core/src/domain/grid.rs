use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid of interior nodes on the unit interval or unit square.
/// Boundary nodes carry homogeneous Dirichlet data and are not stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    nx: usize,
    ny: usize,
}

pub const MIN_INTERIOR: usize = 3;

impl Grid {
    pub fn new_1d(nx: usize) -> Result<Self> {
        check_axis(nx)?;
        Ok(Self { dim: 1, nx, ny: 1 })
    }

    pub fn new_2d(nx: usize, ny: usize) -> Result<Self> {
        check_axis(nx)?;
        check_axis(ny)?;
        Ok(Self { dim: 2, nx, ny })
    }

    /// `shape` holds one interior count per axis.
    pub fn from_shape(shape: &[usize]) -> Result<Self> {
        match *shape {
            [nx] => Self::new_1d(nx),
            [nx, ny] => Self::new_2d(nx, ny),
            _ => Err(Error::dimension(format!(
                "grid must be 1D or 2D, got shape {shape:?}"
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    /// 1 for a 1D grid.
    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn shape(&self) -> Vec<usize> {
        if self.dim == 1 {
            vec![self.nx]
        } else {
            vec![self.nx, self.ny]
        }
    }

    /// Number of interior points M.
    pub fn points(&self) -> usize {
        self.nx * self.ny
    }

    pub fn hx(&self) -> f64 {
        1.0 / (self.nx + 1) as f64
    }

    pub fn hy(&self) -> f64 {
        if self.dim == 1 {
            1.0
        } else {
            1.0 / (self.ny + 1) as f64
        }
    }

    pub fn spacing(&self) -> Vec<f64> {
        if self.dim == 1 {
            vec![self.hx()]
        } else {
            vec![self.hx(), self.hy()]
        }
    }

    /// Quadrature weight of one node in the discrete L² pairing.
    pub fn cell_weight(&self) -> f64 {
        self.hx() * self.hy()
    }

    /// Flat point index, x fastest.
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn ij(&self, p: usize) -> (usize, usize) {
        (p % self.nx, p / self.nx)
    }

    /// Coordinates of interior point `p`; length equals `dim`.
    pub fn coords(&self, p: usize) -> Vec<f64> {
        let (ix, iy) = self.ij(p);
        let x = (ix + 1) as f64 * self.hx();
        if self.dim == 1 {
            vec![x]
        } else {
            vec![x, (iy + 1) as f64 * self.hy()]
        }
    }

    pub fn axis_nodes(&self, axis: usize) -> Vec<f64> {
        let (n, h) = if axis == 0 {
            (self.nx, self.hx())
        } else {
            (self.ny, self.hy())
        };
        (1..=n).map(|i| i as f64 * h).collect()
    }

    pub fn describe(&self) -> String {
        if self.dim == 1 {
            format!("1d nx={}", self.nx)
        } else {
            format!("2d nx={} ny={}", self.nx, self.ny)
        }
    }
}

fn check_axis(n: usize) -> Result<()> {
    if n < MIN_INTERIOR {
        return Err(Error::domain(format!(
            "need at least {MIN_INTERIOR} interior points per axis, got {n}"
        )));
    }
    Ok(())
}
