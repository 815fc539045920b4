use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::coeffs::{validate_strong, validate_weak, StrongCoefficients, WeakCoefficients};
use super::field::Field;
use super::grid::Grid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Weak,
    Strong,
}

/// Dense symmetric matrix of the discrete coupled elliptic operator,
/// acting on component-major stacked unknowns `k * M + p`.
#[derive(Debug, Clone)]
pub struct CoupledOperator {
    matrix: Array2<f64>,
    grid: Grid,
    components: usize,
    kind: OperatorKind,
}

impl CoupledOperator {
    /// Wraps an already assembled matrix after checking shape and symmetry.
    pub fn from_matrix(
        matrix: Array2<f64>,
        grid: Grid,
        components: usize,
        kind: OperatorKind,
    ) -> Result<Self> {
        let n = components * grid.points();
        if matrix.dim() != (n, n) {
            return Err(Error::dimension(format!(
                "operator matrix {:?} does not match {components} components on {} points",
                matrix.dim(),
                grid.points()
            )));
        }
        let op = Self {
            matrix,
            grid,
            components,
            kind,
        };
        let defect = op.symmetry_defect();
        if defect > 1e-13 {
            return Err(Error::precondition(format!(
                "operator matrix not symmetric (relative defect {defect:e})"
            )));
        }
        Ok(op)
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.matrix
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max|M - Mᵀ| / max|M|`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.dim();
        let mut d = 0.0f64;
        let mut s = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let v = self.matrix[[i, j]];
                s = s.max(v.abs());
                if j > i {
                    d = d.max((v - self.matrix[[j, i]]).abs());
                }
            }
        }
        if s == 0.0 {
            0.0
        } else {
            d / s
        }
    }

    pub fn apply_flat(&self, v: ArrayView1<f64>) -> Array1<f64> {
        self.matrix.dot(&v)
    }

    pub fn apply(&self, f: &Field) -> Result<Field> {
        f.check_compatible(&self.grid, self.components)?;
        Field::from_flat(
            self.grid,
            self.components,
            self.apply_flat(f.flat().view()).view(),
        )
    }

    /// Largest `|i - j|` with a nonzero entry in the interleaved ordering
    /// `p * K + k`.
    pub fn interleaved_bandwidth(&self) -> usize {
        let (m, kc) = (self.grid.points(), self.components);
        let mut bw = 0;
        for ((r, c), &v) in self.matrix.indexed_iter() {
            if v != 0.0 {
                let ri = (r % m) * kc + r / m;
                let ci = (c % m) * kc + c / m;
                bw = bw.max(ri.abs_diff(ci));
            }
        }
        bw
    }
}

/// One edge of the lattice along `axis`, with its two endpoints when interior.
struct Edge {
    left: Option<usize>,
    right: Option<usize>,
    midpoint: Vec<f64>,
    h: f64,
}

fn edges(grid: &Grid, axis: usize) -> Vec<Edge> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut out = Vec::new();
    if axis == 0 {
        for iy in 0..ny {
            for e in 0..=nx {
                let mut mid = vec![(e as f64 + 0.5) * hx];
                if grid.dim() == 2 {
                    mid.push((iy + 1) as f64 * hy);
                }
                out.push(Edge {
                    left: (e >= 1).then(|| grid.index(e - 1, iy)),
                    right: (e < nx).then(|| grid.index(e, iy)),
                    midpoint: mid,
                    h: hx,
                });
            }
        }
    } else {
        for ix in 0..nx {
            for e in 0..=ny {
                out.push(Edge {
                    left: (e >= 1).then(|| grid.index(ix, e - 1)),
                    right: (e < ny).then(|| grid.index(ix, e)),
                    midpoint: vec![(ix + 1) as f64 * hx, (e as f64 + 0.5) * hy],
                    h: hy,
                });
            }
        }
    }
    out
}

impl Edge {
    /// Difference stencil `u_right - u_left` restricted to interior nodes.
    fn stencil(&self) -> Vec<(usize, f64)> {
        let mut s = Vec::with_capacity(2);
        if let Some(l) = self.left {
            s.push((l, -1.0));
        }
        if let Some(r) = self.right {
            s.push((r, 1.0));
        }
        s
    }
}

fn add_coupling(m: &mut Array2<f64>, c: &Array2<f64>, points: usize) {
    let k = c.nrows();
    for a in 0..k {
        for b in 0..k {
            let v = c[[a, b]];
            if v != 0.0 {
                for p in 0..points {
                    m[[a * points + p, b * points + p]] += v;
                }
            }
        }
    }
}

/// Flux-form differences for `-div(a_k ∇u_k)` per component plus `C ⊗ I`.
pub fn assemble_weak(grid: &Grid, coeffs: &WeakCoefficients) -> Result<CoupledOperator> {
    validate_weak(grid, coeffs).into_result()?;
    for (k, d) in coeffs.diffusion.iter().enumerate() {
        if d.axes.len() != 1 && d.axes.len() != grid.dim() {
            return Err(Error::dimension(format!(
                "component {k}: diagonal diffusion has {} entries on a {}D grid",
                d.axes.len(),
                grid.dim()
            )));
        }
    }
    let m = grid.points();
    let kc = coeffs.components();
    let mut mat = Array2::<f64>::zeros((kc * m, kc * m));
    for (k, d) in coeffs.diffusion.iter().enumerate() {
        let off = k * m;
        for axis in 0..grid.dim() {
            for e in edges(grid, axis) {
                let w = d.along(axis).eval(&e.midpoint) / (e.h * e.h);
                let s = e.stencil();
                for &(a, ga) in &s {
                    for &(b, gb) in &s {
                        mat[[off + a, off + b]] += w * (ga * gb);
                    }
                }
            }
        }
    }
    add_coupling(&mut mat, &coeffs.coupling, m);
    Ok(CoupledOperator {
        matrix: mat,
        grid: *grid,
        components: kc,
        kind: OperatorKind::Weak,
    })
}

/// Discretizes `-div(𝔸∇u) + Cu` for d = K = 2: same-axis derivative pairs
/// use compact differences on edges with midpoint coefficients, mixed pairs
/// use centered differences at the nodes.
pub fn assemble_strong(grid: &Grid, coeffs: &StrongCoefficients) -> Result<CoupledOperator> {
    if grid.dim() != 2 || coeffs.coupling.dim() != (2, 2) {
        return Err(Error::dimension(format!(
            "strongly coupled assembly needs d = K = 2, got a {}D grid and {:?} coupling",
            grid.dim(),
            coeffs.coupling.dim()
        )));
    }
    validate_strong(grid, coeffs).into_result()?;
    let m = grid.points();
    let mut mat = Array2::<f64>::zeros((2 * m, 2 * m));

    for axis in 0..2 {
        for e in edges(grid, axis) {
            let a = coeffs.tensor.eval(&e.midpoint);
            let s = e.stencil();
            for i in 0..2 {
                for k in 0..2 {
                    let w = 0.5 * (a[i][axis][k][axis] + a[k][axis][i][axis]) / (e.h * e.h);
                    if w == 0.0 {
                        continue;
                    }
                    for &(pa, ga) in &s {
                        for &(pb, gb) in &s {
                            mat[[i * m + pa, k * m + pb]] += w * (ga * gb);
                        }
                    }
                }
            }
        }
    }

    let h = [grid.hx(), grid.hy()];
    let centered = |p: usize, axis: usize| -> Vec<(usize, f64)> {
        let (ix, iy) = grid.ij(p);
        let (i, n) = if axis == 0 {
            (ix, grid.nx())
        } else {
            (iy, grid.ny())
        };
        let at = |j: usize| {
            if axis == 0 {
                grid.index(j, iy)
            } else {
                grid.index(ix, j)
            }
        };
        let mut s = Vec::with_capacity(2);
        if i >= 1 {
            s.push((at(i - 1), -1.0));
        }
        if i + 1 < n {
            s.push((at(i + 1), 1.0));
        }
        s
    };
    for p in 0..m {
        let x = grid.coords(p);
        let a = coeffs.tensor.eval(&x);
        for j in 0..2 {
            let l = 1 - j;
            let (sj, sl) = (centered(p, j), centered(p, l));
            for i in 0..2 {
                for k in 0..2 {
                    let w = 0.5 * (a[i][j][k][l] + a[k][l][i][j]) / (4.0 * h[j] * h[l]);
                    if w == 0.0 {
                        continue;
                    }
                    for &(pa, ga) in &sj {
                        for &(pb, gb) in &sl {
                            mat[[i * m + pa, k * m + pb]] += w * (ga * gb);
                        }
                    }
                }
            }
        }
    }
    add_coupling(&mut mat, &coeffs.coupling, m);
    Ok(CoupledOperator {
        matrix: mat,
        grid: *grid,
        components: 2,
        kind: OperatorKind::Strong,
    })
}
