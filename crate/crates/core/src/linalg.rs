//! Dense symmetric linear algebra: eigendecomposition and Cholesky
//! factorizations (dense and banded).

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

/// Eigensolver selection for symmetric matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    /// Cyclic Jacobi up to [`JACOBI_MAX_DIM`], blocked tridiagonal above.
    #[default]
    Auto,
    Jacobi,
    /// Householder tridiagonalization with divide and conquer (faer).
    Tridiagonal,
}

/// Largest dimension `EigenMethod::Auto` hands to the Jacobi solver.
pub const JACOBI_MAX_DIM: usize = 640;

#[derive(Debug, Clone, Copy)]
pub struct JacobiOptions {
    /// Required `‖offdiag(A)‖_F / ‖A‖_F` at convergence.
    pub off_tol: f64,
    /// Pairs with `|a_pq| <= elem_tol * sqrt(|a_pp a_qq|)` are left alone.
    pub elem_tol: f64,
    pub max_sweeps: usize,
}

impl Default for JacobiOptions {
    fn default() -> Self {
        Self {
            off_tol: 1e-12,
            elem_tol: 1e-15,
            max_sweeps: 60,
        }
    }
}

/// Ascending eigenvalues together with Euclidean-orthonormal eigenvectors
/// stored as columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
    pub sweeps: usize,
}

pub fn symmetric_eigen(a: ArrayView2<f64>, method: EigenMethod) -> Result<SymmetricEigen> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::dimension(format!(
            "eigensolver needs a square matrix, got {:?}",
            a.dim()
        )));
    }
    match method {
        EigenMethod::Jacobi => jacobi_eigen(a, JacobiOptions::default()),
        EigenMethod::Tridiagonal => tridiagonal_eigen(a),
        EigenMethod::Auto if n <= JACOBI_MAX_DIM => jacobi_eigen(a, JacobiOptions::default()),
        EigenMethod::Auto => tridiagonal_eigen(a),
    }
}

/// Cyclic-by-row Jacobi rotations on a dense symmetric matrix.
pub fn jacobi_eigen(a: ArrayView2<f64>, opts: JacobiOptions) -> Result<SymmetricEigen> {
    let n = a.nrows();
    let mut m: Vec<f64> = a.iter().copied().collect();
    // rows of `vt` are the eigenvectors being accumulated
    let mut vt = vec![0.0; n * n];
    for i in 0..n {
        vt[i * n + i] = 1.0;
    }
    let frob = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let off_norm = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[i * n + j] * m[i * n + j];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    loop {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                if apq.abs() <= opts.elem_tol * (app.abs() * aqq.abs()).sqrt() {
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = m[p * n + r];
                    let arq = m[q * n + r];
                    let np = c * arp - s * arq;
                    let nq = s * arp + c * arq;
                    m[p * n + r] = np;
                    m[q * n + r] = nq;
                    m[r * n + p] = np;
                    m[r * n + q] = nq;
                }
                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                let (head, tail) = vt.split_at_mut(q * n);
                let vp = &mut head[p * n..p * n + n];
                let vq = &mut tail[..n];
                for r in 0..n {
                    let a = vp[r];
                    let b = vq[r];
                    vp[r] = c * a - s * b;
                    vq[r] = s * a + c * b;
                }
            }
        }
        sweeps += 1;
        let off = off_norm(&m);
        if !rotated && off <= opts.off_tol * frob {
            break;
        }
        if off == 0.0 {
            break;
        }
        if sweeps >= opts.max_sweeps {
            return Err(Error::Convergence {
                method: "cyclic Jacobi eigensolver",
                detail: format!(
                    "{sweeps} sweeps, off-diagonal Frobenius norm {off:e} (matrix norm {frob:e})"
                ),
            });
        }
    }

    let values: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    let vectors = Array2::from_shape_vec((n, n), vt)
        .expect("square buffer")
        .reversed_axes();
    Ok(sorted_normalized(values, vectors, sweeps))
}

/// Blocked Householder tridiagonalization and divide and conquer, for
/// matrices too large for Jacobi.
pub fn tridiagonal_eigen(a: ArrayView2<f64>) -> Result<SymmetricEigen> {
    let n = a.nrows();
    let mat = faer::Mat::<f64>::from_fn(n, n, |i, j| a[[i, j]]);
    let evd = mat
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Convergence {
            method: "tridiagonal eigensolver",
            detail: format!("{e:?}"),
        })?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let values: Vec<f64> = (0..n).map(|i| s[i]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(i, j)| u[(i, j)]);
    drop(mat);
    Ok(sorted_normalized(values, vectors, 0))
}

/// Ascending order with ties kept in solver order; each eigenvector is
/// signed so that its largest-magnitude entry is positive.
fn sorted_normalized(values: Vec<f64>, vectors: Array2<f64>, sweeps: usize) -> SymmetricEigen {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let already_sorted = order.iter().enumerate().all(|(k, &i)| k == i);
    let mut vecs = if already_sorted {
        vectors
    } else {
        let mut out = Array2::zeros((n, n));
        for (k, &i) in order.iter().enumerate() {
            out.column_mut(k).assign(&vectors.column(i));
        }
        out
    };
    for mut col in vecs.columns_mut() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &v in col.iter() {
            if v.abs() > best * (1.0 + 1e-12) {
                best = v.abs();
                sign = v.signum();
            }
        }
        if sign < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
    SymmetricEigen {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: vecs,
        sweeps,
    }
}

/// Dense Cholesky factor `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn new(a: ArrayView2<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::dimension("Cholesky needs a square matrix"));
        }
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[[i, j]];
                let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
                sum -= ri.iter().zip(rj).map(|(x, y)| x * y).sum::<f64>();
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::Solve(format!(
                            "matrix not positive definite (pivot {sum:e} at row {i})"
                        )));
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn solve(&self, b: &Array1<f64>) -> Array1<f64> {
        let mut x = b.clone();
        self.solve_in_place(x.as_slice_mut().expect("contiguous"));
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - s) / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
    }
}

/// Half-bandwidth of a square matrix: largest `|i - j|` with `a_ij != 0`.
pub fn bandwidth(a: ArrayView2<f64>) -> usize {
    let mut bw = 0;
    for ((i, j), &v) in a.indexed_iter() {
        if v != 0.0 {
            bw = bw.max(i.abs_diff(j));
        }
    }
    bw
}

/// Cholesky factorization of a symmetric positive definite band matrix.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    // row i holds L[i][i-bw..=i]
    band: Vec<f64>,
}

impl BandedCholesky {
    /// Factors the matrix whose lower-band entries are given by `entry(i, j)`
    /// for `i - bw <= j <= i`.
    pub fn from_fn(n: usize, bw: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut sum = entry(i, j);
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    sum -= band[i * w + (k + bw - i)] * band[j * w + (k + bw - j)];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::Solve(format!(
                            "band matrix not positive definite (pivot {sum:e} at row {i})"
                        )));
                    }
                    band[i * w + bw] = sum.sqrt();
                } else {
                    band[i * w + (j + bw - i)] = sum / band[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, band })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let mut s = x[i];
            for k in j0..i {
                s -= self.band[i * w + (k + bw - i)] * x[k];
            }
            x[i] = s / self.band[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.band[k * w + (i + bw - k)] * x[k];
            }
            x[i] = s / self.band[i * w + bw];
        }
    }

    /// Solves for `nrhs` right-hand sides stored row-major as an
    /// `n x nrhs` block.
    pub fn solve_many_in_place(&self, x: &mut [f64], nrhs: usize) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        assert_eq!(
            x.len(),
            n * nrhs,
            "right-hand side block has the wrong size"
        );
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let (done, rest) = x.split_at_mut(i * nrhs);
            let xi = &mut rest[..nrhs];
            for k in j0..i {
                let l = self.band[i * w + (k + bw - i)];
                if l != 0.0 {
                    for (a, b) in xi.iter_mut().zip(&done[k * nrhs..(k + 1) * nrhs]) {
                        *a -= l * b;
                    }
                }
            }
            let d = 1.0 / self.band[i * w + bw];
            xi.iter_mut().for_each(|v| *v *= d);
        }
        for i in (0..n).rev() {
            let (head, later) = x.split_at_mut((i + 1) * nrhs);
            let xi = &mut head[i * nrhs..];
            for k in i + 1..(i + bw + 1).min(n) {
                let l = self.band[k * w + (i + bw - k)];
                if l != 0.0 {
                    let xk = &later[(k - i - 1) * nrhs..(k - i) * nrhs];
                    for (a, b) in xi.iter_mut().zip(xk) {
                        *a -= l * b;
                    }
                }
            }
            let d = 1.0 / self.band[i * w + bw];
            xi.iter_mut().for_each(|v| *v *= d);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn spd(n: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, n), |(i, j)| {
            let d = i.abs_diff(j) as f64;
            if i == j {
                4.0 + i as f64 * 0.1
            } else {
                1.0 / (1.0 + d * d)
            }
        })
    }

    #[test]
    fn jacobi_two_by_two() {
        let a = array![[1.0, -1.0], [-1.0, 1.0]];
        let e = jacobi_eigen(a.view(), JacobiOptions::default()).unwrap();
        assert!(e.values[0].abs() < 1e-15);
        assert!((e.values[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn jacobi_residual_and_orthonormality() {
        let a = spd(40);
        let e = jacobi_eigen(a.view(), JacobiOptions::default()).unwrap();
        let av = a.dot(&e.vectors);
        for k in 0..40 {
            let r = &av.column(k) - &(&e.vectors.column(k) * e.values[k]);
            assert!(
                r.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-13 * e.values[k].abs().max(1.0)
            );
        }
        let g = e.vectors.t().dot(&e.vectors);
        let defect = (&g - &Array2::<f64>::eye(40))
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(defect < 1e-13, "{defect}");
        assert!(e.values.windows(2).into_iter().all(|w| w[0] <= w[1]));
    }

    #[test]
    fn jacobi_and_tridiagonal_agree() {
        let a = spd(30);
        let j = jacobi_eigen(a.view(), JacobiOptions::default()).unwrap();
        let t = tridiagonal_eigen(a.view()).unwrap();
        for k in 0..30 {
            assert!((j.values[k] - t.values[k]).abs() < 1e-12);
            let dot = j.vectors.column(k).dot(&t.vectors.column(k));
            assert!((dot - 1.0).abs() < 1e-10, "sign convention should match");
        }
    }

    #[test]
    fn jacobi_reports_non_convergence() {
        let a = spd(20);
        let opts = JacobiOptions {
            max_sweeps: 1,
            ..Default::default()
        };
        assert!(matches!(
            jacobi_eigen(a.view(), opts),
            Err(Error::Convergence { .. })
        ));
    }

    #[test]
    fn cholesky_solves() {
        let a = spd(25);
        let b = Array1::from_shape_fn(25, |i| (i as f64).sin());
        let x = Cholesky::new(a.view()).unwrap().solve(&b);
        let r = a.dot(&x) - &b;
        assert!(r.iter().all(|v| v.abs() < 1e-13));
        let bad = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(Cholesky::new(bad.view()).is_err());
    }

    #[test]
    fn banded_matches_dense() {
        let n = 30;
        let a = Array2::from_shape_fn((n, n), |(i, j)| match i.abs_diff(j) {
            0 => 5.0,
            1 => -1.0,
            3 => -0.5,
            _ => 0.0,
        });
        assert_eq!(bandwidth(a.view()), 3);
        let f = BandedCholesky::from_fn(n, 3, |i, j| a[[i, j]]).unwrap();
        let b = Array1::from_shape_fn(n, |i| 1.0 + i as f64);
        let mut x = b.to_vec();
        f.solve_in_place(&mut x);
        let y = Cholesky::new(a.view()).unwrap().solve(&b);
        for i in 0..n {
            assert!((x[i] - y[i]).abs() < 1e-13);
        }
        let mut many: Vec<f64> = (0..n).flat_map(|i| [b[i], -2.0 * b[i], 0.0]).collect();
        f.solve_many_in_place(&mut many, 3);
        for i in 0..n {
            assert!((many[3 * i] - x[i]).abs() < 1e-14);
            assert!((many[3 * i + 1] + 2.0 * x[i]).abs() < 1e-13);
            assert_eq!(many[3 * i + 2], 0.0);
        }
    }
}
