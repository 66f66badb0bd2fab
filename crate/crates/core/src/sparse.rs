//! Compressed sparse row matrices and the Krylov solvers used for the
//! cell-centered pressure system.

use crate::error::{Error, Result};

/// Square CSR matrix with a fixed sparsity pattern; columns sorted per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the given (unsorted, possibly repeated) row patterns.
    pub fn from_pattern(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend(r);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::from_pattern((0..n).map(|i| vec![i]).collect());
        m.values.iter_mut().for_each(|v| *v = 1.0);
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn zero_values(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].binary_search(&j).ok().map(|k| r.start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Add `v` to entry `(i, j)`, which must be part of the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) is outside the sparsity pattern"));
        self.values[k] += v;
    }

    /// Number of structurally nonzero entries with a nonzero value in row `i`.
    pub fn row_nonzeros(&self, i: usize) -> usize {
        self.row(i).1.iter().filter(|v| **v != 0.0).count()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `max |a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Outcome of a Krylov solve.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSolve {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

fn true_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let mut r = vec![0.0; b.len()];
    a.mul_vec(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    norm(&r)
}

/// Jacobi-preconditioned conjugate gradients for SPD systems.
///
/// Stops when `‖b - A x‖ ≤ tol ‖b‖`.
pub fn pcg(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<LinearSolve> {
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    preconditioned_cg(a, b, tol, max_iter, |r, z| {
        z.iter_mut().zip(r).zip(&inv_diag).for_each(|((z, r), d)| *z = r * d)
    })
}

/// Conjugate gradients preconditioned with an incomplete Cholesky
/// factorization (ILU(0) of a symmetric matrix).
///
/// When the factorization meets a non-positive pivot, which happens on
/// strongly skewed meshes where the matrix is not an M-matrix, the diagonal
/// is shifted, `A + α diag(A)`, with `α` doubled until all pivots are positive.
pub fn pcg_ilu0(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<LinearSolve> {
    if norm(b) == 0.0 {
        return preconditioned_cg(a, b, tol, max_iter, |r, z| z.copy_from_slice(r));
    }
    let mut alpha = 0.0;
    let ilu = loop {
        let f = Ilu0::shifted(a, alpha)?;
        if f.min_pivot() > 0.0 {
            break f;
        }
        alpha = if alpha == 0.0 { 1e-3 } else { 2.0 * alpha };
        if alpha > 1.0 {
            return pcg(a, b, tol, max_iter);
        }
    };
    preconditioned_cg(a, b, tol, max_iter, |r, z| ilu.apply(r, z))
}

fn preconditioned_cg<P>(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize, precond: P) -> Result<LinearSolve>
where
    P: Fn(&[f64], &mut [f64]),
{
    let n = a.n();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(LinearSolve {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::LinearSolver {
                iterations: it,
                residual: norm(&r) / bnorm,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= tol * bnorm {
            // guard against drift of the recursive residual
            let rel = true_residual(a, &x, b) / bnorm;
            if rel <= tol {
                return Ok(LinearSolve {
                    x,
                    iterations: it,
                    relative_residual: rel,
                });
            }
            a.mul_vec(&x, &mut ap);
            r.iter_mut().zip(b).zip(&ap).for_each(|((r, b), ax)| *r = b - ax);
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolver {
        iterations: max_iter,
        residual: true_residual(a, &x, b) / bnorm,
    })
}

/// Incomplete LU factorization with the sparsity pattern of `A`.
#[derive(Clone, Debug)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        Self::shifted(a, 0.0)
    }

    /// Factorization of `A + α diag(A)`.
    pub fn shifted(a: &CsrMatrix, alpha: f64) -> Result<Self> {
        let mut lu = a.clone();
        let n = lu.n;
        let mut diag_pos = Vec::with_capacity(n);
        for i in 0..n {
            let k = lu
                .position(i, i)
                .ok_or_else(|| Error::Structure(format!("row {i} has no diagonal entry")))?;
            lu.values[k] *= 1.0 + alpha;
            diag_pos.push(k);
        }
        for i in 1..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for kk in start..end {
                let k = lu.col_idx[kk];
                if k >= i {
                    break;
                }
                let pivot = lu.values[diag_pos[k]];
                if pivot == 0.0 {
                    return Err(Error::LinearSolver {
                        iterations: 0,
                        residual: f64::NAN,
                    });
                }
                let factor = lu.values[kk] / pivot;
                lu.values[kk] = factor;
                for jj in kk + 1..end {
                    let j = lu.col_idx[jj];
                    if let Some(pos) = lu.position(k, j) {
                        lu.values[jj] -= factor * lu.values[pos];
                    }
                }
            }
        }
        Ok(Ilu0 { lu, diag_pos })
    }

    /// Smallest diagonal entry of `U`.
    pub fn min_pivot(&self) -> f64 {
        self.diag_pos
            .iter()
            .map(|&k| self.lu.values[k])
            .fold(f64::INFINITY, f64::min)
    }

    /// Solve `L U z = r`.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let lu = &self.lu;
        for i in 0..lu.n {
            let mut s = r[i];
            for k in lu.row_ptr[i]..self.diag_pos[i] {
                s -= lu.values[k] * z[lu.col_idx[k]];
            }
            z[i] = s;
        }
        for i in (0..lu.n).rev() {
            let mut s = z[i];
            for k in self.diag_pos[i] + 1..lu.row_ptr[i + 1] {
                s -= lu.values[k] * z[lu.col_idx[k]];
            }
            z[i] = s / lu.values[self.diag_pos[i]];
        }
    }
}

/// Restarted GMRES with right ILU(0) preconditioning.
///
/// Stops when `‖b - A x‖ ≤ tol ‖b‖`.
pub fn gmres(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize, restart: usize) -> Result<LinearSolve> {
    let n = a.n();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(LinearSolve {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let ilu = Ilu0::new(a)?;
    let m = restart.max(1);
    let mut x = vec![0.0; n];
    let mut total = 0;
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    while total < max_iter {
        let mut r = vec![0.0; n];
        a.mul_vec(&x, &mut r);
        r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
        let beta = norm(&r);
        if beta <= tol * bnorm {
            return Ok(LinearSolve {
                x,
                iterations: total,
                relative_residual: beta / bnorm,
            });
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            total += 1;
            ilu.apply(&v[k], &mut z);
            a.mul_vec(&z, &mut w);
            for (i, vi) in v.iter().enumerate() {
                h[i][k] = dot(&w, vi);
                w.iter_mut().zip(vi).for_each(|(wj, vj)| *wj -= h[i][k] * vj);
            }
            let wn = norm(&w);
            h[k + 1][k] = wn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let den = h[k][k].hypot(h[k + 1][k]);
            if den == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / den;
            sn[k] = h[k + 1][k] / den;
            h[k][k] = den;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= tol * bnorm || total >= max_iter || wn == 0.0 {
                break;
            }
            v.push(w.iter().map(|x| x / wn).collect());
        }
        // back substitution for the Krylov coefficients
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut dx = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            dx.iter_mut().zip(&v[j]).for_each(|(d, vj)| *d += yj * vj);
        }
        ilu.apply(&dx, &mut z);
        x.iter_mut().zip(&z).for_each(|(xi, zi)| *xi += zi);
    }
    let rel = true_residual(a, &x, b) / bnorm;
    if rel <= tol {
        return Ok(LinearSolve {
            x,
            iterations: total,
            relative_residual: rel,
        });
    }
    Err(Error::LinearSolver {
        iterations: total,
        residual: rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_9pt(n: usize) -> CsrMatrix {
        let idx = |i: usize, j: usize| j * n + i;
        let mut rows = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let mut r = Vec::new();
                for dj in -1i64..=1 {
                    for di in -1i64..=1 {
                        let (ii, jj) = (i as i64 + di, j as i64 + dj);
                        if ii >= 0 && jj >= 0 && ii < n as i64 && jj < n as i64 {
                            r.push(idx(ii as usize, jj as usize));
                        }
                    }
                }
                rows.push(r);
            }
        }
        let mut m = CsrMatrix::from_pattern(rows);
        for j in 0..n {
            for i in 0..n {
                let (cols, _) = m.row(idx(i, j));
                let cols = cols.to_vec();
                for c in cols {
                    let v = if c == idx(i, j) { 8.0 + 0.01 } else { -1.0 };
                    m.add(idx(i, j), c, v);
                }
            }
        }
        m
    }

    #[test]
    fn identity_solve() {
        let a = CsrMatrix::identity(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 0.0];
        let s = pcg(&a, &b, 1e-12, 10).unwrap();
        assert_eq!(s.x, b);
        let g = gmres(&a, &b, 1e-12, 10, 5).unwrap();
        for (x, y) in g.x.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn cg_on_nine_point_operator() {
        let a = laplacian_9pt(12);
        let mut b = vec![0.0; a.n()];
        b[0] = 1.0;
        let s = pcg(&a, &b, 1e-10, 1000).unwrap();
        assert!(true_residual(&a, &s.x, &b) <= 1e-10);
        let t = pcg_ilu0(&a, &b, 1e-10, 1000).unwrap();
        assert!(true_residual(&a, &t.x, &b) <= 1e-10);
        assert!(t.iterations <= s.iterations);
        assert_eq!(a.asymmetry(), 0.0);
    }

    #[test]
    fn gmres_on_nonsymmetric_operator() {
        let mut a = laplacian_9pt(10);
        for i in (0..a.n() - 1).filter(|i| i % 10 != 9) {
            a.add(i, i + 1, -0.3);
        }
        let b: Vec<f64> = (0..a.n()).map(|i| (i as f64 * 0.37).sin()).collect();
        let s = gmres(&a, &b, 1e-11, 500, 40).unwrap();
        assert!(true_residual(&a, &s.x, &b) <= 1e-11 * norm(&b));
        let dense = a.to_dense().lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
        for (x, y) in s.x.iter().zip(dense.iter()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn ilu_is_exact_for_tridiagonal() {
        let n = 6;
        let mut a = CsrMatrix::from_pattern(
            (0..n)
                .map(|i: usize| (i.saturating_sub(1)..(i + 2).min(n)).collect())
                .collect(),
        );
        for i in 0..n {
            a.add(i, i, 4.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.add(i, i + 1, -2.0);
            }
        }
        let ilu = Ilu0::new(&a).unwrap();
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut z = vec![0.0; n];
        ilu.apply(&b, &mut z);
        let mut az = vec![0.0; n];
        a.mul_vec(&z, &mut az);
        for (x, y) in az.iter().zip(&b) {
            assert!((x - y).abs() < 1e-13);
        }
    }
}
