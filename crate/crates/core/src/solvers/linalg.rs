//! Sparse storage, LU wrapper, condition estimation and restarted GMRES.

use faer::linalg::solvers::Solve;
use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{GlError, Result};

/// Compressed sparse rows, used for matrix-vector products.
#[derive(Clone, Debug)]
pub struct Csr {
    pub n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    /// Duplicate entries are summed.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_unstable_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            cols.push(c);
            vals.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|p| self.vals[p] * x[self.cols[p]])
                    .sum()
            })
            .collect()
    }

    /// Column `c` as a dense vector.
    pub fn column(&self, c: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for r in 0..self.n {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.cols[p] == c {
                    out[r] += self.vals[p];
                }
            }
        }
        out
    }

    /// `max_r sum_c |J_rc|`
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|p| self.vals[p].abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.n {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                t.push(Triplet::new(r, self.cols[p], self.vals[p]));
            }
        }
        SparseColMat::try_new_from_triplets(self.n, self.n, &t)
            .map_err(|e| GlError::Consistency(format!("sparse assembly failed: {e:?}")))
    }
}

/// Sparse LU factorization of a square matrix.
pub struct SparseLu {
    lu: Lu<usize, f64>,
    n: usize,
}

fn to_mat(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

fn from_mat(m: &Mat<f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

impl SparseLu {
    pub fn factor(a: &Csr) -> Result<Self> {
        let lu = a
            .to_faer()?
            .sp_lu()
            .map_err(|_| GlError::SingularJacobian {
                condition: f64::INFINITY,
            })?;
        Ok(Self { lu, n: a.n })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        from_mat(&self.lu.solve(to_mat(b)))
    }

    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        from_mat(&self.lu.solve_transpose(to_mat(b)))
    }

    /// Hager-Higham estimate of `||A^{-1}||_inf = ||A^{-T}||_1`.
    pub fn inverse_norm_inf(&self) -> f64 {
        let n = self.n;
        let norm1 = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>();
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0_f64;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = self.solve_transpose(&x);
            est = est.max(norm1(&y));
            let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve(&xi);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .fold((0, 0.0_f64), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= ztx || j == last_j {
                break;
            }
            last_j = j;
            x = vec![0.0; n];
            x[j] = 1.0;
        }
        // alternating test vector guards against Hager's blind spots
        let b: Vec<f64> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                s * (1.0 + i as f64 / (n.max(2) - 1) as f64)
            })
            .collect();
        let alt = 2.0 * norm1(&self.solve_transpose(&b)) / (3.0 * n as f64);
        est.max(alt)
    }
}

/// Restarted GMRES for `A x = b`, right-preconditioned by `m`.
/// Returns the solution and the final relative residual.
pub fn gmres(
    a: &Csr,
    m: &SparseLu,
    b: &[f64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let n = b.len();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let norm = |u: &[f64]| dot(u, u).sqrt();
    let bnorm = norm(b).max(f64::MIN_POSITIVE);
    let mut x = vec![0.0; n];
    let mut total = 0;
    loop {
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = norm(&r);
        if beta / bnorm <= tol || total >= max_iter {
            return (x, beta / bnorm);
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|e| e / beta).collect()];
        let mut hcols: Vec<Vec<f64>> = Vec::new();
        let (mut cs, mut sn): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
        let mut g = vec![beta];
        let mut zs: Vec<Vec<f64>> = Vec::new();
        for j in 0..restart {
            total += 1;
            let z = m.solve(&v[j]);
            let mut w = a.matvec(&z);
            zs.push(z);
            let mut h = vec![0.0; j + 2];
            for (i, vi) in v.iter().enumerate() {
                h[i] = dot(&w, vi);
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= h[i] * vk;
                }
            }
            h[j + 1] = norm(&w);
            for i in 0..j {
                let t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            let rho = h[j].hypot(h[j + 1]);
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (h[j] / rho, h[j + 1] / rho) };
            cs.push(c);
            sn.push(s);
            h[j] = rho;
            g.push(-s * g[j]);
            g[j] *= c;
            let lucky = h[j + 1] == 0.0;
            h[j + 1] = 0.0;
            hcols.push(h);
            if !lucky {
                let next = w.iter().map(|e| e / norm(&w)).collect();
                v.push(next);
            }
            if g[j + 1].abs() / bnorm <= tol || lucky || total >= max_iter {
                break;
            }
        }
        // back substitution
        let k = hcols.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for (l, yl) in y.iter().enumerate().skip(i + 1) {
                acc -= hcols[l][i] * yl;
            }
            y[i] = acc / hcols[i][i];
        }
        for (yi, z) in y.iter().zip(&zs) {
            for (xk, zk) in x.iter_mut().zip(z) {
                *xk += yi * zk;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, shift: f64) -> Csr {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        Csr::from_triplets(n, t)
    }

    #[test]
    fn lu_solves_and_transposes() {
        let mut t = vec![(0, 0, 4.0), (0, 1, 1.0), (1, 0, 2.0), (1, 1, 3.0), (0, 0, 1.0)];
        t.push((2, 2, 1.0));
        t.push((1, 2, 0.5));
        let a = Csr::from_triplets(3, t);
        let lu = SparseLu::factor(&a).unwrap();
        let x = lu.solve(&[1.0, 2.0, 3.0]);
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((ri - bi).abs() < 1e-14);
        }
        // A^T y = e_0
        let y = lu.solve_transpose(&[1.0, 0.0, 0.0]);
        let col0 = 5.0 * y[0] + 2.0 * y[1];
        assert!((col0 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_norm_estimate_is_exact_for_diagonal() {
        let a = Csr::from_triplets(4, vec![(0, 0, 2.0), (1, 1, 0.25), (2, 2, -4.0), (3, 3, 1.0)]);
        let lu = SparseLu::factor(&a).unwrap();
        assert!((lu.inverse_norm_inf() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_norm_estimate_bounds_dense_computation() {
        let n = 30;
        let a = tridiag(n, 0.1);
        let lu = SparseLu::factor(&a).unwrap();
        let mut exact = vec![0.0; n];
        for c in 0..n {
            let mut e = vec![0.0; n];
            e[c] = 1.0;
            for (r, v) in lu.solve(&e).iter().enumerate() {
                exact[r] += v.abs();
            }
        }
        let exact = exact.into_iter().fold(0.0, f64::max);
        let est = lu.inverse_norm_inf();
        assert!(est <= exact * (1.0 + 1e-12) && est >= 0.3 * exact, "{est} {exact}");
    }

    #[test]
    fn gmres_with_nearby_preconditioner() {
        let n = 200;
        let a = tridiag(n, 0.05);
        let m = SparseLu::factor(&tridiag(n, 0.1)).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
        let (x, rel) = gmres(&a, &m, &b, 1e-12, 30, 200);
        assert!(rel <= 1e-12);
        let r = a.matvec(&x);
        let err = r.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }
}
