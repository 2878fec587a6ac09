//! Thin singular value decomposition.
//!
//! A tall `m x n` input is first reduced with a Householder QR, then the
//! `n x n` triangular factor is diagonalized by one-sided (Hestenes) Jacobi
//! rotations. Wide inputs are handled through their transpose. One-sided Jacobi
//! keeps the columns orthogonal to working precision regardless of their norm,
//! which is what the SVT backward pass relies on.

use crate::error::{Error, Result};

use super::RealMatrix;

/// Sweep cap for the Jacobi iteration.
pub const MAX_SWEEPS: usize = 10_000;

/// `X = U · diag(sigma) · Vᵀ` with `k = min(m, n)` columns in `U` and `V`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: RealMatrix,
    pub sigma: Vec<f64>,
    pub v: RealMatrix,
}

impl Svd {
    /// `U · diag(values) · Vᵀ`, i.e. the factors recombined with replacement
    /// singular values.
    pub fn recompose_with(&self, values: &[f64]) -> RealMatrix {
        let (m, k) = self.u.shape();
        let n = self.v.rows();
        let mut out = RealMatrix::zeros(m, n);
        let data = out.as_mut_slice();
        for r in 0..m {
            let u_row = self.u.row(r);
            let out_row = &mut data[r * n..(r + 1) * n];
            for i in 0..k {
                let coef = u_row[i] * values[i];
                if coef == 0.0 {
                    continue;
                }
                for (c, o) in out_row.iter_mut().enumerate() {
                    *o += coef * self.v[(c, i)];
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> RealMatrix {
        self.recompose_with(&self.sigma)
    }
}

pub fn svd(x: &RealMatrix) -> Result<Svd> {
    if !x.is_finite() {
        return Err(Error::InvalidArgument("svd input contains non-finite entries".into()));
    }
    if x.rows() >= x.cols() {
        tall_svd(x)
    } else {
        let t = tall_svd(&x.transpose())?;
        Ok(Svd { u: t.v, sigma: t.sigma, v: t.u })
    }
}

/// Column-major scratch matrix.
struct Columns {
    rows: usize,
    data: Vec<f64>,
}

impl Columns {
    fn from_matrix(x: &RealMatrix) -> Self {
        let (m, n) = x.shape();
        let mut data = vec![0.0; m * n];
        for r in 0..m {
            for (c, &v) in x.row(r).iter().enumerate() {
                data[c * m + r] = v;
            }
        }
        Self { rows: m, data }
    }

    fn identity(rows: usize, cols: usize) -> Self {
        let mut data = vec![0.0; rows * cols];
        for i in 0..cols.min(rows) {
            data[i * rows + i] = 1.0;
        }
        Self { rows, data }
    }

    #[inline]
    fn col(&self, c: usize) -> &[f64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    #[inline]
    fn col_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    fn pair_mut(&mut self, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
        debug_assert!(p < q);
        let (lo, hi) = self.data.split_at_mut(q * self.rows);
        (&mut lo[p * self.rows..(p + 1) * self.rows], &mut hi[..self.rows])
    }

    fn to_matrix(&self, cols: usize, order: &[usize]) -> RealMatrix {
        let m = self.rows;
        RealMatrix::from_fn(m, cols, |r, c| self.data[order[c] * m + r])
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn tall_svd(x: &RealMatrix) -> Result<Svd> {
    let (m, n) = x.shape();
    let (q, r) = householder_qr(x);

    // One-sided Jacobi on the n x n triangular factor.
    let mut w = Columns { rows: n, data: r };
    let mut v = Columns::identity(n, n);
    let tol = (n as f64) * f64::EPSILON;
    // Columns below this energy are round-off of a rank-deficient input.
    let frob_sq: f64 = w.data.iter().map(|v| v * v).sum();
    let floor = (f64::EPSILON * f64::EPSILON) * frob_sq;

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for qi in p + 1..n {
                let alpha = dot(w.col(p), w.col(p));
                let beta = dot(w.col(qi), w.col(qi));
                let gamma = dot(w.col(p), w.col(qi));
                if alpha <= floor || beta <= floor || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate(w.pair_mut(p, qi), cs, sn);
                rotate(v.pair_mut(p, qi), cs, sn);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "one-sided Jacobi SVD did not converge within {MAX_SWEEPS} sweeps on a {m}x{n} matrix"
        )));
    }

    let mut sigma: Vec<f64> = (0..n).map(|i| dot(w.col(i), w.col(i)).sqrt()).collect();
    let null_floor = (floor.sqrt() * n as f64).max(f64::MIN_POSITIVE.sqrt());
    let mut missing = Vec::new();
    for (i, &s) in sigma.iter().enumerate() {
        if s > null_floor {
            let inv = 1.0 / s;
            w.col_mut(i).iter_mut().for_each(|x| *x *= inv);
        } else {
            missing.push(i);
        }
    }
    for &i in &missing {
        sigma[i] = 0.0;
    }
    complete_basis(&mut w, n, &missing);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));
    let sigma_sorted: Vec<f64> = order.iter().map(|&i| sigma[i]).collect();

    let u_small = w.to_matrix(n, &order);
    let u = q.matmul(&u_small)?;
    let v = v.to_matrix(n, &order);

    Ok(Svd { u, sigma: sigma_sorted, v })
}

fn rotate((a, b): (&mut [f64], &mut [f64]), cs: f64, sn: f64) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let xa = *x;
        let yb = *y;
        *x = cs * xa - sn * yb;
        *y = sn * xa + cs * yb;
    }
}

/// Fill the listed (zero) columns with unit vectors orthogonal to the rest.
fn complete_basis(w: &mut Columns, n: usize, missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let mut filled: Vec<usize> = (0..n).filter(|i| !missing.contains(i)).collect();
    for &target in missing {
        for e in 0..w.rows {
            let mut cand = vec![0.0; w.rows];
            cand[e] = 1.0;
            for _ in 0..2 {
                for &j in &filled {
                    let proj = dot(&cand, w.col(j));
                    for (c, &b) in cand.iter_mut().zip(w.col(j)) {
                        *c -= proj * b;
                    }
                }
            }
            let norm = dot(&cand, &cand).sqrt();
            if norm > 0.5 {
                for (dst, c) in w.col_mut(target).iter_mut().zip(&cand) {
                    *dst = c / norm;
                }
                filled.push(target);
                break;
            }
        }
    }
}

/// Thin Householder QR. Returns `Q` (`m x n`, orthonormal columns) and `R`
/// as an `n x n` column-major buffer.
fn householder_qr(x: &RealMatrix) -> (RealMatrix, Vec<f64>) {
    let (m, n) = x.shape();
    let mut a = Columns::from_matrix(x);
    let mut reflectors: Vec<Option<Vec<f64>>> = Vec::with_capacity(n);

    for j in 0..n {
        let col = &a.col(j)[j..];
        let norm = dot(col, col).sqrt();
        if norm == 0.0 {
            reflectors.push(None);
            continue;
        }
        let alpha = if col[0] >= 0.0 { -norm } else { norm };
        let mut v = col.to_vec();
        v[0] -= alpha;
        let vnorm = dot(&v, &v).sqrt();
        if vnorm == 0.0 {
            reflectors.push(None);
            continue;
        }
        v.iter_mut().for_each(|x| *x /= vnorm);
        for c in j..n {
            let tail = &mut a.col_mut(c)[j..];
            let proj = 2.0 * dot(&v, tail);
            for (t, &vi) in tail.iter_mut().zip(&v) {
                *t -= proj * vi;
            }
        }
        reflectors.push(Some(v));
    }

    let mut r = vec![0.0; n * n];
    for c in 0..n {
        for row in 0..=c {
            r[c * n + row] = a.col(c)[row];
        }
    }

    let mut q = Columns::identity(m, n);
    for (j, refl) in reflectors.iter().enumerate().rev() {
        let Some(v) = refl else { continue };
        for c in 0..n {
            let tail = &mut q.col_mut(c)[j..];
            let proj = 2.0 * dot(v, tail);
            if proj == 0.0 {
                continue;
            }
            for (t, &vi) in tail.iter_mut().zip(v) {
                *t -= proj * vi;
            }
        }
    }
    let order: Vec<usize> = (0..n).collect();
    (q.to_matrix(n, &order), r)
}
