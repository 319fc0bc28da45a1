use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{domain, Error, Result};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn<F: FnMut(usize, usize) -> C64>(rows: usize, cols: usize, mut f: F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real(rows: usize, cols: usize, v: &[f64]) -> Self {
        assert_eq!(v.len(), rows * cols);
        Self { rows, cols, data: v.iter().map(|&x| C64::new(x, 0.0)).collect() }
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [C64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| self.row(i).iter().zip(x).fold(ZERO, |acc, (a, b)| acc + a * b)).collect()
    }

    /// `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        let n = other.cols;
        for i in 0..self.rows {
            let orow = &mut out.data[i * n..(i + 1) * n];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn max_abs_asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..i {
                m = m.max((self[(i, j)] - self[(j, i)]).norm());
            }
        }
        m
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization with partial pivoting, `P A = L U`, stored in place.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: DenseMatrix,
    perm: Vec<usize>,
    swaps: usize,
}

impl Lu {
    pub fn factor(mut a: DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(domain("LU needs a square matrix"));
        }
        let n = a.rows;
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        let scale = a.data.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let tiny = scale * f64::EPSILON * n.max(1) as f64 * 1e-3;
        for k in 0..n {
            let mut p = k;
            let mut best = a[(k, k)].norm();
            for i in k + 1..n {
                let v = a[(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > tiny) || !best.is_finite() {
                return Err(Error::Singular { pivot: k });
            }
            if p != k {
                let (lo, hi) = a.data.split_at_mut(p * n);
                lo[k * n..(k + 1) * n].swap_with_slice(&mut hi[..n]);
                perm.swap(k, p);
                swaps += 1;
            }
            let inv = a[(k, k)].inv();
            let (top, bottom) = a.data.split_at_mut((k + 1) * n);
            let pivot_row = &top[k * n + k + 1..(k + 1) * n];
            for row in bottom.chunks_exact_mut(n) {
                let f = row[k] * inv;
                row[k] = f;
                if f == ZERO {
                    continue;
                }
                for (x, y) in row[k + 1..].iter_mut().zip(pivot_row) {
                    *x -= f * y;
                }
            }
        }
        Ok(Self { lu: a, perm, swaps })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    pub fn det(&self) -> C64 {
        let n = self.dim();
        let mut d = C64::new(if self.swaps.is_multiple_of(2) { 1.0 } else { -1.0 }, 0.0);
        for i in 0..n {
            d *= self.lu[(i, i)];
        }
        d
    }

    /// `(log |det|, arg det)` without over- or underflow.
    pub fn log_det_polar(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lg = 0.0;
        let mut ph = if self.swaps.is_multiple_of(2) { 0.0 } else { core::f64::consts::PI };
        for i in 0..n {
            let u = self.lu[(i, i)];
            lg += libm::log(u.norm());
            ph += libm::atan2(u.im, u.re);
        }
        let tau = 2.0 * core::f64::consts::PI;
        ph = ph - tau * libm::floor((ph + core::f64::consts::PI) / tau);
        (lg, ph)
    }

    pub fn solve(&self, b: &[C64]) -> Result<Vec<C64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(domain("right-hand side length does not match matrix"));
        }
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let mut s = x[i];
            for k in 0..i {
                s -= row[k] * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut s = x[i];
            for k in i + 1..n {
                s -= row[k] * x[k];
            }
            x[i] = s / row[i];
        }
        Ok(x)
    }

    /// Overwrites `b` (n x m) with `A^{-1} b`.
    pub fn solve_many(&self, b: &mut DenseMatrix) -> Result<()> {
        let n = self.dim();
        if b.rows != n {
            return Err(domain("right-hand side rows do not match matrix"));
        }
        let m = b.cols;
        let mut pb = DenseMatrix::zeros(n, m);
        for (i, &p) in self.perm.iter().enumerate() {
            pb.row_mut(i).copy_from_slice(b.row(p));
        }
        for i in 0..n {
            let (done, rest) = pb.data.split_at_mut(i * m);
            let target = &mut rest[..m];
            let lrow = self.lu.row(i);
            for k in 0..i {
                let f = lrow[k];
                if f == ZERO {
                    continue;
                }
                for (t, s) in target.iter_mut().zip(&done[k * m..(k + 1) * m]) {
                    *t -= f * s;
                }
            }
        }
        for i in (0..n).rev() {
            let (head, tail) = pb.data.split_at_mut((i + 1) * m);
            let target = &mut head[i * m..];
            let urow = self.lu.row(i);
            for k in i + 1..n {
                let f = urow[k];
                if f == ZERO {
                    continue;
                }
                let src = &tail[(k - i - 1) * m..(k - i) * m];
                for (t, s) in target.iter_mut().zip(src) {
                    *t -= f * s;
                }
            }
            let inv = urow[i].inv();
            for t in target.iter_mut() {
                *t *= inv;
            }
        }
        *b = pb;
        Ok(())
    }
}

/// Relative imaginary part allowed for a determinant declared real.
pub const REAL_DET_TOL: f64 = 1e-8;

/// Log of the determinant of `a`, which must be a positive real to within
/// [`REAL_DET_TOL`].
pub fn log_det(a: &DenseMatrix) -> Result<f64> {
    if !a.is_square() {
        return Err(domain("log_det needs a square matrix"));
    }
    let lu = Lu::factor(a.clone())?;
    let (lg, ph) = lu.log_det_polar();
    let (s, c) = (libm::sin(ph), libm::cos(ph));
    if c <= 0.0 || (s / c).abs() > REAL_DET_TOL {
        let r = libm::exp(lg.min(700.0));
        return Err(Error::Conditioning { re: r * c, im: r * s });
    }
    Ok(lg + libm::log(c))
}

/// Solves `a x = b` by pivoted LU.
pub fn solve_dense(a: &DenseMatrix, b: &[C64]) -> Result<Vec<C64>> {
    if !a.is_square() {
        return Err(domain("solve_dense needs a square matrix"));
    }
    if b.len() != a.rows {
        return Err(domain("right-hand side length does not match matrix"));
    }
    Lu::factor(a.clone())?.solve(b)
}

pub fn norm2(v: &[C64]) -> f64 {
    libm::sqrt(v.iter().map(|z| z.norm_sqr()).sum::<f64>())
}

fn dot_conj(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

/// Outcome of [`gmres`].
#[derive(Debug, Clone)]
pub struct GmresReport {
    pub iterations: usize,
    pub residual: f64,
}

/// Restarted GMRES for `A x = b` with `A` given as `apply(x, out)`.
/// Stops when `||b - A x|| <= tol ||b||`.
pub fn gmres<F>(mut apply: F, b: &[C64], tol: f64, restart: usize, max_iter: usize) -> Result<(Vec<C64>, GmresReport)>
where
    F: FnMut(&[C64], &mut [C64]),
{
    let n = b.len();
    let mut x = vec![ZERO; n];
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((x, GmresReport { iterations: 0, residual: 0.0 }));
    }
    let restart = restart.max(1).min(n.max(1));
    let mut total = 0;
    let mut ax = vec![ZERO; n];
    loop {
        apply(&x, &mut ax);
        let r: Vec<C64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = norm2(&r);
        if beta <= tol * bnorm {
            return Ok((x, GmresReport { iterations: total, residual: beta / bnorm }));
        }
        if total >= max_iter {
            return Err(Error::NoConvergence { iterations: total, residual: beta / bnorm });
        }
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(restart + 1);
        basis.push(r.iter().map(|z| z / beta).collect());
        // Hessenberg columns after Givens rotation, i.e. the R factor
        let mut hcols: Vec<Vec<C64>> = Vec::with_capacity(restart);
        let mut cs: Vec<f64> = Vec::with_capacity(restart);
        let mut sn: Vec<C64> = Vec::with_capacity(restart);
        let mut g = vec![ZERO; restart + 1];
        g[0] = C64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..restart {
            let mut w = vec![ZERO; n];
            apply(&basis[k], &mut w);
            total += 1;
            let mut h = vec![ZERO; k + 2];
            // modified Gram-Schmidt, twice for stability
            for _ in 0..2 {
                for (j, v) in basis.iter().enumerate() {
                    let c = dot_conj(v, &w);
                    h[j] += c;
                    for (wi, vi) in w.iter_mut().zip(v) {
                        *wi -= c * vi;
                    }
                }
            }
            let hn = norm2(&w);
            if !hn.is_finite() {
                return Err(Error::NonFinite { node: k, x: hn });
            }
            h[k + 1] = C64::new(hn, 0.0);
            for j in 0..k {
                let t = h[j] * cs[j] + sn[j] * h[j + 1];
                h[j + 1] = -sn[j].conj() * h[j] + h[j + 1] * cs[j];
                h[j] = t;
            }
            let (c, s, rr) = givens(h[k], h[k + 1]);
            cs.push(c);
            sn.push(s);
            h[k] = rr;
            h[k + 1] = ZERO;
            g[k + 1] = -s.conj() * g[k];
            g[k] *= c;
            hcols.push(h);
            k_used = k + 1;
            if hn > 0.0 {
                basis.push(w.iter().map(|z| z / hn).collect());
            }
            if g[k + 1].norm() <= tol * bnorm || hn == 0.0 || total >= max_iter {
                break;
            }
        }
        let mut y = vec![ZERO; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= hcols[j][i] * y[j];
            }
            y[i] = s / hcols[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[j]) {
                *xi += yj * vi;
            }
        }
    }
}

fn givens(a: C64, b: C64) -> (f64, C64, C64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, ZERO, a);
    }
    if an == 0.0 {
        return (0.0, b.conj() / bn, C64::new(bn, 0.0));
    }
    let r = libm::hypot(an, bn);
    let phase = a / an;
    let c = an / r;
    let s = phase * b.conj() / r;
    (c, s, phase * r)
}
