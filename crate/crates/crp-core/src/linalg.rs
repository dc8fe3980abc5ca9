//! Small dense linear algebra: row-major matrices and vector helpers.
//!
//! Dimensions in this crate are tiny (at most a few dozen), so everything is
//! written for clarity over blocking or SIMD.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    /// Builds from a row-major slice.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[T]) -> Self {
        assert_eq!(data.len(), rows * cols, "row slice length");
        Mat { rows, cols, data: data.to_vec() }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_cols(cols: &[Vec<T>]) -> Self {
        let c = cols.len();
        let r = if c == 0 { 0 } else { cols[0].len() };
        Self::from_fn(r, c, |i, j| cols[j][i])
    }

    pub fn column_vector(v: &[T]) -> Self {
        Mat { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    pub fn diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> Vec<T> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[T]) {
        assert_eq!(v.len(), self.rows);
        for i in 0..self.rows {
            self[(i, j)] = v[i];
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Mat<T>) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape {:?} x {:?}", self.shape(), other.shape());
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] = out.data[i * other.cols + j] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "mul_vec shape {:?} x {}", self.shape(), v.len());
        (0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                row.iter().zip(v).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    /// `vᵀ A` as a vector.
    pub fn vec_mul(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len());
        (0..self.cols)
            .map(|j| (0..self.rows).fold(T::zero(), |acc, i| acc + v[i] * self[(i, j)]))
            .collect()
    }

    pub fn add(&self, other: &Mat<T>) -> Self {
        assert_eq!(self.shape(), other.shape(), "add shape");
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Mat<T>) -> Self {
        assert_eq!(self.shape(), other.shape(), "sub shape");
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&a| a * s).collect() }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: T, other: &Mat<T>) {
        assert_eq!(self.shape(), other.shape(), "axpy shape");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + s * b;
        }
    }

    /// Frobenius norm.
    pub fn norm(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &a| acc + a * a).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &a| acc.max(a.abs()))
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).fold(T::zero(), |acc, i| acc + self[(i, i)])
    }

    pub fn sym(&self) -> Self {
        self.add(&self.transpose()).scale(lit(0.5))
    }

    pub fn antisym(&self) -> Self {
        self.sub(&self.transpose()).scale(lit(0.5))
    }

    pub fn outer(a: &[T], b: &[T]) -> Self {
        Self::from_fn(a.len(), b.len(), |i, j| a[i] * b[j])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Reinterprets the data with a new shape of equal size.
    pub fn reshape(&self, rows: usize, cols: usize) -> Self {
        assert_eq!(rows * cols, self.data.len(), "reshape size");
        Mat { rows, cols, data: self.data.clone() }
    }

    /// Horizontal concatenation.
    pub fn hstack(&self, other: &Mat<T>) -> Self {
        assert_eq!(self.rows, other.rows);
        Self::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)]
            } else {
                other[(i, j - self.cols)]
            }
        })
    }

    /// Block-diagonal matrix `diag(self, other)`.
    pub fn block_diag(&self, other: &Mat<T>) -> Self {
        let mut out = Self::zeros(self.rows + other.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(i, j)];
            }
        }
        for i in 0..other.rows {
            for j in 0..other.cols {
                out[(self.rows + i, self.cols + j)] = other[(i, j)];
            }
        }
        out
    }

    /// Rows `r0..r1` and columns `c0..c1`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Self {
        Self::from_fn(r1 - r0, c1 - c0, |i, j| self[(r0 + i, c0 + j)])
    }

    /// LU factorisation with partial pivoting.
    pub fn lu(&self) -> Result<Lu<T>> {
        if self.rows != self.cols {
            return Err(Error::ShapeError(format!("LU of non-square {:?}", self.shape())));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = self.max_abs().max(T::min_positive_value());
        for k in 0..n {
            let mut p = k;
            let mut best = a[(k, k)].abs();
            for i in (k + 1)..n {
                if a[(i, k)].abs() > best {
                    best = a[(i, k)].abs();
                    p = i;
                }
            }
            if best <= scale * T::epsilon() * lit(n as f64) {
                return Err(Error::ShapeError("singular matrix".into()));
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    a.data.swap(p * n + j, k * n + j);
                }
            }
            let pivot = a[(k, k)];
            for i in (k + 1)..n {
                let f = a[(i, k)] / pivot;
                a[(i, k)] = f;
                for j in (k + 1)..n {
                    let v = a[(i, j)] - f * a[(k, j)];
                    a[(i, j)] = v;
                }
            }
        }
        Ok(Lu { lu: a, perm })
    }

    pub fn solve_vec(&self, b: &[T]) -> Result<Vec<T>> {
        Ok(self.lu()?.solve(b))
    }

    pub fn solve(&self, b: &Mat<T>) -> Result<Mat<T>> {
        let lu = self.lu()?;
        let mut out = Mat::zeros(b.rows, b.cols);
        for j in 0..b.cols {
            out.set_col(j, &lu.solve(&b.col(j)));
        }
        Ok(out)
    }

    pub fn inverse(&self) -> Result<Mat<T>> {
        self.solve(&Mat::identity(self.rows))
    }

    pub fn det(&self) -> T {
        match self.lu() {
            Ok(lu) => {
                let n = self.rows;
                let mut d = T::one();
                for i in 0..n {
                    d = d * lu.lu[(i, i)];
                }
                // parity of the permutation
                let mut seen = vec![false; n];
                let mut sign = T::one();
                for i in 0..n {
                    if seen[i] {
                        continue;
                    }
                    let mut j = i;
                    let mut len = 0;
                    while !seen[j] {
                        seen[j] = true;
                        j = lu.perm[j];
                        len += 1;
                    }
                    if len % 2 == 0 {
                        sign = -sign;
                    }
                }
                d * sign
            }
            Err(_) => T::zero(),
        }
    }

    /// Matrix exponential by scaling and squaring of a truncated Taylor series.
    pub fn expm(&self) -> Mat<T> {
        assert_eq!(self.rows, self.cols, "expm of non-square");
        let n = self.rows;
        let norm = self.norm();
        let mut s = 0i32;
        let half: T = lit(0.5);
        while norm * lit::<T>(2f64.powi(-s)) > half {
            s += 1;
        }
        let a = self.scale(lit(2f64.powi(-s)));
        let mut term = Mat::identity(n);
        let mut sum = Mat::identity(n);
        for k in 1..=30 {
            term = term.matmul(&a).scale(T::one() / lit(k as f64));
            sum = sum.add(&term);
            if term.max_abs() <= T::epsilon() * lit(1e-2) {
                break;
            }
        }
        for _ in 0..s {
            sum = sum.matmul(&sum);
        }
        sum
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub struct Lu<T> {
    lu: Mat<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                x[i] = x[i] - self.lu[(i, k)] * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                x[i] = x[i] - self.lu[(i, k)] * x[k];
            }
            x[i] = x[i] / self.lu[(i, i)];
        }
        x
    }
}

pub type Mat64 = Mat<f64>;

// ---- vector helpers ---------------------------------------------------------

pub fn add<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn scale<T: Scalar>(a: &[T], s: T) -> Vec<T> {
    a.iter().map(|&x| x * s).collect()
}

/// `a + s * b`.
pub fn axpy<T: Scalar>(a: &[T], s: T, b: &[T]) -> Vec<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x + s * y).collect()
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn max_abs<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}

pub fn dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    norm(&sub(a, b))
}

pub fn cross(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

/// Orthonormalises the columns of `a` (modified Gram–Schmidt), dropping
/// columns whose residual falls below `tol`.
pub fn gram_schmidt(a: &Mat64, tol: f64) -> Mat64 {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for j in 0..a.cols() {
        let mut v = a.col(j);
        for _ in 0..2 {
            for q in &out {
                let c = dot(q, &v);
                v = axpy(&v, -c, q);
            }
        }
        let n = norm(&v);
        if n > tol {
            out.push(scale(&v, 1.0 / n));
        }
    }
    if out.is_empty() {
        return Mat::zeros(a.rows(), 0);
    }
    Mat::from_cols(&out)
}

// ---- rotation helpers -------------------------------------------------------

/// `hat(w)` with `hat(w) v = w × v`.
pub fn hat3(w: &[f64]) -> Mat64 {
    Mat::from_rows(&[
        vec![0.0, -w[2], w[1]],
        vec![w[2], 0.0, -w[0]],
        vec![-w[1], w[0], 0.0],
    ])
}

pub fn vee3(a: &Mat64) -> Vec<f64> {
    vec![
        0.5 * (a[(2, 1)] - a[(1, 2)]),
        0.5 * (a[(0, 2)] - a[(2, 0)]),
        0.5 * (a[(1, 0)] - a[(0, 1)]),
    ]
}

/// Rodrigues formula for `exp(hat(w))`.
pub fn so3_exp(w: &[f64]) -> Mat64 {
    let th2 = dot(w, w);
    let th = th2.sqrt();
    let (a, b) = if th < 1e-4 {
        (1.0 - th2 / 6.0 + th2 * th2 / 120.0, 0.5 - th2 / 24.0 + th2 * th2 / 720.0)
    } else {
        (th.sin() / th, (1.0 - th.cos()) / th2)
    };
    let k = hat3(w);
    let k2 = k.matmul(&k);
    let mut r = Mat::identity(3);
    r.axpy(a, &k);
    r.axpy(b, &k2);
    r
}

/// Principal logarithm of a rotation matrix as an axis-angle vector.
pub fn so3_log(r: &Mat64) -> Vec<f64> {
    let cos = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let skew = vee3(r); // sin(θ) * axis
    let sin = norm(&skew);
    let th = sin.atan2(cos);
    if th < 1e-4 {
        let f = 1.0 + th * th / 6.0 + 7.0 * th.powi(4) / 360.0;
        return scale(&skew, f);
    }
    if std::f64::consts::PI - th < 1e-4 {
        // near π: recover the axis from the symmetric part
        let s = r.add(&Mat::identity(3)).scale(0.5);
        let mut best = 0;
        for i in 1..3 {
            if s[(i, i)] > s[(best, best)] {
                best = i;
            }
        }
        let mut axis = s.col(best);
        let n = norm(&axis);
        axis = scale(&axis, 1.0 / n);
        if dot(&axis, &skew) < 0.0 {
            axis = scale(&axis, -1.0);
        }
        return scale(&axis, th);
    }
    scale(&skew, th / sin)
}

/// Right Jacobian of SO(3): `d/dε exp(hat(w + εδ)) = exp(hat w) hat(J_r(w) δ)`.
pub fn so3_right_jacobian(w: &[f64]) -> Mat64 {
    let th2 = dot(w, w);
    let th = th2.sqrt();
    let (a, b) = if th < 1e-4 {
        (0.5 - th2 / 24.0, 1.0 / 6.0 - th2 / 120.0)
    } else {
        ((1.0 - th.cos()) / th2, (th - th.sin()) / (th2 * th))
    };
    let k = hat3(w);
    let mut j = Mat::identity(3);
    j.axpy(-a, &k);
    j.axpy(b, &k.matmul(&k));
    j
}

pub fn so3_right_jacobian_inv(w: &[f64]) -> Mat64 {
    let th2 = dot(w, w);
    let th = th2.sqrt();
    let c = if th < 1e-4 {
        1.0 / 12.0 + th2 / 720.0
    } else {
        1.0 / th2 - (1.0 + th.cos()) / (2.0 * th * th.sin())
    };
    let k = hat3(w);
    let mut j = Mat::identity(3);
    j.axpy(0.5, &k);
    j.axpy(c, &k.matmul(&k));
    j
}

/// Orthogonal polar factor by Newton iteration `X ← ½(X + X⁻ᵀ)`.
pub fn polar_orthogonal(a: &Mat64) -> Mat64 {
    let mut x = a.clone();
    for _ in 0..60 {
        let inv_t = match x.inverse() {
            Ok(i) => i.transpose(),
            Err(_) => return x,
        };
        let next = x.add(&inv_t).scale(0.5);
        let delta = next.sub(&x).max_abs();
        x = next;
        if delta < 1e-15 {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_and_inverts() {
        let a = Mat::<f64>::from_rows(&[vec![4.0, 1.0, 2.0], vec![0.5, 3.0, 1.0], vec![1.0, -1.0, 5.0]]);
        let inv = a.inverse().unwrap();
        let id = a.matmul(&inv);
        assert!(id.sub(&Mat::identity(3)).max_abs() < 1e-14);
        assert!((a.det() - (4.0 * 16.0 - 1.0 * 1.5 + 2.0 * (-3.5))).abs() < 1e-12);
    }

    #[test]
    fn expm_matches_rodrigues() {
        let w = [0.3, -1.2, 2.0];
        let e1 = hat3(&w).expm();
        let e2 = so3_exp(&w);
        assert!(e1.sub(&e2).max_abs() < 1e-13);
        let back = so3_log(&e2);
        assert!(dist(&back, &w) < 1e-12);
    }

    #[test]
    fn so3_log_near_pi() {
        let w = [0.0, 0.0, std::f64::consts::PI - 1e-7];
        let back = so3_log(&so3_exp(&w));
        assert!(dist(&back, &w) < 1e-6);
    }

    #[test]
    fn right_jacobian_matches_finite_difference() {
        let w = [0.4, 0.2, -0.7];
        let d = [0.1, -0.3, 0.25];
        let h = 1e-6;
        let ep = so3_exp(&axpy(&w, h, &d));
        let em = so3_exp(&axpy(&w, -h, &d));
        let deriv = ep.sub(&em).scale(0.5 / h);
        let lhs = so3_exp(&w).transpose().matmul(&deriv);
        let jd = so3_right_jacobian(&w).mul_vec(&d);
        assert!(dist(&vee3(&lhs), &jd) < 1e-8);
        let back = so3_right_jacobian_inv(&w).mul_vec(&jd);
        assert!(dist(&back, &d) < 1e-12);
    }

    #[test]
    fn polar_returns_rotation() {
        let mut a = so3_exp(&[0.2, 0.1, -0.4]);
        a.axpy(1e-3, &Mat::from_fn(3, 3, |i, j| (i * 3 + j) as f64 * 0.1));
        let q = polar_orthogonal(&a);
        assert!(q.transpose().matmul(&q).sub(&Mat::identity(3)).max_abs() < 1e-14);
    }

    #[test]
    fn gram_schmidt_orthonormal() {
        let a = Mat::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]]);
        let q = gram_schmidt(&a, 1e-12);
        assert!(q.transpose().matmul(&q).sub(&Mat::identity(2)).max_abs() < 1e-14);
    }

    #[test]
    fn works_in_single_precision() {
        let a: Mat<f32> = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let x = a.solve_vec(&[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-6 && (x[1] - 1.4).abs() < 1e-6);
    }
}
