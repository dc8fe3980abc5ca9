//! Flat rough differential equations `dy = F_{dx}(y)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::roughcore::controlled::ControlledPath;
use crate::roughcore::rough_path::RoughPath;
use crate::scalar::{lit, Scalar};

/// Default ambient norm above which a solve is declared exploded.
pub const EXPLOSION_BOUND: f64 = 1e8;

/// A vector field family `w ↦ F_w` on `V = R^n`, linear in `w ∈ R^k`.
pub trait DrivingField<T: Scalar>: Send + Sync {
    fn dim_v(&self) -> usize;
    fn dim_w(&self) -> usize;

    /// `F_w(y)`.
    fn eval(&self, y: &[T], w: &[T]) -> Vec<T>;

    /// `(∂_v F_w)(y)`. Defaults to a Richardson central difference.
    fn jacobian(&self, y: &[T], v: &[T], w: &[T]) -> Vec<T> {
        let nv = linalg::norm(v);
        if nv == T::zero() {
            return vec![T::zero(); self.dim_v()];
        }
        let scale = T::one() + linalg::norm(y);
        let h = T::epsilon().powf(lit(0.2)) * scale / nv;
        let central = |h: T| {
            let a = self.eval(&linalg::axpy(y, h, v), w);
            let b = self.eval(&linalg::axpy(y, -h, v), w);
            linalg::scale(&linalg::sub(&a, &b), T::one() / (h + h))
        };
        let d1 = central(h);
        let d2 = central(h * lit(0.5));
        d2.iter().zip(&d1).map(|(&b, &a)| (lit::<T>(4.0) * b - a) / lit(3.0)).collect()
    }

    /// `F_·(y)` as an `n × k` matrix.
    fn matrix(&self, y: &[T]) -> Mat<T> {
        let k = self.dim_w();
        let cols: Vec<Vec<T>> = (0..k)
            .map(|i| {
                let mut e = vec![T::zero(); k];
                e[i] = T::one();
                self.eval(y, &e)
            })
            .collect();
        Mat::from_cols(&cols)
    }
}

/// `F_w(y) = Σ_i w_i M_i y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearField<T> {
    pub mats: Vec<Mat<T>>,
}

impl<T: Scalar> DrivingField<T> for LinearField<T> {
    fn dim_v(&self) -> usize {
        self.mats[0].rows()
    }

    fn dim_w(&self) -> usize {
        self.mats.len()
    }

    fn eval(&self, y: &[T], w: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim_v()];
        for (m, &wi) in self.mats.iter().zip(w) {
            if wi != T::zero() {
                out = linalg::axpy(&out, wi, &m.mul_vec(y));
            }
        }
        out
    }

    fn jacobian(&self, _y: &[T], v: &[T], w: &[T]) -> Vec<T> {
        self.eval(v, w)
    }
}

type EvalFn<T> = dyn Fn(&[T], &[T]) -> Vec<T> + Send + Sync;
type JacFn<T> = dyn Fn(&[T], &[T], &[T]) -> Vec<T> + Send + Sync;

/// Closure-backed field; the Jacobian falls back to finite differences.
pub struct FnField<T> {
    dim_v: usize,
    dim_w: usize,
    eval: Box<EvalFn<T>>,
    jac: Option<Box<JacFn<T>>>,
}

impl<T: Scalar> FnField<T> {
    pub fn new(dim_v: usize, dim_w: usize, eval: impl Fn(&[T], &[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        FnField { dim_v, dim_w, eval: Box::new(eval), jac: None }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(&[T], &[T], &[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        self.jac = Some(Box::new(jac));
        self
    }
}

impl<T: Scalar> DrivingField<T> for FnField<T> {
    fn dim_v(&self) -> usize {
        self.dim_v
    }

    fn dim_w(&self) -> usize {
        self.dim_w
    }

    fn eval(&self, y: &[T], w: &[T]) -> Vec<T> {
        (self.eval)(y, w)
    }

    fn jacobian(&self, y: &[T], v: &[T], w: &[T]) -> Vec<T> {
        match &self.jac {
            Some(j) => j(y, v, w),
            None => {
                let nv = linalg::norm(v);
                if nv == T::zero() {
                    return vec![T::zero(); self.dim_v];
                }
                let h = T::epsilon().powf(lit(0.2)) * (T::one() + linalg::norm(y)) / nv;
                let central = |h: T| {
                    let a = self.eval(&linalg::axpy(y, h, v), w);
                    let b = self.eval(&linalg::axpy(y, -h, v), w);
                    linalg::scale(&linalg::sub(&a, &b), T::one() / (h + h))
                };
                let d1 = central(h);
                let d2 = central(h * lit(0.5));
                d2.iter().zip(&d1).map(|(&b, &a)| (lit::<T>(4.0) * b - a) / lit(3.0)).collect()
            }
        }
    }
}

/// One-step scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scheme {
    /// `y + F_x(y) + Σ X_ij (∂_{F_i}F_j)(y)`.
    Davie,
    /// Unit-time flow of `F_x + Σ A_ij ∂_{F_i}F_j`, `A = antisym X`, by RK4 substeps.
    LogOde { substeps: usize },
}

impl Default for Scheme {
    fn default() -> Self {
        Scheme::LogOde { substeps: 4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdeOptions {
    pub scheme: Scheme,
    pub bound: f64,
}

impl Default for RdeOptions {
    fn default() -> Self {
        RdeOptions { scheme: Scheme::default(), bound: EXPLOSION_BOUND }
    }
}

/// `Σ_ij A_ij (∂_{F_i(y)} F_j)(y)`.
pub fn bracket_term<T: Scalar, F: DrivingField<T> + ?Sized>(field: &F, y: &[T], a: &Mat<T>) -> Vec<T> {
    let k = field.dim_w();
    let mut out = vec![T::zero(); field.dim_v()];
    let unit = |i: usize| {
        let mut e = vec![T::zero(); k];
        e[i] = T::one();
        e
    };
    let fi: Vec<Vec<T>> = (0..k).map(|i| field.eval(y, &unit(i))).collect();
    for i in 0..k {
        for j in 0..k {
            let aij = a[(i, j)];
            if aij != T::zero() {
                out = linalg::axpy(&out, aij, &field.jacobian(y, &fi[i], &unit(j)));
            }
        }
    }
    out
}

/// One scheme step from `y` driven by `(dx, area)`.
pub fn step<T: Scalar, F: DrivingField<T> + ?Sized>(field: &F, scheme: Scheme, y: &[T], dx: &[T], area: &Mat<T>) -> Vec<T> {
    match scheme {
        Scheme::Davie => {
            let first = field.eval(y, dx);
            let second = bracket_term(field, y, area);
            linalg::add(&linalg::add(y, &first), &second)
        }
        Scheme::LogOde { substeps } => {
            let anti = area.antisym();
            let has_area = anti.max_abs() > T::zero();
            let vf = |z: &[T]| {
                let v = field.eval(z, dx);
                if has_area {
                    linalg::add(&v, &bracket_term(field, z, &anti))
                } else {
                    v
                }
            };
            let n = substeps.max(1);
            let h = T::one() / lit(n as f64);
            let half = h * lit(0.5);
            let mut z = y.to_vec();
            for _ in 0..n {
                let k1 = vf(&z);
                let k2 = vf(&linalg::axpy(&z, half, &k1));
                let k3 = vf(&linalg::axpy(&z, half, &k2));
                let k4 = vf(&linalg::axpy(&z, h, &k3));
                let sum = linalg::add(&linalg::add(&k1, &k4), &linalg::scale(&linalg::add(&k2, &k3), lit(2.0)));
                z = linalg::axpy(&z, h / lit(6.0), &sum);
            }
            z
        }
    }
}

/// Solves on the grid nodes inside `interval`, returning `(y, F_·(y))`.
pub fn rde_solve_flat<T: Scalar, F: DrivingField<T> + ?Sized>(
    field: &F,
    rp: &RoughPath<T>,
    y0: &[T],
    interval: (T, T),
    opts: RdeOptions,
) -> Result<ControlledPath<T>> {
    if field.dim_w() != rp.dim() || field.dim_v() != y0.len() {
        return Err(Error::ShapeError(format!(
            "field maps R^{} into R^{}, driver is R^{}, y0 in R^{}",
            field.dim_w(),
            field.dim_v(),
            rp.dim(),
            y0.len()
        )));
    }
    let i0 = rp.index_of(interval.0)?;
    let i1 = rp.index_of(interval.1)?;
    if i1 <= i0 {
        return Err(Error::GridMismatch("empty solve interval".into()));
    }
    let bound = lit::<T>(opts.bound);
    let mut values = vec![y0.to_vec()];
    let mut y = y0.to_vec();
    for i in i0..i1 {
        let (dx, area) = rp.step(i);
        let next = step(field, opts.scheme, &y, &dx, area);
        if next.iter().any(|v| !v.is_finite()) || linalg::norm(&next) > bound {
            return Err(Error::Explosion { t: rp.times()[i].to_f64_lossy() });
        }
        y = next;
        values.push(y.clone());
    }
    let gubinelli = values.iter().map(|v| field.matrix(v)).collect();
    Ok(ControlledPath { times: rp.times()[i0..=i1].to_vec(), values, gubinelli })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roughcore::rough_path::{lift_smooth, pure_area_driver, uniform_grid};

    fn commutator_field() -> LinearField<f64> {
        LinearField {
            mats: vec![
                Mat::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]),
                Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]),
            ],
        }
    }

    #[test]
    fn translation_field_is_exact() {
        let grid = uniform_grid(0.0, 1.0, 8);
        let rp = lift_smooth(|t: f64| vec![t.sin(), t * t], &grid, 8).unwrap();
        let f = FnField::new(2, 2, |_y: &[f64], w: &[f64]| w.to_vec());
        for scheme in [Scheme::Davie, Scheme::default()] {
            let y = rde_solve_flat(&f, &rp, &[1.0, 2.0], (0.0, 1.0), RdeOptions { scheme, ..Default::default() }).unwrap();
            let (x, _) = rp.increment(0, 8);
            assert!(linalg::dist(y.last(), &linalg::add(&[1.0, 2.0], &x)) < 1e-14);
        }
    }

    #[test]
    fn pure_area_commutator_flow() {
        let grid = uniform_grid(0.0, 1.0, 1 << 10);
        let rp = pure_area_driver(1.0, &grid).unwrap();
        let y = rde_solve_flat(&commutator_field(), &rp, &[1.0, 1.0], (0.0, 1.0), RdeOptions::default()).unwrap();
        let e = std::f64::consts::E;
        assert!((y.last()[0] - e).abs() < 1e-6);
        assert!((y.last()[1] - 1.0 / e).abs() < 1e-6);
    }

    #[test]
    fn scalar_exponential() {
        let grid = uniform_grid(0.0, 1.0, 1 << 10);
        let rp = lift_smooth(|t: f64| vec![t], &grid, 4).unwrap();
        let f = LinearField { mats: vec![Mat::identity(1)] };
        let y = rde_solve_flat(&f, &rp, &[0.5], (0.0, 1.0), RdeOptions::default()).unwrap();
        assert!((y.last()[0] - 0.5 * std::f64::consts::E).abs() < 1e-8);
    }

    #[test]
    fn explosion_is_detected() {
        let grid = uniform_grid(0.0, 1.0, 64);
        let rp = lift_smooth(|t: f64| vec![t], &grid, 4).unwrap();
        let f = FnField::new(1, 1, |y: &[f64], w: &[f64]| vec![w[0] * y[0] * y[0]]);
        let err = rde_solve_flat(&f, &rp, &[10.0], (0.0, 1.0), RdeOptions { bound: 1e3, ..Default::default() }).unwrap_err();
        assert!(matches!(err, Error::Explosion { .. }));
    }

    #[test]
    fn solves_concatenate() {
        let grid = uniform_grid(0.0, 1.0, 64);
        let rp = lift_smooth(|t: f64| vec![(2.0 * t).sin(), t], &grid, 8).unwrap();
        let f = commutator_field();
        let whole = rde_solve_flat(&f, &rp, &[1.0, 0.5], (0.0, 1.0), RdeOptions::default()).unwrap();
        let a = rde_solve_flat(&f, &rp, &[1.0, 0.5], (0.0, 0.5), RdeOptions::default()).unwrap();
        let b = rde_solve_flat(&f, &rp, a.last(), (0.5, 1.0), RdeOptions::default()).unwrap();
        let joined = a.concat(&b).unwrap();
        assert_eq!(joined.values, whole.values);
    }

    #[test]
    fn jacobian_matches_closed_form() {
        let f = FnField::new(2, 1, |y: &[f64], w: &[f64]| vec![w[0] * y[0].sin(), w[0] * y[0] * y[1]]);
        let y = [0.3, -0.7];
        let v = [0.2, 0.5];
        let jac = f.jacobian(&y, &v, &[1.0]);
        let exact = [0.3f64.cos() * 0.2, 0.2 * -0.7 + 0.3 * 0.5];
        assert!(linalg::dist(&jac, &exact) < 1e-9);
    }
}
