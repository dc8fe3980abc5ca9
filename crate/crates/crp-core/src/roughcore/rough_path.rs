//! Level-2 rough paths stored step by step and composed with Chen's identity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::roughcore::control::Control;
use crate::roughcore::controlled::ControlledPath;
use crate::roughcore::quadrature::gauss_legendre;
use crate::scalar::{lit, Scalar};

/// Weak-geometric residual allowed for quadrature lifts (in `f64`).
pub const LIFT_TOL: f64 = 1e-10;

/// Partitioned rough path over `W = R^k`.
///
/// Only per-step increments and areas are stored; every other pair is
/// produced by folding Chen's identity, so it holds by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoughPath<T> {
    times: Vec<T>,
    values: Vec<Vec<T>>,
    areas: Vec<Mat<T>>,
    control: Control<T>,
}

pub(crate) fn check_grid<T: Scalar>(times: &[T]) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::InvalidGrid { index: times.len() });
    }
    for i in 1..times.len() {
        if !(times[i] > times[i - 1]) {
            return Err(Error::InvalidGrid { index: i });
        }
    }
    Ok(())
}

impl<T: Scalar> RoughPath<T> {
    /// Assembles a rough path from node values and per-step areas.
    pub fn from_parts(times: Vec<T>, values: Vec<Vec<T>>, areas: Vec<Mat<T>>, control: Control<T>) -> Result<Self> {
        check_grid(&times)?;
        if values.len() != times.len() || areas.len() + 1 != times.len() {
            return Err(Error::ShapeError(format!(
                "{} times, {} values, {} areas",
                times.len(),
                values.len(),
                areas.len()
            )));
        }
        let k = values[0].len();
        if values.iter().any(|v| v.len() != k) || areas.iter().any(|a| a.shape() != (k, k)) {
            return Err(Error::ShapeError("inconsistent driver dimension".into()));
        }
        Ok(RoughPath { times, values, areas, control })
    }

    /// Piecewise-linear lift: `X_i = ½ Δx_i ⊗ Δx_i` exactly.
    pub fn piecewise_linear(times: Vec<T>, values: Vec<Vec<T>>, p: T) -> Result<Self> {
        check_grid(&times)?;
        if values.len() != times.len() {
            return Err(Error::ShapeError("values and times differ in length".into()));
        }
        let areas = values
            .windows(2)
            .map(|w| {
                let dx = linalg::sub(&w[1], &w[0]);
                Mat::outer(&dx, &dx).scale(lit(0.5))
            })
            .collect();
        let mut rp = RoughPath { times, values, areas, control: Control::time_scale(T::one(), p) };
        rp.calibrate(p);
        Ok(rp)
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<T>] {
        &self.values
    }

    pub fn areas(&self) -> &[Mat<T>] {
        &self.areas
    }

    pub fn control(&self) -> &Control<T> {
        &self.control
    }

    pub fn p(&self) -> T {
        self.control.p
    }

    /// Driver dimension `k`.
    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.areas.len()
    }

    pub fn set_control(&mut self, control: Control<T>) {
        self.control = control;
    }

    pub fn omega(&self, i: usize, j: usize) -> T {
        self.control.omega(&self.times, i, j)
    }

    /// `(x_{t_i,t_{i+1}}, X_{t_i,t_{i+1}})`.
    pub fn step(&self, i: usize) -> (Vec<T>, &Mat<T>) {
        (linalg::sub(&self.values[i + 1], &self.values[i]), &self.areas[i])
    }

    /// Grid index of `t`, matching within a relative tolerance.
    pub fn index_of(&self, t: T) -> Result<usize> {
        let span = self.times[self.times.len() - 1] - self.times[0];
        let tol = span * lit::<T>(1e-12) + T::epsilon();
        let pos = self.times.partition_point(|&s| s < t - tol);
        if pos < self.times.len() && (self.times[pos] - t).abs() <= tol {
            Ok(pos)
        } else {
            Err(Error::OffGrid { time: t.to_f64_lossy() })
        }
    }

    /// `(x_{s,t}, X_{s,t})` for grid indices `i ≤ j` by left fold of Chen's identity.
    pub fn increment(&self, i: usize, j: usize) -> (Vec<T>, Mat<T>) {
        assert!(i <= j && j < self.times.len(), "increment({i}, {j})");
        let k = self.dim();
        let mut x = vec![T::zero(); k];
        let mut a = Mat::zeros(k, k);
        for s in i..j {
            let (dx, area) = self.step(s);
            chen_push(&mut x, &mut a, &dx, area);
        }
        (x, a)
    }

    /// [`Self::increment`] addressed by times.
    pub fn chen_compose(&self, s: T, t: T) -> Result<(Vec<T>, Mat<T>)> {
        let i = self.index_of(s)?;
        let j = self.index_of(t)?;
        if i > j {
            return Err(Error::GridMismatch(format!("s = {s} after t = {t}")));
        }
        Ok(self.increment(i, j))
    }

    /// Visits `(j, x_{i,j}, X_{i,j})` for `j = i+1, …, last`, folding incrementally.
    pub fn for_each_from(&self, i: usize, last: usize, mut f: impl FnMut(usize, &[T], &Mat<T>)) {
        let k = self.dim();
        let mut x = vec![T::zero(); k];
        let mut a = Mat::zeros(k, k);
        for j in i..last {
            let (dx, area) = self.step(j);
            chen_push(&mut x, &mut a, &dx, area);
            f(j + 1, &x, &a);
        }
    }

    /// Coarse rough path on every `stride`-th node; areas come from Chen.
    pub fn subsample(&self, stride: usize) -> Self {
        assert!(stride >= 1);
        let idx: Vec<usize> = (0..self.times.len()).step_by(stride).collect();
        let times = idx.iter().map(|&i| self.times[i]).collect();
        let values = idx.iter().map(|&i| self.values[i].clone()).collect();
        let areas = idx.windows(2).map(|w| self.increment(w[0], w[1]).1).collect();
        RoughPath { times, values, areas, control: self.control.subsample(stride, self.times.len()) }
    }

    /// Restriction to nodes `i0..=i1`.
    pub fn restrict(&self, i0: usize, i1: usize) -> Self {
        RoughPath {
            times: self.times[i0..=i1].to_vec(),
            values: self.values[i0..=i1].to_vec(),
            areas: self.areas[i0..i1].to_vec(),
            control: self.control.restrict(i0, i1),
        }
    }

    /// Sets a time-scale control `ω = c(t−s)` with the smallest grid-feasible
    /// `c` making `|x| ≤ ω^{1/p}` and `|X| ≤ ω^{2/p}` hold on every pair.
    pub fn calibrate(&mut self, p: T) {
        let n = self.times.len();
        let mut c = T::zero();
        let half_p = p * lit(0.5);
        for i in 0..n - 1 {
            let ti = self.times[i];
            let times = &self.times;
            self.for_each_from(i, n - 1, |j, x, a| {
                let dt = times[j] - ti;
                let need = linalg::norm(x).powf(p).max(a.norm().powf(half_p)) / dt;
                if need > c {
                    c = need;
                }
            });
        }
        if c == T::zero() {
            c = T::epsilon();
        }
        self.control = Control::time_scale(c, p);
    }

    /// Largest `|sym(X_{s,t}) − ½ x_{s,t}⊗x_{s,t}|` over every grid pair.
    pub fn weak_geometric_residual(&self) -> T {
        let n = self.times.len();
        let mut worst = T::zero();
        for i in 0..n - 1 {
            self.for_each_from(i, n - 1, |_, x, a| {
                let r = a.sym().sub(&Mat::outer(x, x).scale(lit(0.5))).max_abs();
                worst = worst.max(r);
            });
        }
        worst
    }

    /// Largest Chen residual `|X_{s,u} − X_{s,t} − X_{t,u} − x_{s,t}⊗x_{t,u}|`
    /// (and the level-one analogue) over every grid triple.
    pub fn chen_residual(&self) -> T {
        let n = self.times.len();
        let k = self.dim();
        let w = k + k * k;
        // row i holds (x_{i,j}, X_{i,j}) for j = i..n-1, packed
        let table: Vec<Vec<T>> = (0..n)
            .map(|i| {
                let mut row = vec![T::zero(); w];
                self.for_each_from(i, n - 1, |_, x, a| {
                    row.extend_from_slice(x);
                    row.extend_from_slice(a.as_slice());
                });
                row
            })
            .collect();
        let mut worst = T::zero();
        for s in 0..n {
            for t in s..n {
                let st = &table[s][(t - s) * w..(t - s + 1) * w];
                let (xst, ast) = st.split_at(k);
                for u in t..n {
                    let su = &table[s][(u - s) * w..(u - s + 1) * w];
                    let tu = &table[t][(u - t) * w..(u - t + 1) * w];
                    let (xsu, asu) = su.split_at(k);
                    let (xtu, atu) = tu.split_at(k);
                    for r in 0..k {
                        worst = worst.max((xsu[r] - xst[r] - xtu[r]).abs());
                        for c in 0..k {
                            let q = r * k + c;
                            worst = worst.max((asu[q] - ast[q] - atu[q] - xst[r] * xtu[c]).abs());
                        }
                    }
                }
            }
        }
        worst
    }

    /// Finite constant `C` with `|x| ≤ C ω^{1/p}` and `|X| ≤ C ω^{2/p}` on all pairs
    /// (infinite when `ω` vanishes on a pair with nonzero increment).
    pub fn bound_constant(&self) -> T {
        let n = self.times.len();
        let p = self.p();
        let mut c = T::zero();
        let tol = lit::<T>(1e-12);
        for i in 0..n - 1 {
            self.for_each_from(i, n - 1, |j, x, a| {
                let w = self.omega(i, j);
                let nx = linalg::norm(x);
                let na = a.norm();
                for (num, e) in [(nx, T::one() / p), (na, lit::<T>(2.0) / p)] {
                    if w > T::zero() {
                        c = c.max(num / w.powf(e));
                    } else if num > tol {
                        c = T::infinity();
                    }
                }
            });
        }
        c
    }

    /// Weak-geometric lift of a controlled path: increments of `z` with areas
    /// `½ Δz⊗Δz + z_i† A_i z_i†ᵀ`, `A_i` the antisymmetric part of the driver area.
    pub fn lift_controlled(z: &ControlledPath<T>, rp: &RoughPath<T>) -> Result<Self> {
        z.check_grid(rp)?;
        let areas = (0..rp.steps())
            .map(|i| {
                let dz = linalg::sub(&z.values[i + 1], &z.values[i]);
                let zd = &z.gubinelli[i];
                let anti = rp.areas[i].antisym();
                Mat::outer(&dz, &dz).scale(lit(0.5)).add(&zd.matmul(&anti).matmul(&zd.transpose()))
            })
            .collect();
        let mut out = RoughPath {
            times: rp.times.clone(),
            values: z.values.clone(),
            areas,
            control: rp.control.clone(),
        };
        out.calibrate(rp.p());
        Ok(out)
    }
}

#[inline]
fn chen_push<T: Scalar>(x: &mut Vec<T>, a: &mut Mat<T>, dx: &[T], area: &Mat<T>) {
    // X_{s,u} = X_{s,t} + X_{t,u} + x_{s,t} ⊗ x_{t,u}
    let k = dx.len();
    for r in 0..k {
        for c in 0..k {
            a[(r, c)] = a[(r, c)] + area[(r, c)] + x[r] * dx[c];
        }
    }
    for r in 0..k {
        x[r] = x[r] + dx[r];
    }
}

/// Options for [`lift_smooth_with`].
#[derive(Clone, Copy, Debug)]
pub struct LiftOptions<T> {
    pub quad_order: usize,
    pub p: T,
}

impl<T: Scalar> Default for LiftOptions<T> {
    fn default() -> Self {
        LiftOptions { quad_order: 8, p: T::one() }
    }
}

/// Lift of a `C²` path by Gauss–Legendre quadrature of `∫ x_{s,v} ⊗ dx_v`.
/// The derivative is taken by Richardson-extrapolated central differences.
pub fn lift_smooth<T: Scalar, F>(path: F, grid: &[T], quad_order: usize) -> Result<RoughPath<T>>
where
    F: Fn(T) -> Vec<T>,
{
    let opts = LiftOptions { quad_order, p: T::one() };
    lift_smooth_with(&path, None::<&fn(T) -> Vec<T>>, grid, opts)
}

/// Lift with an optional closed-form derivative and explicit options.
pub fn lift_smooth_with<T: Scalar, F, D>(path: &F, derivative: Option<&D>, grid: &[T], opts: LiftOptions<T>) -> Result<RoughPath<T>>
where
    F: Fn(T) -> Vec<T>,
    D: Fn(T) -> Vec<T>,
{
    check_grid(grid)?;
    if opts.quad_order < 2 {
        return Err(Error::ShapeError("quadrature order must be at least 2".into()));
    }
    let values: Vec<Vec<T>> = grid.iter().map(|&t| path(t)).collect();
    let k = values[0].len();
    let span = grid[grid.len() - 1] - grid[0];
    let fd_h = T::epsilon().powf(lit(0.2)) * span.max(T::one());
    let deriv = |t: T| -> Vec<T> {
        match derivative {
            Some(d) => d(t),
            None => {
                let central = |h: T| linalg::scale(&linalg::sub(&path(t + h), &path(t - h)), T::one() / (h + h));
                let d1 = central(fd_h);
                let d2 = central(fd_h * lit(0.5));
                d2.iter().zip(&d1).map(|(&b, &a)| (lit::<T>(4.0) * b - a) / lit(3.0)).collect()
            }
        }
    };
    let tol = lit::<T>(LIFT_TOL).max(T::epsilon() * lit(1e3));
    let mut areas = Vec::with_capacity(grid.len() - 1);
    for i in 0..grid.len() - 1 {
        let (a, b) = (grid[i], grid[i + 1]);
        let dx = linalg::sub(&values[i + 1], &values[i]);
        let half_dx = Mat::outer(&dx, &dx).scale(lit(0.5));
        let mut order = opts.quad_order;
        let mut area = Mat::zeros(k, k);
        let mut residual = T::infinity();
        for _ in 0..3 {
            area = step_area(&path, &deriv, a, b, &values[i], order);
            residual = area.sym().sub(&half_dx).max_abs();
            if residual <= tol * (T::one() + half_dx.max_abs()) {
                break;
            }
            order *= 2;
        }
        if !(residual <= tol * (T::one() + half_dx.max_abs())) {
            return Err(Error::LiftFailure { residual: residual.to_f64_lossy() });
        }
        // project onto the weak-geometric set once the quadrature is accurate
        areas.push(half_dx.add(&area.antisym()));
    }
    let mut rp = RoughPath { times: grid.to_vec(), values, areas, control: Control::time_scale(T::one(), opts.p) };
    rp.calibrate(opts.p);
    Ok(rp)
}

fn step_area<T: Scalar, F, D>(path: &F, deriv: &D, a: T, b: T, xa: &[T], order: usize) -> Mat<T>
where
    F: Fn(T) -> Vec<T>,
    D: Fn(T) -> Vec<T>,
{
    let (nodes, weights) = gauss_legendre(order);
    let half = (b - a) * lit(0.5);
    let mid = (a + b) * lit(0.5);
    let k = xa.len();
    let mut area = Mat::zeros(k, k);
    for (&xi, &wi) in nodes.iter().zip(&weights) {
        let v = mid + half * lit(xi);
        let xv = linalg::sub(&path(v), xa);
        let dv = deriv(v);
        area.axpy(half * lit(wi), &Mat::outer(&xv, &dv));
    }
    area
}

/// Canonical pure-area driver on `R²`: `x ≡ 0`, `X_{s,t} = a(t−s)(e₁⊗e₂ − e₂⊗e₁)`,
/// with control `ω = |a|(t−s)` and `p = 2`.
pub fn pure_area_driver<T: Scalar>(a: T, grid: &[T]) -> Result<RoughPath<T>> {
    check_grid(grid)?;
    let areas = grid
        .windows(2)
        .map(|w| {
            let s = a * (w[1] - w[0]);
            Mat::from_rows(&[vec![T::zero(), s], vec![-s, T::zero()]])
        })
        .collect();
    let scale = if a == T::zero() { T::epsilon() } else { a.abs() };
    Ok(RoughPath {
        times: grid.to_vec(),
        values: vec![vec![T::zero(); 2]; grid.len()],
        areas,
        control: Control::time_scale(scale, lit(2.0)),
    })
}

/// Uniform grid with `n` steps on `[a, b]`.
pub fn uniform_grid<T: Scalar>(a: T, b: T, n: usize) -> Vec<T> {
    let h = (b - a) / lit(n as f64);
    (0..=n).map(|i| if i == n { b } else { a + h * lit(i as f64) }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_path_area_is_half_square() {
        let grid = uniform_grid(0.0, 1.0, 4);
        let rp = lift_smooth(|t: f64| vec![t, 0.0], &grid, 4).unwrap();
        let (x, a) = rp.chen_compose(0.0, 1.0).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15);
        let expect = Mat::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.0]]);
        assert!(a.sub(&expect).max_abs() < 1e-14);
    }

    #[test]
    fn collinear_path_has_no_area() {
        let grid = uniform_grid(0.0, 2.0, 16);
        let rp = lift_smooth(|t: f64| vec![t.sin(), t.sin()], &grid, 6).unwrap();
        for i in 0..rp.times().len() {
            for j in i..rp.times().len() {
                assert!(rp.increment(i, j).1.antisym().max_abs() < 1e-14);
            }
        }
    }

    #[test]
    fn pure_area_driver_is_exact() {
        let grid = uniform_grid(0.0, 1.0, 8);
        let rp = pure_area_driver(1.0, &grid).unwrap();
        let (x, a) = rp.chen_compose(0.0, 1.0).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
        assert!(a.sub(&Mat::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]])).max_abs() < 1e-15);
        assert_eq!(rp.weak_geometric_residual(), 0.0);
        assert!(rp.chen_residual() < 1e-15);
        // Frobenius norm of the unit area is √2
        assert!((rp.bound_constant() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn diagonal_increment_vanishes() {
        let grid = uniform_grid(0.0, 1.0, 8);
        let rp = lift_smooth(|t: f64| vec![t.cos(), t * t], &grid, 8).unwrap();
        let (x, a) = rp.chen_compose(0.5, 0.5).unwrap();
        assert!(linalg::max_abs(&x) == 0.0 && a.max_abs() == 0.0);
        assert!(matches!(rp.chen_compose(0.3, 0.5), Err(Error::OffGrid { .. })));
    }

    #[test]
    fn invalid_grid_is_rejected() {
        let err = pure_area_driver(1.0, &[0.0, 0.5, 0.5, 1.0]).unwrap_err();
        assert_eq!(err, Error::InvalidGrid { index: 2 });
    }

    #[test]
    fn calibrated_control_bounds_increments() {
        let grid = uniform_grid(0.0, 1.0, 32);
        let rp = lift_smooth(|t: f64| vec![(3.0 * t).sin(), t * t], &grid, 8).unwrap();
        assert!(rp.bound_constant() <= 1.0 + 1e-12);
    }

    #[test]
    fn subsample_matches_direct_composition() {
        let grid = uniform_grid(0.0, 1.0, 16);
        let rp = lift_smooth(|t: f64| vec![(2.0 * t).cos(), (2.0 * t).sin()], &grid, 8).unwrap();
        let coarse = rp.subsample(4);
        assert_eq!(coarse.steps(), 4);
        let (_, a) = coarse.increment(1, 3);
        let (_, b) = rp.increment(4, 12);
        assert!(a.sub(&b).max_abs() < 1e-15);
    }

    #[test]
    fn single_precision_lift() {
        let grid = uniform_grid(0.0f32, 1.0, 16);
        let rp = lift_smooth(|t: f32| vec![t.cos(), t.sin()], &grid, 8).unwrap();
        assert!(rp.weak_geometric_residual() < 1e-5);
        assert!(rp.chen_residual() < 1e-5);
    }
}
