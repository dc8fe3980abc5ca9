//! Central differences with one Richardson level.

use crate::geometry::Manifold;
use crate::linalg::{self, Mat64};

/// Default step for first derivatives.
pub const FD_STEP: f64 = 1e-5;

/// Step used at both levels of nested differences.
pub const NESTED_STEP: f64 = 1e-3;

/// `(4 D(h/2) − D(h)) / 3` with `D(h) = (f(h) − f(−h)) / 2h`.
pub fn richardson(f: impl Fn(f64) -> Vec<f64>, h: f64) -> Vec<f64> {
    let central = |h: f64| {
        let a = f(h);
        let b = f(-h);
        a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h)).collect::<Vec<f64>>()
    };
    let d1 = central(h);
    let d2 = central(0.5 * h);
    d2.iter().zip(&d1).map(|(b, a)| (4.0 * b - a) / 3.0).collect()
}

/// Matrix-valued [`richardson`].
pub fn richardson_mat(f: impl Fn(f64) -> Mat64, h: f64) -> Mat64 {
    let shape = std::cell::Cell::new((0, 0));
    let flat = richardson(
        |e| {
            let m = f(e);
            shape.set(m.shape());
            m.into_vec()
        },
        h,
    );
    let shape = shape.get();
    Mat64::from_row_slice(shape.0, shape.1, &flat)
}

/// `ε ↦ retract(m + ε v)`.
pub fn curve(man: &dyn Manifold, m: &[f64], v: &[f64], eps: f64) -> Vec<f64> {
    man.retract(&linalg::axpy(m, eps, v))
}

/// `d/dε f(σ_ε)` at `ε = 0` along `σ_ε = retract(m + ε v)`; the step is taken
/// along the unit direction and the result rescaled by `|v|`.
pub fn directional(man: &dyn Manifold, m: &[f64], v: &[f64], h: f64, f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let nv = linalg::norm(v);
    if nv == 0.0 {
        let out = f(m);
        return vec![0.0; out.len()];
    }
    let u = linalg::scale(v, 1.0 / nv);
    let d = richardson(|e| f(&curve(man, m, &u, e)), h);
    linalg::scale(&d, nv)
}

/// Matrix-valued [`directional`].
pub fn directional_mat(man: &dyn Manifold, m: &[f64], v: &[f64], h: f64, f: impl Fn(&[f64]) -> Mat64) -> Mat64 {
    let nv = linalg::norm(v);
    if nv == 0.0 {
        let out = f(m);
        return Mat64::zeros(out.rows(), out.cols());
    }
    let u = linalg::scale(v, 1.0 / nv);
    richardson_mat(|e| f(&curve(man, m, &u, e)), h).scale(nv)
}

/// Ambient Jacobian of `f: R^N → R^q` restricted to `T_m M`, as a `q × N` matrix.
pub fn tangent_jacobian(man: &dyn Manifold, m: &[f64], h: f64, f: impl Fn(&[f64]) -> Vec<f64>) -> Mat64 {
    let basis = man.tangent_basis(m);
    let cols: Vec<Vec<f64>> = (0..basis.cols()).map(|a| directional(man, m, &basis.col(a), h, &f)).collect();
    let q = cols.first().map(|c| c.len()).unwrap_or(0);
    let mut out = Mat64::zeros(q, man.ambient_dim());
    for (a, c) in cols.iter().enumerate() {
        out = out.add(&Mat64::outer(c, &basis.col(a)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_is_fourth_order() {
        let d = richardson(|e| vec![(1.0 + e).exp()], 1e-2);
        assert!((d[0] - 1f64.exp()).abs() < 1e-9);
    }
}
