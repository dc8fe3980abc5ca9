//! Bilinear maps on tangent spaces and compatibility tensors.

use crate::error::{Error, Result};
use crate::geometry::connections::Connection;
use crate::geometry::fd;
use crate::geometry::gauge::{Gauge, LogParallelism, Parallelism};
use crate::geometry::{tangent_inverse, Manifold};
use crate::linalg::{self, Mat64};

/// `B: T_m M × T_m M → R^q` stored by its values on an orthonormal basis.
#[derive(Clone, Debug)]
pub struct Bilinear {
    /// `N × d` orthonormal basis of `T_m M`.
    pub basis: Mat64,
    /// `vals[i·d + j] = B(b_i, b_j)`.
    pub vals: Vec<Vec<f64>>,
}

impl Bilinear {
    pub fn zero(basis: Mat64) -> Self {
        let d = basis.cols();
        let q = basis.rows();
        Bilinear { basis, vals: vec![vec![0.0; q]; d * d] }
    }

    pub fn from_fn(basis: Mat64, f: impl Fn(&[f64], &[f64]) -> Vec<f64>) -> Self {
        let d = basis.cols();
        let mut vals = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                vals.push(f(&basis.col(i), &basis.col(j)));
            }
        }
        Bilinear { basis, vals }
    }

    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.vals.first().map(|v| v.len()).unwrap_or(self.basis.rows())
    }

    pub fn apply(&self, v: &[f64], w: &[f64]) -> Vec<f64> {
        let a = self.basis.vec_mul(v);
        let b = self.basis.vec_mul(w);
        let d = self.dim();
        let mut out = vec![0.0; self.out_dim()];
        for i in 0..d {
            for j in 0..d {
                let c = a[i] * b[j];
                if c != 0.0 {
                    out = linalg::axpy(&out, c, &self.vals[i * d + j]);
                }
            }
        }
        out
    }

    /// `B(v, ·)` as a `q × N` matrix.
    pub fn partial(&self, v: &[f64]) -> Mat64 {
        let a = self.basis.vec_mul(v);
        let d = self.dim();
        let mut out = Mat64::zeros(self.out_dim(), self.basis.rows());
        for i in 0..d {
            for j in 0..d {
                if a[i] != 0.0 {
                    out.axpy(a[i], &Mat64::outer(&self.vals[i * d + j], &self.basis.col(j)));
                }
            }
        }
        out
    }

    /// `(v, w) ↦ B(w, v)`.
    pub fn swapped(&self) -> Self {
        let d = self.dim();
        let vals = (0..d * d).map(|k| self.vals[(k % d) * d + k / d].clone()).collect();
        Bilinear { basis: self.basis.clone(), vals }
    }

    pub fn add(&self, other: &Bilinear) -> Self {
        let vals = self.vals.iter().zip(&other.vals).map(|(a, b)| linalg::add(a, b)).collect();
        Bilinear { basis: self.basis.clone(), vals }
    }

    pub fn scale(&self, s: f64) -> Self {
        Bilinear { basis: self.basis.clone(), vals: self.vals.iter().map(|a| linalg::scale(a, s)).collect() }
    }

    /// Largest component difference, evaluated on `self`'s basis.
    pub fn diff_sup(&self, other: &Bilinear) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let (v, w) = (self.basis.col(i), self.basis.col(j));
                worst = worst.max(linalg::dist(&self.vals[i * d + j], &other.apply(&v, &w)));
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| linalg::max_abs(v)).fold(0.0, f64::max)
    }

    /// `sup |B(v, w) + B(w, v)|` over basis pairs.
    pub fn antisymmetry_defect(&self) -> f64 {
        self.diff_sup(&self.swapped().scale(-1.0))
    }

    /// Tensor on a product tangent space that acts factorwise.
    pub fn block_diag(a: &Bilinear, b: &Bilinear) -> Self {
        let basis = a.basis.block_diag(&b.basis);
        let (da, db) = (a.dim(), b.dim());
        let (qa, qb) = (a.out_dim(), b.out_dim());
        let d = da + db;
        let mut vals = vec![vec![0.0; qa + qb]; d * d];
        for i in 0..da {
            for j in 0..da {
                vals[i * d + j][..qa].copy_from_slice(&a.vals[i * da + j]);
            }
        }
        for i in 0..db {
            for j in 0..db {
                vals[(da + i) * d + da + j][qa..].copy_from_slice(&b.vals[i * db + j]);
            }
        }
        Bilinear { basis, vals }
    }
}

fn nan_on_err(r: Result<Mat64>, n: usize) -> Mat64 {
    r.unwrap_or_else(|_| Mat64::from_fn(n, n, |_, _| f64::NAN))
}

fn finish(basis: Mat64, mats: Vec<Mat64>, what: &str) -> Result<Bilinear> {
    if mats.iter().any(|m| !m.is_finite()) {
        return Err(Error::DomainError(format!("{what}: parallelism undefined near the base point")));
    }
    let d = basis.cols();
    let mut vals = Vec::with_capacity(d * d);
    for mi in &mats {
        for j in 0..d {
            vals.push(mi.mul_vec(&basis.col(j)));
        }
    }
    Ok(Bilinear { basis, vals })
}

/// `S^{Ũ,U}_m(v ⊗ w) = d/dε [U(σ_ε, m)⁻¹ Ũ(σ_ε, m) w]` along `σ_0 = m`, `σ̇_0 = v`.
pub fn compatibility_tensor(
    man: &dyn Manifold,
    m: &[f64],
    u_tilde: &dyn Parallelism,
    u: &dyn Parallelism,
    h: f64,
) -> Result<Bilinear> {
    let n = man.ambient_dim();
    let basis = man.tangent_basis(m);
    let mats = (0..basis.cols())
        .map(|i| {
            fd::directional_mat(man, m, &basis.col(i), h, |s| {
                let prod = u.transport(s, m).and_then(|a| {
                    let inv = tangent_inverse(man, &a, m, s)?;
                    Ok(inv.matmul(&u_tilde.transport(s, m)?))
                });
                nan_on_err(prod, n)
            })
        })
        .collect();
    finish(basis, mats, "compatibility tensor")
}

/// The same tensor from the second slot: `d/dε [U(m, σ_ε) Ũ(m, σ_ε)⁻¹ w]`.
pub fn compatibility_tensor_second_slot(
    man: &dyn Manifold,
    m: &[f64],
    u_tilde: &dyn Parallelism,
    u: &dyn Parallelism,
    h: f64,
) -> Result<Bilinear> {
    let n = man.ambient_dim();
    let basis = man.tangent_basis(m);
    let mats = (0..basis.cols())
        .map(|i| {
            fd::directional_mat(man, m, &basis.col(i), h, |s| {
                let prod = u_tilde.transport(m, s).and_then(|a| {
                    let inv = tangent_inverse(man, &a, s, m)?;
                    Ok(u.transport(m, s)?.matmul(&inv))
                });
                nan_on_err(prod, n)
            })
        })
        .collect();
    finish(basis, mats, "compatibility tensor")
}

/// `S^G = S^{ψ*, U}` by nested finite differences.
pub fn gauge_tensor_fd(gauge: &dyn Gauge, m: &[f64]) -> Result<Bilinear> {
    let man = gauge.manifold();
    let lp = LogParallelism::new(gauge);
    compatibility_tensor(man.as_ref(), m, &lp, gauge, fd::NESTED_STEP)
}

/// `S^G`, in closed form when the gauge provides one.
pub fn gauge_tensor(gauge: &dyn Gauge, m: &[f64]) -> Result<Bilinear> {
    match gauge.sg(m) {
        Some(s) => Ok(s),
        None => gauge_tensor_fd(gauge, m),
    }
}

#[derive(Clone, Debug)]
pub struct TorsionReport {
    pub computed: Bilinear,
    pub half_torsion: Bilinear,
    pub sup: f64,
}

/// Compares the finite-difference gauge tensor of a connection gauge with `½T`.
pub fn torsion_check(gauge: &dyn Gauge, conn: &dyn Connection, m: &[f64]) -> Result<TorsionReport> {
    let computed = gauge_tensor_fd(gauge, m)?;
    let basis = gauge.manifold().tangent_basis(m);
    let half_torsion = Bilinear::from_fn(basis, |v, w| linalg::scale(&conn.torsion(m, v, w), 0.5));
    let sup = computed.diff_sup(&half_torsion);
    Ok(TorsionReport { computed, half_torsion, sup })
}

#[derive(Clone, Debug)]
pub struct TaylorReport {
    /// `D²f(v, v) + Df[a(v, v)]`.
    pub hessian: f64,
    /// `d²/dt² f(exp_m(tv))` at `t = 0` by differences.
    pub along_geodesic: f64,
    pub diff: f64,
}

/// Second-order Taylor check of `f ∘ exp_m` against the connection Hessian.
pub fn manifold_taylor_check(conn: &dyn Connection, f: &dyn Fn(&[f64]) -> f64, m: &[f64], v: &[f64]) -> Result<TaylorReport> {
    let h = 1e-4;
    let second = |g: &dyn Fn(f64) -> f64| (g(h) - 2.0 * g(0.0) + g(-h)) / (h * h);
    let d2 = second(&|t| f(&linalg::axpy(m, t, v)));
    let a = conn.geodesic_acceleration(m, v, v);
    let df = fd::richardson(|t| vec![f(&linalg::axpy(m, t, &a))], fd::FD_STEP)[0];
    let hessian = d2 + df;
    let mut pts = Vec::with_capacity(3);
    for t in [-h, 0.0, h] {
        pts.push(f(&conn.exp(m, &linalg::scale(v, t))?));
    }
    let along_geodesic = (pts[0] - 2.0 * pts[1] + pts[2]) / (h * h);
    Ok(TaylorReport { hessian, along_geodesic, diff: (hessian - along_geodesic).abs() })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::connections::{ChristoffelConnection, SonConnection, SphereLeviCivita};
    use crate::geometry::gauge::{ChartGauge, ConnectionGauge, CustomGauge};
    use crate::geometry::manifolds::{Euclidean, Sphere};
    use crate::geometry::ManifoldRef;

    #[test]
    fn quadratic_gauge_on_the_line() {
        let c = 0.7;
        let man: ManifoldRef = Arc::new(Euclidean::new(1));
        let g = CustomGauge::new("quad", man.clone(), move |x, y| {
            let d = y[0] - x[0];
            Ok(vec![d + c * d * d])
        })
        .with_transport(|_, _| Ok(Mat64::identity(1)));
        let lp = LogParallelism::new(&g);
        let m = [0.3];
        let (v, w) = ([1.5], [-0.4]);
        let s = compatibility_tensor(man.as_ref(), &m, &lp, &g, fd::NESTED_STEP).unwrap();
        assert!((s.apply(&v, &w)[0] - (-2.0 * c * v[0] * w[0])).abs() < 1e-8);
        let s_rev = compatibility_tensor(man.as_ref(), &m, &g, &lp, fd::NESTED_STEP).unwrap();
        assert!((s_rev.apply(&v, &w)[0] - 2.0 * c * v[0] * w[0]).abs() < 1e-8);
    }

    #[test]
    fn slots_agree_on_the_sphere() {
        let man: ManifoldRef = Arc::new(Sphere::new());
        let lc = ConnectionGauge::new(Arc::new(SphereLeviCivita::new()));
        let ch = ChartGauge::from_atlas(man.clone(), 1);
        let m = man.retract(&[0.3, -0.2, 0.8]);
        let a = compatibility_tensor(man.as_ref(), &m, &ch, &lc, fd::NESTED_STEP).unwrap();
        let b = compatibility_tensor_second_slot(man.as_ref(), &m, &ch, &lc, fd::NESTED_STEP).unwrap();
        assert!(a.diff_sup(&b) < 1e-6, "{}", a.diff_sup(&b));
        assert!(a.max_abs() > 1e-2);
    }

    #[test]
    fn left_so3_gauge_tensor_is_half_bracket() {
        let conn = Arc::new(SonConnection::left(3));
        let g = ConnectionGauge::new(conn.clone());
        let m = linalg::so3_exp(&[0.2, -0.5, 0.4]).into_vec();
        let rep = torsion_check(&g, conn.as_ref(), &m).unwrap();
        assert!(rep.sup < 1e-5, "{}", rep.sup);
        assert!(rep.half_torsion.max_abs() > 0.1);
    }

    #[test]
    fn christoffel_torsion_identity() {
        let conn = Arc::new(ChristoffelConnection::new(2, "twisted", |x| {
            vec![0.3, 0.5 + x[1], -0.2, 0.1, 0.0, 0.4 * x[0], -0.6, 0.2]
        }));
        let g = ConnectionGauge::new(conn.clone());
        let rep = torsion_check(&g, conn.as_ref(), &[0.1, -0.2]).unwrap();
        assert!(rep.sup < 1e-5, "{}", rep.sup);
    }

    #[test]
    fn bilinear_block_and_partial() {
        let a = Bilinear::from_fn(Mat64::identity(1), |v, w| vec![v[0] * w[0]]);
        let b = Bilinear::from_fn(Mat64::identity(2), |v, w| vec![v[0] * w[1] - v[1] * w[0], 0.0]);
        let c = Bilinear::block_diag(&a, &b);
        let v = [2.0, 1.0, 0.0];
        let w = [3.0, 0.0, 1.0];
        assert_eq!(c.apply(&v, &w), vec![6.0, 1.0, 0.0]);
        assert_eq!(c.partial(&v).mul_vec(&w), c.apply(&v, &w));
        assert!(b.antisymmetry_defect() < 1e-15);
    }

    #[test]
    fn sphere_taylor() {
        let c = SphereLeviCivita::new();
        let f = |x: &[f64]| x[0] * x[1] + x[2].powi(3);
        let m = Sphere::new().retract(&[0.4, 0.5, 0.6]);
        let v = Sphere::new().project_tangent(&m, &[0.3, -0.7, 0.2]);
        let rep = manifold_taylor_check(&c, &f, &m, &v).unwrap();
        assert!(rep.diff < 1e-5, "{rep:?}");
    }
}
