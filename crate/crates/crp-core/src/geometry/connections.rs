//! Covariant derivatives with their exponential, logarithm and transport.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::fd;
use crate::geometry::gauge::Provenance;
use crate::geometry::lie;
use crate::geometry::manifolds::{Euclidean, SpecialOrthogonal, Sphere};
use crate::geometry::tensor::Bilinear;
use crate::geometry::{tangent_inverse, Manifold, ManifoldRef};
use crate::linalg::{self, Mat64};

/// Default geodesic-ball radius for the closed-form connections.
pub const DEFAULT_RADIUS: f64 = std::f64::consts::PI - 0.1;

pub trait Connection: Send + Sync {
    fn name(&self) -> String;
    fn manifold(&self) -> ManifoldRef;
    fn provenance(&self) -> Provenance;

    fn exp(&self, m: &[f64], v: &[f64]) -> Result<Vec<f64>>;
    fn log(&self, m: &[f64], n: &[f64]) -> Result<Vec<f64>>;

    /// Parallel transport `T_m M → T_n M` along the geodesic from `m` to `n`.
    fn transport(&self, n: &[f64], m: &[f64]) -> Result<Mat64>;

    /// `T(v, w)`.
    fn torsion(&self, m: &[f64], v: &[f64], w: &[f64]) -> Vec<f64>;

    /// Symmetric `a(v, w)` with `∇df(v, w) = D²f(v, w) + Df[a(v, w)]`.
    fn geodesic_acceleration(&self, m: &[f64], v: &[f64], w: &[f64]) -> Vec<f64>;

    /// Geodesic distance proxy used by gauge domains.
    fn distance(&self, m: &[f64], n: &[f64]) -> f64;

    fn radius(&self) -> f64 {
        DEFAULT_RADIUS
    }

    /// `½T` at `m` when known in closed form.
    fn half_torsion(&self, _m: &[f64]) -> Option<Bilinear> {
        None
    }

    /// `∇_v F` for a tangent vector field `F`, as `d/dε [U(m, σ_ε) F(σ_ε)]`.
    fn covariant_derivative(&self, m: &[f64], v: &[f64], field: &dyn Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
        let man = self.manifold();
        let m0 = m.to_vec();
        fd::directional(man.as_ref(), m, v, fd::FD_STEP, |x| {
            let u = self.transport(&m0, x).expect("transport inside domain");
            u.mul_vec(&field(x))
        })
    }
}

// ---- S² ---------------------------------------------------------------------

/// Levi-Civita connection of the round sphere, in closed form.
pub struct SphereLeviCivita {
    man: Arc<Sphere>,
    radius: f64,
}

impl SphereLeviCivita {
    pub fn new() -> Self {
        SphereLeviCivita { man: Arc::new(Sphere::new()), radius: DEFAULT_RADIUS }
    }

    pub fn with_manifold(man: Arc<Sphere>) -> Self {
        SphereLeviCivita { man, radius: DEFAULT_RADIUS }
    }

    fn angle(m: &[f64], n: &[f64]) -> f64 {
        linalg::norm(&linalg::cross(m, n)).atan2(linalg::dot(m, n))
    }
}

impl Default for SphereLeviCivita {
    fn default() -> Self {
        SphereLeviCivita::new()
    }
}

impl Connection for SphereLeviCivita {
    fn name(&self) -> String {
        "sphere-levi-civita".into()
    }

    fn manifold(&self) -> ManifoldRef {
        self.man.clone()
    }

    fn provenance(&self) -> Provenance {
        Provenance::SphereClosedForm
    }

    fn exp(&self, m: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let v = self.man.project_tangent(m, v);
        let th = linalg::norm(&v);
        let (c, s) = if th < 1e-4 {
            let t2 = th * th;
            (1.0 - t2 / 2.0 + t2 * t2 / 24.0, 1.0 - t2 / 6.0 + t2 * t2 / 120.0)
        } else {
            (th.cos(), th.sin() / th)
        };
        Ok(linalg::axpy(&linalg::scale(m, c), s, &v))
    }

    fn log(&self, m: &[f64], n: &[f64]) -> Result<Vec<f64>> {
        let th = Self::angle(m, n);
        if th >= self.radius - 1e-6 {
            return Err(Error::NearCutLocus { norm: th });
        }
        let dir = linalg::axpy(n, -linalg::dot(m, n), m);
        let f = if th < 1e-4 {
            let t2 = th * th;
            1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0
        } else {
            th / th.sin()
        };
        Ok(linalg::scale(&dir, f))
    }

    fn transport(&self, n: &[f64], m: &[f64]) -> Result<Mat64> {
        let a = self.log(m, n)?;
        let th2 = linalg::dot(&a, &a);
        let th = th2.sqrt();
        let (c1, c2) = if th < 1e-4 {
            (-0.5 + th2 / 24.0 - th2 * th2 / 720.0, 1.0 - th2 / 6.0 + th2 * th2 / 120.0)
        } else {
            ((th.cos() - 1.0) / th2, th.sin() / th)
        };
        let mut u = Mat64::identity(3);
        u.axpy(c1, &Mat64::outer(&a, &a));
        u.axpy(-c2, &Mat64::outer(m, &a));
        Ok(u.matmul(&self.man.projector(m)))
    }

    fn torsion(&self, _m: &[f64], _v: &[f64], _w: &[f64]) -> Vec<f64> {
        vec![0.0; 3]
    }

    fn geodesic_acceleration(&self, m: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
        linalg::scale(m, -linalg::dot(v, w))
    }

    fn distance(&self, m: &[f64], n: &[f64]) -> f64 {
        Self::angle(m, n)
    }

    fn radius(&self) -> f64 {
        self.radius
    }

    fn half_torsion(&self, m: &[f64]) -> Option<Bilinear> {
        Some(Bilinear::zero(self.man.tangent_basis(m)))
    }

    fn covariant_derivative(&self, m: &[f64], v: &[f64], field: &dyn Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
        let d = fd::directional(self.man.as_ref(), m, v, fd::FD_STEP, field);
        self.man.project_tangent(m, &d)
    }
}

// ---- SO(n) -------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SonConnectionKind {
    /// Left-invariant fields are parallel; torsion `T = −g[θξ, θη]`.
    Left,
    /// Levi-Civita connection of the bi-invariant metric.
    BiInvariant,
}

pub struct SonConnection {
    man: Arc<SpecialOrthogonal>,
    kind: SonConnectionKind,
}

impl SonConnection {
    pub fn new(man: Arc<SpecialOrthogonal>, kind: SonConnectionKind) -> Self {
        SonConnection { man, kind }
    }

    pub fn left(n: usize) -> Self {
        SonConnection::new(Arc::new(SpecialOrthogonal::new(n)), SonConnectionKind::Left)
    }

    pub fn bi_invariant(n: usize) -> Self {
        SonConnection::new(Arc::new(SpecialOrthogonal::new(n)), SonConnectionKind::BiInvariant)
    }

    fn n(&self) -> usize {
        self.man.n()
    }

    fn rel_log(&self, k: &[f64], g: &[f64]) -> Vec<f64> {
        let n = self.n();
        lie::log(n, &lie::mat(n, k).transpose().matmul(&lie::mat(n, g)))
    }
}

impl Connection for SonConnection {
    fn name(&self) -> String {
        match self.kind {
            SonConnectionKind::Left => format!("so{}-left", self.n()),
            SonConnectionKind::BiInvariant => format!("so{}-bi-invariant", self.n()),
        }
    }

    fn manifold(&self) -> ManifoldRef {
        self.man.clone()
    }

    fn provenance(&self) -> Provenance {
        Provenance::LieGroup
    }

    fn exp(&self, m: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        let k = lie::mat(n, m);
        let a = k.transpose().matmul(&lie::mat(n, v)).antisym();
        Ok(k.matmul(&lie::exp(n, &lie::vee(n, &a))).into_vec())
    }

    fn log(&self, m: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        let w = self.rel_log(m, g);
        let th = lie::angle(&w);
        if th >= self.radius() - 1e-6 {
            return Err(Error::NearCutLocus { norm: th });
        }
        Ok(lie::mat(n, m).matmul(&lie::hat(n, &w)).into_vec())
    }

    fn transport(&self, g: &[f64], k: &[f64]) -> Result<Mat64> {
        let n = self.n();
        let km = lie::mat(n, k);
        let gm = lie::mat(n, g);
        let p = self.man.projector(k);
        let w = self.rel_log(k, g);
        if lie::angle(&w) >= self.radius() - 1e-6 {
            return Err(Error::NearCutLocus { norm: lie::angle(&w) });
        }
        let map = match self.kind {
            SonConnectionKind::Left => lie::sandwich(&gm.matmul(&km.transpose()), &Mat64::identity(n)),
            SonConnectionKind::BiInvariant => {
                let e = lie::exp(n, &linalg::scale(&w, 0.5));
                lie::sandwich(&km.matmul(&e).matmul(&km.transpose()), &e)
            }
        };
        Ok(map.matmul(&p))
    }

    fn torsion(&self, m: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
        let n = self.n();
        match self.kind {
            SonConnectionKind::BiInvariant => vec![0.0; n * n],
            SonConnectionKind::Left => {
                let g = lie::mat(n, m);
                let a = g.transpose().matmul(&lie::mat(n, v));
                let b = g.transpose().matmul(&lie::mat(n, w));
                g.matmul(&lie::bracket(&a, &b)).scale(-1.0).into_vec()
            }
        }
    }

    fn geodesic_acceleration(&self, m: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
        let n = self.n();
        let g = lie::mat(n, m);
        let a = g.transpose().matmul(&lie::mat(n, v));
        let b = g.transpose().matmul(&lie::mat(n, w));
        g.matmul(&a.matmul(&b).add(&b.matmul(&a))).scale(0.5).into_vec()
    }

    fn distance(&self, m: &[f64], n: &[f64]) -> f64 {
        lie::angle(&self.rel_log(m, n))
    }

    fn half_torsion(&self, m: &[f64]) -> Option<Bilinear> {
        let basis = self.man.tangent_basis(m);
        Some(Bilinear::from_fn(basis, |v, w| linalg::scale(&self.torsion(m, v, w), 0.5)))
    }
}

// ---- Christoffel symbols on open subsets of R^d -------------------------------

type GammaFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// `∇_v W = ∂_v W + A_x⟨v⟩W` with `(A_x⟨v⟩w)^k = Γ^k_ij(x) v^i w^j`.
pub struct ChristoffelConnection {
    dim: usize,
    gamma: Arc<GammaFn>,
    man: Arc<Euclidean>,
    /// RK4 steps over the unit parameter interval.
    pub steps: usize,
    /// Coordinate radius of the chart domain.
    pub domain: f64,
    pub radius: f64,
    name: String,
}

impl ChristoffelConnection {
    /// `gamma(x)` returns `Γ^k_ij` at index `k·d² + i·d + j`.
    pub fn new(dim: usize, name: &str, gamma: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        ChristoffelConnection {
            dim,
            gamma: Arc::new(gamma),
            man: Arc::new(Euclidean::new(dim)),
            steps: 64,
            domain: f64::INFINITY,
            radius: f64::INFINITY,
            name: name.into(),
        }
    }

    pub fn flat(dim: usize) -> Self {
        ChristoffelConnection::new(dim, "flat", move |_| vec![0.0; dim * dim * dim])
    }

    /// Levi-Civita symbols of a metric `g(x)`, with metric derivatives by finite differences.
    pub fn from_metric(dim: usize, name: &str, metric: impl Fn(&[f64]) -> Mat64 + Send + Sync + 'static) -> Self {
        let metric = Arc::new(metric);
        ChristoffelConnection::new(dim, name, move |x| {
            let g = metric(x);
            let ginv = g.inverse().expect("metric is nondegenerate");
            let dg: Vec<Mat64> = (0..dim)
                .map(|l| fd::richardson_mat(|e| metric(&linalg::axpy(x, e, &linalg::unit(dim, l))), fd::FD_STEP))
                .collect();
            let mut out = vec![0.0; dim * dim * dim];
            for k in 0..dim {
                for i in 0..dim {
                    for j in 0..dim {
                        let mut s = 0.0;
                        for l in 0..dim {
                            s += ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                        }
                        out[k * dim * dim + i * dim + j] = 0.5 * s;
                    }
                }
            }
            out
        })
    }

    /// Levi-Civita symbols of the round metric `4|du|²/(1+|u|²)²` in stereographic coordinates.
    pub fn stereographic_sphere() -> Self {
        let mut c = ChristoffelConnection::new(2, "stereographic-sphere", |u| {
            let s = 1.0 + u[0] * u[0] + u[1] * u[1];
            let df = [-2.0 * u[0] / s, -2.0 * u[1] / s];
            let mut out = vec![0.0; 8];
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                        out[k * 4 + i * 2 + j] = d(i, k) * df[j] + d(j, k) * df[i] - d(i, j) * df[k];
                    }
                }
            }
            out
        });
        c.radius = DEFAULT_RADIUS;
        c
    }

    pub fn gamma(&self, x: &[f64]) -> Vec<f64> {
        (self.gamma)(x)
    }

    /// `A_x⟨v⟩w`.
    pub fn apply(&self, x: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let g = self.gamma(x);
        (0..d)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        s += g[k * d * d + i * d + j] * v[i] * w[j];
                    }
                }
                s
            })
            .collect()
    }

    /// Antisymmetrised symbols `Γ^k_ij − Γ^k_ji`.
    pub fn torsion_symbols(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let g = self.gamma(x);
        let mut out = vec![0.0; d * d * d];
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    out[k * d * d + i * d + j] = g[k * d * d + i * d + j] - g[k * d * d + j * d + i];
                }
            }
        }
        out
    }

    /// Integrates the geodesic and, optionally, transported columns `V`.
    fn integrate(&self, x0: &[f64], v0: &[f64], frame: Option<&Mat64>) -> Result<(Vec<f64>, Option<Mat64>)> {
        let d = self.dim;
        let cols = frame.map(|f| f.cols()).unwrap_or(0);
        let pack = |x: &[f64], p: &[f64], v: Option<&Mat64>| {
            let mut s = x.to_vec();
            s.extend_from_slice(p);
            if let Some(v) = v {
                s.extend_from_slice(v.as_slice());
            }
            s
        };
        let rhs = |s: &[f64]| {
            let x = &s[..d];
            let p = &s[d..2 * d];
            let mut out = p.to_vec();
            out.extend(linalg::scale(&self.apply(x, p, p), -1.0));
            if cols > 0 {
                let v = Mat64::from_row_slice(d, cols, &s[2 * d..]);
                let mut dv = Mat64::zeros(d, cols);
                for c in 0..cols {
                    dv.set_col(c, &linalg::scale(&self.apply(x, p, &v.col(c)), -1.0));
                }
                out.extend_from_slice(dv.as_slice());
            }
            out
        };
        let mut s = pack(x0, v0, frame);
        let h = 1.0 / self.steps as f64;
        for step in 0..self.steps {
            let k1 = rhs(&s);
            let k2 = rhs(&linalg::axpy(&s, 0.5 * h, &k1));
            let k3 = rhs(&linalg::axpy(&s, 0.5 * h, &k2));
            let k4 = rhs(&linalg::axpy(&s, h, &k3));
            let sum = linalg::add(&linalg::add(&k1, &k4), &linalg::scale(&linalg::add(&k2, &k3), 2.0));
            s = linalg::axpy(&s, h / 6.0, &sum);
            if linalg::norm(&s[..d]) >= self.domain || s.iter().any(|x| !x.is_finite()) {
                return Err(Error::ChartExit { t: (step + 1) as f64 * h });
            }
        }
        let x = s[..d].to_vec();
        let v = (cols > 0).then(|| Mat64::from_row_slice(d, cols, &s[2 * d..]));
        Ok((x, v))
    }

    fn check_ball(&self, v: &[f64]) -> Result<()> {
        let nv = linalg::norm(v);
        if nv >= self.radius - 1e-6 {
            return Err(Error::NearCutLocus { norm: nv });
        }
        Ok(())
    }
}

impl Connection for ChristoffelConnection {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn manifold(&self) -> ManifoldRef {
        self.man.clone()
    }

    fn provenance(&self) -> Provenance {
        Provenance::Connection
    }

    fn exp(&self, m: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.integrate(m, v, None)?.0)
    }

    /// Newton shooting on `v ↦ exp_m(v)`.
    fn log(&self, m: &[f64], n: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim;
        let dx = linalg::sub(n, m);
        let mut v = linalg::axpy(&dx, 0.5, &self.apply(m, &dx, &dx));
        let mut converged = false;
        for _ in 0..50 {
            let r = linalg::sub(&self.exp(m, &v)?, n);
            let rn = linalg::norm(&r);
            if !rn.is_finite() {
                break;
            }
            let was_converged = converged;
            converged = rn <= 1e-12;
            let h = 1e-6 * (1.0 + linalg::norm(&v));
            let cols: Vec<Vec<f64>> = (0..d)
                .map(|i| {
                    let e = linalg::unit(d, i);
                    let a = self.exp(m, &linalg::axpy(&v, h, &e));
                    let b = self.exp(m, &linalg::axpy(&v, -h, &e));
                    match (a, b) {
                        (Ok(a), Ok(b)) => linalg::scale(&linalg::sub(&a, &b), 0.5 / h),
                        _ => vec![f64::NAN; d],
                    }
                })
                .collect();
            let jac = Mat64::from_cols(&cols);
            let step = jac.solve_vec(&r).map_err(|_| Error::LogFailure("singular shooting Jacobian".into()))?;
            v = linalg::sub(&v, &step);
            // one polishing step past the tolerance keeps the result smooth in its inputs
            if was_converged {
                self.check_ball(&v)?;
                return Ok(v);
            }
        }
        if converged {
            self.check_ball(&v)?;
            return Ok(v);
        }
        Err(Error::LogFailure(format!("Newton shooting did not converge from {m:?} to {n:?}")))
    }

    fn transport(&self, n: &[f64], m: &[f64]) -> Result<Mat64> {
        let v = self.log(m, n)?;
        let (_, frame) = self.integrate(m, &v, Some(&Mat64::identity(self.dim)))?;
        Ok(frame.expect("frame requested"))
    }

    fn torsion(&self, m: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
        linalg::sub(&self.apply(m, v, w), &self.apply(m, w, v))
    }

    fn geodesic_acceleration(&self, m: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
        linalg::scale(&linalg::add(&self.apply(m, v, w), &self.apply(m, w, v)), -0.5)
    }

    fn distance(&self, m: &[f64], n: &[f64]) -> f64 {
        linalg::dist(m, n)
    }

    fn radius(&self) -> f64 {
        self.radius
    }

    fn half_torsion(&self, m: &[f64]) -> Option<Bilinear> {
        Some(Bilinear::from_fn(Mat64::identity(self.dim), |v, w| linalg::scale(&self.torsion(m, v, w), 0.5)))
    }

    fn covariant_derivative(&self, m: &[f64], v: &[f64], field: &dyn Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
        let d = fd::directional(self.man.as_ref(), m, v, fd::FD_STEP, field);
        linalg::add(&d, &self.apply(m, v, &field(m)))
    }
}

/// Inverse of a connection transport as an ambient map.
pub fn transport_inverse(conn: &dyn Connection, n: &[f64], m: &[f64]) -> Result<Mat64> {
    let u = conn.transport(n, m)?;
    tangent_inverse(conn.manifold().as_ref(), &u, m, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::charts::Stereographic;
    use crate::geometry::Chart;

    #[test]
    fn sphere_closed_forms() {
        let c = SphereLeviCivita::new();
        let e1 = [1.0, 0.0, 0.0];
        let n = c.exp(&e1, &[0.0, std::f64::consts::FRAC_PI_2, 0.0]).unwrap();
        assert!(linalg::dist(&n, &[0.0, 1.0, 0.0]) < 1e-15);
        let l = c.log(&e1, &[0.0, 0.0, 1.0]).unwrap();
        assert!(linalg::dist(&l, &[0.0, 0.0, std::f64::consts::FRAC_PI_2]) < 1e-15);
        let u = c.transport(&[0.0, 1.0, 0.0], &e1).unwrap();
        assert!(linalg::dist(&u.mul_vec(&[0.0, 0.0, 1.0]), &[0.0, 0.0, 1.0]) < 1e-15);
        assert!(c.exp(&e1, &[0.0; 3]).unwrap() == e1.to_vec());
        assert!(matches!(c.log(&e1, &[-1.0, 0.0, 0.0]), Err(Error::NearCutLocus { .. })));
    }

    #[test]
    fn sphere_transport_is_isometric() {
        let c = SphereLeviCivita::new();
        let m = linalg::scale(&[0.2, 0.4, -0.9], 1.0 / linalg::norm(&[0.2, 0.4, -0.9]));
        let n = linalg::scale(&[-0.5, 0.7, 0.1], 1.0 / linalg::norm(&[-0.5, 0.7, 0.1]));
        let u = c.transport(&n, &m).unwrap();
        let b = Sphere::new().tangent_basis(&m);
        let ub = u.matmul(&b);
        assert!(ub.transpose().matmul(&ub).sub(&Mat64::identity(2)).max_abs() < 1e-8);
        for i in 0..2 {
            assert!(linalg::dot(&ub.col(i), &n).abs() < 1e-12);
        }
    }

    #[test]
    fn so3_exponential_is_matrix_exponential() {
        let c = SonConnection::left(3);
        let a = linalg::hat3(&[0.0, 0.0, std::f64::consts::PI]);
        let g = c.exp(Mat64::identity(3).as_slice(), a.as_slice()).unwrap();
        let oracle = a.expm();
        assert!(linalg::dist(&g, oracle.as_slice()) < 1e-12);
        let r = lie::mat(3, &g);
        assert!(r.sub(&Mat64::diag(&[-1.0, -1.0, 1.0])).max_abs() < 1e-12);
    }

    #[test]
    fn son_log_inverts_exp() {
        for conn in [SonConnection::left(3), SonConnection::bi_invariant(3)] {
            let k = linalg::so3_exp(&[0.3, 0.1, -0.6]);
            let v = k.matmul(&linalg::hat3(&[0.5, -1.0, 0.2])).into_vec();
            let g = conn.exp(k.as_slice(), &v).unwrap();
            assert!(linalg::dist(&conn.log(k.as_slice(), &g).unwrap(), &v) < 1e-12);
        }
    }

    #[test]
    fn christoffel_sphere_matches_closed_form() {
        let lc = SphereLeviCivita::new();
        let mut chart_conn = ChristoffelConnection::stereographic_sphere();
        chart_conn.steps = 256;
        let chart = Stereographic::south();
        let m = linalg::scale(&[0.3, 0.2, 0.9], 1.0 / linalg::norm(&[0.3, 0.2, 0.9]));
        let u = chart.forward(&m);
        let du = [0.15, -0.25];
        let v = chart.inverse_differential(&u).mul_vec(&du);
        let n = lc.exp(&m, &v).unwrap();
        let un = chart_conn.exp(&u, &du).unwrap();
        assert!(linalg::dist(&chart.inverse(&un), &n) < 1e-8);
        let back = chart_conn.log(&u, &chart.forward(&n)).unwrap();
        assert!(linalg::dist(&back, &du) < 1e-8);
        // transport agrees after pushing through the chart
        let w = [0.4, 0.1];
        let tw = chart_conn.transport(&un, &u).unwrap().mul_vec(&w);
        let amb = lc.transport(&n, &m).unwrap().mul_vec(&chart.inverse_differential(&u).mul_vec(&w));
        assert!(linalg::dist(&chart.inverse_differential(&un).mul_vec(&tw), &amb) < 1e-8);
    }

    #[test]
    fn metric_symbols_match_closed_form() {
        let from_metric = ChristoffelConnection::from_metric(2, "conformal", |u| {
            let s = 1.0 + u[0] * u[0] + u[1] * u[1];
            Mat64::identity(2).scale(4.0 / (s * s))
        });
        let closed = ChristoffelConnection::stereographic_sphere();
        let x = [0.3, -0.8];
        assert!(linalg::dist(&from_metric.gamma(&x), &closed.gamma(&x)) < 1e-8);
    }
}
