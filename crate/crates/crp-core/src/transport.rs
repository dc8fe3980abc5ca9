//! Connections on trivial principal bundles, horizontal lifts and rolling.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    lie, ChartGauge, Connection, ConnectionGauge, Euclidean, Gauge, ManifoldRef, ProductGauge, ProductManifold,
    SonConnection, SpecialOrthogonal, SphereLeviCivita,
};
use crate::linalg::{self, Mat64};
use crate::mcrp::ManifoldControlledPath;
use crate::mintegrate::{gauge_integrate, integrate_smooth_oneform, oneform_from_smooth, Comparison, ControlledOneForm};
use crate::mrde::{rde_solve_manifold, ClosureField, ManifoldField, ManifoldRdeOptions};
use crate::roughcore::{rough_integrate, ControlledPath, RoughPath};

type Rp = RoughPath<f64>;

/// Transport defaults: the flat scheme with a retraction after every step.
pub fn transport_options() -> ManifoldRdeOptions {
    ManifoldRdeOptions { retraction: true, ..Default::default() }
}

/// Structure group, as matrices acting on `R^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixGroup {
    Orthogonal(usize),
    /// `GL(d)`, represented inside `R^{d²}`; the solver's norm bound stands in for invertibility.
    General(usize),
}

impl MatrixGroup {
    pub fn d(&self) -> usize {
        match *self {
            MatrixGroup::Orthogonal(d) | MatrixGroup::General(d) => d,
        }
    }

    pub fn manifold(&self) -> ManifoldRef {
        match *self {
            MatrixGroup::Orthogonal(d) => Arc::new(SpecialOrthogonal::new(d)),
            MatrixGroup::General(d) => Arc::new(Euclidean::new(d * d)),
        }
    }

    /// Left-invariant gauge on `SO(d)`, the identity chart on `GL(d)`.
    pub fn gauge(&self) -> Arc<dyn Gauge> {
        match *self {
            MatrixGroup::Orthogonal(d) => Arc::new(ConnectionGauge::new(Arc::new(SonConnection::left(d)))),
            MatrixGroup::General(d) => Arc::new(ChartGauge::from_atlas(Arc::new(Euclidean::new(d * d)), 0)),
        }
    }

    pub fn inverse(&self, g: &Mat64) -> Result<Mat64> {
        match self {
            MatrixGroup::Orthogonal(_) => Ok(g.transpose()),
            MatrixGroup::General(_) => g.inverse(),
        }
    }
}

type GammaFn = dyn Fn(&[f64]) -> Mat64 + Send + Sync;

/// A connection on `M × G` given by its trivialised `𝔤`-valued one-form `Γ`.
///
/// `ω(v_m, ξ_g) = g⁻¹ξ + g⁻¹Γ(v)g`.
#[derive(Clone)]
pub struct ConnectionForm {
    pub name: String,
    pub base: ManifoldRef,
    pub group: MatrixGroup,
    gamma: Arc<GammaFn>,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct AxiomReport {
    /// `|ω(Ã) − A|`.
    pub fundamental: f64,
    /// `|R_h^*ω − Ad_{h⁻¹}ω|`.
    pub equivariance: f64,
    /// `|ω(horizontal part)|`.
    pub horizontal: f64,
    /// `|horizontal + vertical − ξ|`.
    pub reconstruction: f64,
}

impl ConnectionForm {
    /// `gamma(m)` is the `d² × N` matrix of `v ↦ Γ_m(v)` (row-major).
    pub fn new(name: &str, base: ManifoldRef, group: MatrixGroup, gamma: impl Fn(&[f64]) -> Mat64 + Send + Sync + 'static) -> Self {
        ConnectionForm { name: name.into(), base, group, gamma: Arc::new(gamma) }
    }

    pub fn flat(base: ManifoldRef, group: MatrixGroup) -> Self {
        let (d, n) = (group.d(), base.ambient_dim());
        ConnectionForm::new("flat", base, group, move |_| Mat64::zeros(d * d, n))
    }

    /// `Γ_m` restricted to `T_m M`; skew-symmetrised for orthogonal groups.
    pub fn gamma(&self, m: &[f64]) -> Mat64 {
        let g = (self.gamma)(m).matmul(&self.base.projector(m));
        match self.group {
            MatrixGroup::Orthogonal(d) => {
                let cols: Vec<Vec<f64>> = (0..g.cols()).map(|j| lie::mat(d, &g.col(j)).antisym().into_vec()).collect();
                Mat64::from_cols(&cols)
            }
            MatrixGroup::General(_) => g,
        }
    }

    pub fn apply(&self, m: &[f64], v: &[f64]) -> Mat64 {
        lie::mat(self.group.d(), &self.gamma(m).mul_vec(v))
    }

    pub fn omega(&self, m: &[f64], g: &Mat64, v: &[f64], xi: &Mat64) -> Result<Mat64> {
        let gi = self.group.inverse(g)?;
        Ok(gi.matmul(&xi.add(&self.apply(m, v).matmul(g))))
    }

    /// The horizontal part `(v, −Γ(v)g)` of `(v, ξ)`.
    pub fn horizontal_part(&self, m: &[f64], g: &Mat64, v: &[f64]) -> Mat64 {
        self.apply(m, v).matmul(g).scale(-1.0)
    }

    /// Connection-form axioms and the horizontal/vertical splitting at one sample.
    pub fn axioms(&self, m: &[f64], g: &Mat64, v: &[f64], xi: &Mat64, a: &Mat64, h: &Mat64) -> Result<AxiomReport> {
        let zero = vec![0.0; v.len()];
        let fundamental = self.omega(m, g, &zero, &g.matmul(a))?.sub(a).max_abs();
        let hi = self.group.inverse(h)?;
        let pulled = self.omega(m, &g.matmul(h), v, &xi.matmul(h))?;
        let adjoint = hi.matmul(&self.omega(m, g, v, xi)?).matmul(h);
        let equivariance = pulled.sub(&adjoint).max_abs();
        let hor = self.horizontal_part(m, g, v);
        let horizontal = self.omega(m, g, v, &hor)?.max_abs();
        let ver = xi.sub(&hor);
        // vertical part has no base component, so π_* vanishes by construction
        let reconstruction = hor.add(&ver).sub(xi).max_abs() + self.omega(m, g, &zero, &ver)?.sub(&self.omega(m, g, v, xi)?).max_abs();
        Ok(AxiomReport { fundamental, equivariance, horizontal, reconstruction })
    }
}

/// Solves `dg = −dz·g` on the group; `z` is a `𝔤`-valued path controlled by `rp`.
///
/// The result is controlled by `rp` with `g† = −(z†·)g`.
pub fn group_rde(z: &ControlledPath<f64>, rp: Arc<Rp>, g0: &Mat64, group: MatrixGroup, opts: &ManifoldRdeOptions) -> Result<ManifoldControlledPath> {
    let d = group.d();
    if z.dim() != d * d || g0.shape() != (d, d) {
        return Err(Error::ShapeError(format!("group RDE in dimension {d} got a path in R^{} and a {:?} start", z.dim(), g0.shape())));
    }
    let lifted = Arc::new(RoughPath::lift_controlled(z, &rp)?);
    let man = group.manifold();
    let skew = matches!(group, MatrixGroup::Orthogonal(_));
    let field = ClosureField::new("right-invariant", man.clone(), d * d, move |g, a| {
        let a = if skew { lie::mat(d, a).antisym() } else { lie::mat(d, a) };
        a.matmul(&lie::mat(d, g)).scale(-1.0).into_vec()
    });
    let times = rp.times();
    let sol = rde_solve_manifold(&field, lifted, g0.as_slice(), (times[0], times[times.len() - 1]), opts)?;
    let gub = sol
        .path
        .points
        .iter()
        .zip(&z.gubinelli)
        .map(|(g, zd)| man.projector(g).matmul(&field.matrix(g)).matmul(zd))
        .collect();
    ManifoldControlledPath::new(man, sol.path.points, gub, rp)
}

/// A path `u = (y, g)` in `M × G`.
#[derive(Clone)]
pub struct HorizontalLift {
    pub path: ManifoldControlledPath,
    pub base_manifold: ManifoldRef,
    pub group: MatrixGroup,
    /// `∫Γ(dy)` when the lift was built from a base path.
    pub generator: Option<ControlledPath<f64>>,
    pub connection: String,
    pub g0: Mat64,
}

impl std::fmt::Debug for HorizontalLift {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HorizontalLift")
            .field("path", &self.path)
            .field("base_manifold", &self.base_manifold.name())
            .field("group", &self.group)
            .field("connection", &self.connection)
            .finish()
    }
}

impl HorizontalLift {
    fn n(&self) -> usize {
        self.base_manifold.ambient_dim()
    }

    pub fn len(&self) -> usize {
        self.path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }

    pub fn base_point(&self, s: usize) -> &[f64] {
        &self.path.points[s][..self.n()]
    }

    pub fn fiber(&self, s: usize) -> Mat64 {
        lie::mat(self.group.d(), &self.path.points[s][self.n()..])
    }

    /// `g_s† e_i` for each driver direction `i`.
    pub fn fiber_dag(&self, s: usize) -> Vec<Mat64> {
        let (n, d) = (self.n(), self.group.d());
        let gd = &self.path.gubinelli[s];
        (0..gd.cols()).map(|i| lie::mat(d, &gd.col(i)[n..])).collect()
    }

    /// The projection `π_* u`.
    pub fn base(&self) -> Result<ManifoldControlledPath> {
        let n = self.n();
        let points = self.path.points.iter().map(|p| p[..n].to_vec()).collect();
        let gub = self.path.gubinelli.iter().map(|g| g.block(0, n, 0, g.cols())).collect();
        ManifoldControlledPath::new(self.base_manifold.clone(), points, gub, self.path.driver.clone())
    }

    /// `g_T g_0⁻¹`.
    pub fn holonomy(&self) -> Result<Mat64> {
        Ok(self.fiber(self.len() - 1).matmul(&self.group.inverse(&self.fiber(0))?))
    }

    /// Right translation by a fixed group element.
    pub fn right_translate(&self, h: &Mat64) -> Result<HorizontalLift> {
        let n = self.n();
        let d = self.group.d();
        let points = self
            .path
            .points
            .iter()
            .map(|p| {
                let mut q = p[..n].to_vec();
                q.extend(lie::mat(d, &p[n..]).matmul(h).into_vec());
                q
            })
            .collect();
        let gub = self
            .path
            .gubinelli
            .iter()
            .map(|g| {
                let cols: Vec<Vec<f64>> = (0..g.cols())
                    .map(|i| {
                        let c = g.col(i);
                        let mut q = c[..n].to_vec();
                        q.extend(lie::mat(d, &c[n..]).matmul(h).into_vec());
                        q
                    })
                    .collect();
                Mat64::from_cols(&cols)
            })
            .collect();
        let path = ManifoldControlledPath::new(self.path.manifold.clone(), points, gub, self.path.driver.clone())?;
        Ok(HorizontalLift { path, g0: self.g0.matmul(h), generator: self.generator.clone(), ..self.clone() })
    }
}

fn product_path(y: &ManifoldControlledPath, g: &ManifoldControlledPath) -> Result<ManifoldControlledPath> {
    let man: ManifoldRef = Arc::new(ProductManifold::new(y.manifold.clone(), g.manifold.clone()));
    let points = y.points.iter().zip(&g.points).map(|(a, b)| [a.as_slice(), b.as_slice()].concat()).collect();
    let gub = y
        .gubinelli
        .iter()
        .zip(&g.gubinelli)
        .map(|(a, b)| {
            let cols: Vec<Vec<f64>> = (0..a.cols()).map(|i| [a.col(i), b.col(i)].concat()).collect();
            Mat64::from_cols(&cols)
        })
        .collect();
    ManifoldControlledPath::new(man, points, gub, y.driver.clone())
}

/// Horizontal lift of `y` through `(y_0, g0)`: `z = ∫Γ(dy)` followed by the group RDE.
pub fn horizontal_lift(
    y: &ManifoldControlledPath,
    form: &ConnectionForm,
    g0: &Mat64,
    base_gauge: &dyn Gauge,
    opts: &ManifoldRdeOptions,
) -> Result<HorizontalLift> {
    if y.manifold.ambient_dim() != form.base.ambient_dim() {
        return Err(Error::ShapeError(format!("{} lives over {}, path on {}", form.name, form.base.name(), y.manifold.name())));
    }
    let z = integrate_smooth_oneform(&|m| form.gamma(m), y, base_gauge)?;
    let g = group_rde(&z, y.driver.clone(), g0, form.group, opts)?;
    Ok(HorizontalLift {
        path: product_path(y, &g)?,
        base_manifold: y.manifold.clone(),
        group: form.group,
        generator: Some(z),
        connection: form.name.clone(),
        g0: g0.clone(),
    })
}

/// `sup_t |∫_0^t ω(du)|`, which vanishes for horizontal paths.
pub fn horizontality_defect(lift: &HorizontalLift, form: &ConnectionForm, base_gauge: Arc<dyn Gauge>) -> Result<f64> {
    let (n, d) = (lift.n(), form.group.d());
    let group = form.group;
    let omega = |u: &[f64]| {
        let (m, gf) = u.split_at(n);
        let g = lie::mat(d, gf);
        let gi = group.inverse(&g).unwrap_or_else(|_| Mat64::from_fn(d, d, |_, _| f64::NAN));
        let gam = form.gamma(m);
        let mut cols: Vec<Vec<f64>> = (0..n).map(|a| gi.matmul(&lie::mat(d, &gam.col(a))).matmul(&g).into_vec()).collect();
        for j in 0..d * d {
            cols.push(gi.matmul(&lie::mat(d, &linalg::unit(d * d, j))).into_vec());
        }
        Mat64::from_cols(&cols)
    };
    let gauge = ProductGauge::new(base_gauge, form.group.gauge());
    let w = integrate_smooth_oneform(&omega, &lift.path, &gauge)?;
    Ok(w.values.iter().map(|v| linalg::norm(v)).fold(0.0, f64::max))
}

/// `sup |(g_t − g_s) + Σ_i z†...|`-free check: `∫θ_r(dg) = −(z − z_0)` for `θ_r(ξ) = ξg⁻¹`.
pub fn maurer_cartan_check(g: &ManifoldControlledPath, z: &ControlledPath<f64>, group: MatrixGroup) -> Result<Comparison> {
    let d = group.d();
    let theta = |x: &[f64]| {
        let gi = group.inverse(&lie::mat(d, x)).unwrap_or_else(|_| Mat64::from_fn(d, d, |_, _| f64::NAN));
        let cols: Vec<Vec<f64>> = (0..d * d).map(|j| lie::mat(d, &linalg::unit(d * d, j)).matmul(&gi).into_vec()).collect();
        Mat64::from_cols(&cols)
    };
    let lhs = integrate_smooth_oneform(&theta, g, group.gauge().as_ref())?;
    let z0 = z.values[0].clone();
    let rhs = ControlledPath {
        times: z.times.clone(),
        values: z.values.iter().map(|v| linalg::scale(&linalg::sub(v, &z0), -1.0)).collect(),
        gubinelli: z.gubinelli.iter().map(|m| m.scale(-1.0)).collect(),
    };
    Ok(Comparison::of_paths(&lhs, &rhs))
}

type FrameFn = dyn Fn(&[f64]) -> Mat64 + Send + Sync;

/// Orthonormal frame bundle of `M`, trivialised by a frame field `E` on one patch.
///
/// A frame `u = E(y)g` is stored as `(y, g)` with `g ∈ SO(d)`, and `Γ(v) = Eᵀ∇_v E`.
#[derive(Clone)]
pub struct FrameBundle {
    pub conn: Arc<dyn Connection>,
    pub gauge: Arc<dyn Gauge>,
    pub form: ConnectionForm,
    frame: Arc<FrameFn>,
}

impl FrameBundle {
    pub fn new(conn: Arc<dyn Connection>, name: &str, frame: impl Fn(&[f64]) -> Mat64 + Send + Sync + 'static) -> Self {
        let man = conn.manifold();
        let d = man.dim();
        let frame: Arc<FrameFn> = Arc::new(frame);
        let (c, e, base) = (conn.clone(), frame.clone(), man.clone());
        let gamma = move |m: &[f64]| {
            let em = e(m);
            let basis = base.tangent_basis(m);
            let mut out = Mat64::zeros(d * d, base.ambient_dim());
            for l in 0..basis.cols() {
                let b = basis.col(l);
                let cols: Vec<Vec<f64>> = (0..d)
                    .map(|j| em.transpose().mul_vec(&c.covariant_derivative(m, &b, &|s: &[f64]| e(s).col(j))))
                    .collect();
                out = out.add(&Mat64::outer(&Mat64::from_cols(&cols).into_vec(), &b));
            }
            out
        };
        let form = ConnectionForm::new(&format!("frame:{}:{name}", conn.name()), man, MatrixGroup::Orthogonal(d), gamma);
        let gauge: Arc<dyn Gauge> = Arc::new(ConnectionGauge::new(conn.clone()));
        FrameBundle { conn, gauge, form, frame }
    }

    /// `S²` with the Levi-Civita connection and the frame `(∂_θ, ∂_φ/sin θ)` away from the poles.
    pub fn sphere() -> Self {
        FrameBundle::new(Arc::new(SphereLeviCivita::new()), "latitude", latitude_frame)
    }

    pub fn dim(&self) -> usize {
        self.form.group.d()
    }

    pub fn frame(&self, m: &[f64]) -> Mat64 {
        (self.frame)(m)
    }

    /// `u = E(m)g` as an `N × d` matrix.
    pub fn frame_at(&self, m: &[f64], g: &Mat64) -> Mat64 {
        self.frame(m).matmul(g)
    }
}

/// Orthonormal frame `(e_θ, e_φ)` on `S²` minus the poles.
pub fn latitude_frame(m: &[f64]) -> Mat64 {
    let rho = m[0].hypot(m[1]);
    let e2 = vec![-m[1] / rho, m[0] / rho, 0.0];
    let e1 = linalg::cross(&e2, m);
    Mat64::from_cols(&[e1, e2])
}

/// Parallel translation of the frame `E(y_0)g0` along `y`.
pub fn parallel_translate_frame(y: &ManifoldControlledPath, bundle: &FrameBundle, g0: &Mat64, opts: &ManifoldRdeOptions) -> Result<HorizontalLift> {
    horizontal_lift(y, &bundle.form, g0, bundle.gauge.as_ref(), opts)
}

/// `sup |u_t − U(y_t, y_s)u_s|` over pairs of each width.
pub fn frame_transport_defects(lift: &HorizontalLift, bundle: &FrameBundle, widths: &[usize]) -> Result<Vec<f64>> {
    let u: Vec<Mat64> = (0..lift.len()).map(|s| bundle.frame_at(lift.base_point(s), &lift.fiber(s))).collect();
    widths
        .iter()
        .map(|&w| {
            let mut worst = 0.0f64;
            let mut s = 0;
            while s + w < lift.len() {
                let t = s + w;
                let tr = bundle.conn.transport(lift.base_point(t), lift.base_point(s))?;
                worst = worst.max(u[t].sub(&tr.matmul(&u[s])).max_abs());
                s = t;
            }
            Ok(worst)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Unrolled {
    pub lift: HorizontalLift,
    /// Anti-development in `R^d`, starting at 0.
    pub z: ControlledPath<f64>,
}

/// Anti-development `z = ∫θ̂(du)`, `θ̂(u̇) = u⁻¹π_*u̇`, along the parallel frame through `E(y_0)g0`.
pub fn unroll(y: &ManifoldControlledPath, bundle: &FrameBundle, g0: &Mat64, opts: &ManifoldRdeOptions) -> Result<Unrolled> {
    let lift = parallel_translate_frame(y, bundle, g0, opts)?;
    let gauge = bundle.gauge.as_ref();
    let et = oneform_from_smooth(&|m| bundle.frame(m).transpose(), y, gauge)?;
    let mut alpha = Vec::with_capacity(y.len());
    let mut alpha_dag = Vec::with_capacity(y.len());
    for s in 0..y.len() {
        let gt = lift.fiber(s).transpose();
        alpha.push(gt.matmul(&et.alpha[s]));
        let blocks = lift
            .fiber_dag(s)
            .iter()
            .zip(&et.alpha_dag[s])
            .map(|(gd, b)| gd.transpose().matmul(&et.alpha[s]).add(&gt.matmul(b)))
            .collect();
        alpha_dag.push(blocks);
    }
    let beta = ControlledOneForm { times: y.times.clone(), alpha, alpha_dag, parallelism: et.parallelism };
    let z = gauge_integrate(&beta, y, gauge)?;
    Ok(Unrolled { lift, z })
}

struct RollingField<'a> {
    bundle: &'a FrameBundle,
    product: ManifoldRef,
    n: usize,
}

impl ManifoldField for RollingField<'_> {
    fn name(&self) -> String {
        format!("rolling:{}", self.bundle.form.name)
    }

    fn manifold(&self) -> ManifoldRef {
        self.product.clone()
    }

    fn dim_w(&self) -> usize {
        self.bundle.dim()
    }

    fn eval(&self, u: &[f64], a: &[f64]) -> Vec<f64> {
        let d = self.bundle.dim();
        let (y, gf) = u.split_at(self.n);
        let g = lie::mat(d, gf);
        let v = self.bundle.frame_at(y, &g).mul_vec(a);
        let xi = self.bundle.form.horizontal_part(y, &g, &v);
        [v, xi.into_vec()].concat()
    }
}

/// Development of `z` (in `R^d`, controlled by `rp`) onto `M` from the frame `E(y0)g0`.
pub fn roll(
    z: &ControlledPath<f64>,
    rp: Arc<Rp>,
    bundle: &FrameBundle,
    y0: &[f64],
    g0: &Mat64,
    opts: &ManifoldRdeOptions,
) -> Result<HorizontalLift> {
    let base = bundle.form.base.clone();
    let group = bundle.form.group;
    if z.dim() != bundle.dim() {
        return Err(Error::ShapeError(format!("rolling needs a path in R^{}, got R^{}", bundle.dim(), z.dim())));
    }
    let product: ManifoldRef = Arc::new(ProductManifold::new(base.clone(), group.manifold()));
    let field = RollingField { bundle, product: product.clone(), n: base.ambient_dim() };
    let lifted = Arc::new(RoughPath::lift_controlled(z, &rp)?);
    let times = rp.times();
    let u0 = [y0, g0.as_slice()].concat();
    let sol = rde_solve_manifold(&field, lifted, &u0, (times[0], times[times.len() - 1]), opts)?;
    let gub = sol
        .path
        .points
        .iter()
        .zip(&z.gubinelli)
        .map(|(u, zd)| product.projector(u).matmul(&field.matrix(u)).matmul(zd))
        .collect();
    let path = ManifoldControlledPath::new(product, sol.path.points, gub, rp)?;
    Ok(HorizontalLift { path, base_manifold: base, group, generator: None, connection: bundle.form.name.clone(), g0: g0.clone() })
}

/// `sup_t |y_t − roll(unroll(y))_t|`.
pub fn roll_unroll_defect(y: &ManifoldControlledPath, bundle: &FrameBundle, g0: &Mat64, opts: &ManifoldRdeOptions) -> Result<f64> {
    let un = unroll(y, bundle, g0, opts)?;
    let rolled = roll(&un.z, y.driver.clone(), bundle, &y.points[0], g0, opts)?;
    Ok((0..y.len()).map(|s| linalg::dist(&y.points[s], rolled.base_point(s))).fold(0.0, f64::max))
}

/// `sup_t |(z_t − z_0) − unroll(roll(z))_t|`.
pub fn unroll_roll_defect(
    z: &ControlledPath<f64>,
    rp: Arc<Rp>,
    bundle: &FrameBundle,
    y0: &[f64],
    g0: &Mat64,
    opts: &ManifoldRdeOptions,
) -> Result<f64> {
    let rolled = roll(z, rp, bundle, y0, g0, opts)?;
    let un = unroll(&rolled.base()?, bundle, g0, opts)?;
    let z0 = &z.values[0];
    Ok(z.values.iter().zip(&un.z.values).map(|(a, b)| linalg::dist(&linalg::sub(a, z0), b)).fold(0.0, f64::max))
}

/// `∫⟨α, dy⟩` in the connection gauge against the flat `∫⟨α∘u, dz⟩` along the anti-development.
pub fn rolled_integral_check(
    alpha: &ControlledOneForm,
    y: &ManifoldControlledPath,
    bundle: &FrameBundle,
    g0: &Mat64,
    opts: &ManifoldRdeOptions,
) -> Result<Comparison> {
    let lhs = gauge_integrate(alpha, y, bundle.gauge.as_ref())?;
    let un = unroll(y, bundle, g0, opts)?;
    let mut values = Vec::with_capacity(y.len());
    let mut gub = Vec::with_capacity(y.len());
    for s in 0..y.len() {
        let u = bundle.frame_at(&y.points[s], &un.lift.fiber(s));
        values.push(alpha.alpha[s].matmul(&u).into_vec());
        let cols: Vec<Vec<f64>> = alpha.alpha_dag[s].iter().map(|b| b.matmul(&u).into_vec()).collect();
        gub.push(Mat64::from_cols(&cols));
    }
    let rolled = ControlledPath { times: y.times.clone(), values, gubinelli: gub };
    let rhs = rough_integrate(&rolled, &un.z, &y.driver)?;
    Ok(Comparison::of_paths(&lhs, &rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Sphere;
    use crate::mcrp::{crp_from_projection, crp_pushforward, SmoothMap};
    use crate::roughcore::{lift_smooth, uniform_grid};
    use std::f64::consts::PI;

    /// Latitude at polar angle `theta`, driven by the clock `x(t) = t`.
    fn latitude(theta: f64, n: usize, t1: f64) -> ManifoldControlledPath {
        let grid = uniform_grid(0.0, t1, n);
        let rp = lift_smooth(|t: f64| vec![t], &grid, 8).unwrap();
        let x = crp_from_projection(Arc::new(rp), Arc::new(Euclidean::new(1))).unwrap();
        let f = SmoothMap::new("latitude", Arc::new(Sphere::new()), move |t| {
            vec![theta.sin() * t[0].cos(), theta.sin() * t[0].sin(), theta.cos()]
        });
        crp_pushforward(&f, &x).unwrap()
    }

    /// Unit-speed great circle through `(1,0,0)` tilted by `tilt` out of the equator.
    fn geodesic(tilt: f64, n: usize, t1: f64) -> ManifoldControlledPath {
        let grid = uniform_grid(0.0, t1, n);
        let rp = lift_smooth(move |t: f64| vec![t.cos(), t.sin() * tilt.cos(), t.sin() * tilt.sin()], &grid, 8).unwrap();
        crp_from_projection(Arc::new(rp), Arc::new(Sphere::new())).unwrap()
    }

    #[test]
    fn latitude_holonomy() {
        let theta = PI / 3.0;
        let y = latitude(theta, 1 << 12, 2.0 * PI);
        let b = FrameBundle::sphere();
        let lift = parallel_translate_frame(&y, &b, &Mat64::identity(2), &transport_options()).unwrap();
        let expected = lie::exp(2, &[2.0 * PI * (1.0 - theta.cos())]);
        let err = lift.holonomy().unwrap().sub(&expected).max_abs();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn latitude_generator_error_is_second_order() {
        // leading error of the second-order sum on a clock-driven latitude: 2π cos³θ h²/6
        let theta = 1.1;
        for n in [1 << 9, 1 << 11] {
            let y = latitude(theta, n, 2.0 * PI);
            let b = FrameBundle::sphere();
            let lift = parallel_translate_frame(&y, &b, &Mat64::identity(2), &transport_options()).unwrap();
            let z = lift.generator.unwrap();
            let h = 2.0 * PI / n as f64;
            let err = (z.last()[2] - 2.0 * PI * theta.cos()).abs();
            let lead = 2.0 * PI * theta.cos().powi(3) * h * h / 6.0;
            assert!((err / lead - 1.0).abs() < 0.01, "{err} {lead}");
        }
    }

    #[test]
    fn flat_connection_keeps_fiber() {
        let y = latitude(1.0, 64, 1.0);
        let form = ConnectionForm::flat(y.manifold.clone(), MatrixGroup::Orthogonal(2));
        let g0 = lie::exp(2, &[0.4]);
        let gauge = ConnectionGauge::new(Arc::new(SphereLeviCivita::new()));
        let lift = horizontal_lift(&y, &form, &g0, &gauge, &transport_options()).unwrap();
        for s in 0..lift.len() {
            assert!(lift.fiber(s).sub(&g0).max_abs() < 1e-14);
        }
    }

    #[test]
    fn group_rde_is_exponential_and_inverse_to_maurer_cartan() {
        let a0 = lie::hat(3, &[0.4, -0.7, 0.5]);
        let grid = uniform_grid(0.0, 1.0, 128);
        let a = a0.clone();
        let rp = Arc::new(lift_smooth(move |t: f64| a.scale(t).into_vec(), &grid, 8).unwrap());
        let z = ControlledPath::from_driver(&rp);
        let g0 = lie::exp(3, &[0.1, 0.2, 0.3]);
        let g = group_rde(&z, rp, &g0, MatrixGroup::Orthogonal(3), &transport_options()).unwrap();
        let expected = a0.scale(-1.0).expm().matmul(&g0);
        assert!(linalg::dist(g.last(), expected.as_slice()) < 1e-9);
        let mc = maurer_cartan_check(&g, &z, MatrixGroup::Orthogonal(3)).unwrap();
        assert!(mc.diff_sup < 1e-6, "{mc:?}");
    }

    #[test]
    fn general_linear_group_rde() {
        let a0 = Mat64::from_rows(&[vec![0.3, 1.0], vec![-0.2, 0.1]]);
        let grid = uniform_grid(0.0, 1.0, 128);
        let a = a0.clone();
        let rp = Arc::new(lift_smooth(move |t: f64| a.scale(t).into_vec(), &grid, 8).unwrap());
        let z = ControlledPath::from_driver(&rp);
        let g = group_rde(&z, rp, &Mat64::identity(2), MatrixGroup::General(2), &transport_options()).unwrap();
        assert!(linalg::dist(g.last(), a0.scale(-1.0).expm().as_slice()) < 1e-9);
    }

    #[test]
    fn geodesic_frame_matches_closed_form_transport() {
        let y = geodesic(0.3, 2048, 1.2);
        let b = FrameBundle::sphere();
        let lift = parallel_translate_frame(&y, &b, &Mat64::identity(2), &transport_options()).unwrap();
        let last = lift.len() - 1;
        let tr = b.conn.transport(lift.base_point(last), lift.base_point(0)).unwrap();
        let u0 = b.frame(lift.base_point(0));
        let u1 = b.frame_at(lift.base_point(last), &lift.fiber(last));
        assert!(u1.sub(&tr.matmul(&u0)).max_abs() < 1e-7);
        let d = frame_transport_defects(&lift, &b, &[32, 16, 8, 4, 2]).unwrap();
        assert!(d.iter().all(|v| *v < 1e-9), "{d:?}");
    }

    #[test]
    fn unrolled_geodesic_is_a_line() {
        let y = geodesic(0.3, 1 << 10, 1.5);
        let un = unroll(&y, &FrameBundle::sphere(), &Mat64::identity(2), &transport_options()).unwrap();
        let end = un.z.last().to_vec();
        assert!((linalg::norm(&end) - 1.5).abs() < 1e-7);
        let dir = linalg::scale(&end, 1.0 / 1.5);
        for (t, z) in un.z.times.iter().zip(&un.z.values) {
            assert!(linalg::dist(z, &linalg::scale(&dir, *t)) < 1e-7);
        }
    }

    #[test]
    fn unrolled_latitude_preserves_length() {
        let theta = 1.2;
        let y = latitude(theta, 1 << 12, 2.0 * PI);
        let un = unroll(&y, &FrameBundle::sphere(), &Mat64::identity(2), &transport_options()).unwrap();
        let len: f64 = un.z.values.windows(2).map(|w| linalg::dist(&w[0], &w[1])).sum();
        assert!((len - 2.0 * PI * theta.sin()).abs() < 1e-6, "{len}");
    }

    #[test]
    fn equivariance_and_axioms() {
        let y = latitude(1.0, 128, 2.0);
        let b = FrameBundle::sphere();
        let opts = transport_options();
        let g0 = lie::exp(2, &[0.3]);
        let h = lie::exp(2, &[1.1]);
        let a = parallel_translate_frame(&y, &b, &g0, &opts).unwrap().right_translate(&h).unwrap();
        let c = parallel_translate_frame(&y, &b, &g0.matmul(&h), &opts).unwrap();
        let d = (0..a.len()).map(|s| a.fiber(s).sub(&c.fiber(s)).max_abs()).fold(0.0, f64::max);
        assert!(d < 1e-10, "{d}");
        let m = &y.points[5];
        let v = y.manifold.project_tangent(m, &[0.3, -0.2, 0.5]);
        let rep = b.form.axioms(m, &g0, &v, &g0.matmul(&lie::hat(2, &[0.7])), &lie::hat(2, &[-0.4]), &h).unwrap();
        assert!(rep.fundamental < 1e-10 && rep.equivariance < 1e-8 && rep.horizontal < 1e-10 && rep.reconstruction < 1e-10, "{rep:?}");
        let hd = horizontality_defect(&c, &b.form, b.gauge.clone()).unwrap();
        assert!(hd < 1e-5, "{hd}");
    }

    #[test]
    fn roundtrips_refine() {
        let b = FrameBundle::sphere();
        let opts = transport_options();
        let mut defects = Vec::new();
        for n in [64, 128, 256] {
            let y = latitude(1.0, n, 2.0);
            defects.push(roll_unroll_defect(&y, &b, &Mat64::identity(2), &opts).unwrap());
        }
        assert!(defects[0] / defects[1] > 3.0 && defects[1] / defects[2] > 3.0, "{defects:?}");
    }

    #[test]
    fn rolled_integral_matches_ftc() {
        let y = geodesic(0.4, 1 << 10, 2.0);
        let b = FrameBundle::sphere();
        let df = |_: &[f64]| Mat64::from_rows(&[vec![0.0, 1.0, 0.0]]);
        let alpha = oneform_from_smooth(&df, &y, b.gauge.as_ref()).unwrap();
        let rep = rolled_integral_check(&alpha, &y, &b, &Mat64::identity(2), &transport_options()).unwrap();
        let inc = y.last()[1] - y.points[0][1];
        assert!((rep.lhs[0] - inc).abs() < 1e-6 && (rep.rhs[0] - inc).abs() < 1e-6, "{rep:?} {inc}");
    }
}
