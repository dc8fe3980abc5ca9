//! Rough differential equations on embedded manifolds.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::gauge::log_differential;
use crate::geometry::{fd, gauge_tensor, lie, Chart, Gauge, Manifold, ManifoldRef};
use crate::linalg::{self, Mat64};
use crate::mcrp::{crp_pushforward, ManifoldControlledPath, SmoothMap, ON_MANIFOLD_TOL};
use crate::mintegrate::{integrate_smooth_oneform, Comparison, OneForm};
use crate::order::{estimate_order_with_floor, OrderFit, ROUNDOFF_FLOOR};
use crate::roughcore::rde::{step, DrivingField, EXPLOSION_BOUND};
use crate::roughcore::{rough_integrate, ControlledPath, RoughPath, Scheme};

type Rp = RoughPath<f64>;

/// `w ↦ F_w`, a family of tangent vector fields on `M` linear in `w ∈ R^k`.
pub trait ManifoldField: Send + Sync {
    fn name(&self) -> String;
    fn manifold(&self) -> ManifoldRef;
    fn dim_w(&self) -> usize;

    /// `F_w(m)` in ambient coordinates.
    fn eval(&self, m: &[f64], w: &[f64]) -> Vec<f64>;

    /// `F_·(m)` as an `N × k` matrix.
    fn matrix(&self, m: &[f64]) -> Mat64 {
        let k = self.dim_w();
        Mat64::from_cols(&(0..k).map(|i| self.eval(m, &linalg::unit(k, i))).collect::<Vec<_>>())
    }

    /// Ambient derivative of `F_w` along `v ∈ T_m M`.
    fn derivative(&self, m: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
        let man = self.manifold();
        fd::directional(man.as_ref(), m, v, fd::FD_STEP, |x| self.eval(x, w))
    }
}

/// `F_w(m) = P(m) w`.
pub struct ProjectionField {
    man: ManifoldRef,
}

impl ProjectionField {
    pub fn new(man: ManifoldRef) -> Self {
        ProjectionField { man }
    }
}

impl ManifoldField for ProjectionField {
    fn name(&self) -> String {
        format!("projection-{}", self.man.name())
    }

    fn manifold(&self) -> ManifoldRef {
        self.man.clone()
    }

    fn dim_w(&self) -> usize {
        self.man.ambient_dim()
    }

    fn eval(&self, m: &[f64], w: &[f64]) -> Vec<f64> {
        self.man.project_tangent(m, w)
    }

    fn matrix(&self, m: &[f64]) -> Mat64 {
        self.man.projector(m)
    }
}

/// `F_a(x) = −â x` for `a ∈ R³`, on `SO(3)` (`x = g`) or on `S²` (`x = m`).
pub struct RotationField {
    man: ManifoldRef,
    on_group: bool,
}

impl RotationField {
    pub fn on_so3(man: ManifoldRef) -> Self {
        RotationField { man, on_group: true }
    }

    pub fn on_sphere(man: ManifoldRef) -> Self {
        RotationField { man, on_group: false }
    }
}

impl ManifoldField for RotationField {
    fn name(&self) -> String {
        if self.on_group { "rotation-so3" } else { "rotation-s2" }.into()
    }

    fn manifold(&self) -> ManifoldRef {
        self.man.clone()
    }

    fn dim_w(&self) -> usize {
        3
    }

    fn eval(&self, m: &[f64], w: &[f64]) -> Vec<f64> {
        let a = linalg::hat3(w).scale(-1.0);
        if self.on_group {
            a.matmul(&lie::mat(3, m)).into_vec()
        } else {
            a.mul_vec(m)
        }
    }

    fn derivative(&self, _m: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
        self.eval(v, w)
    }
}

/// `F_w(x) = |x| (I − x̂x̂ᵀ) w` on `R³ \ {0}`; related to the projection field on `S²` by `x ↦ x/|x|`.
pub struct RadialField {
    man: ManifoldRef,
}

impl RadialField {
    pub fn new(man: ManifoldRef) -> Self {
        RadialField { man }
    }
}

impl ManifoldField for RadialField {
    fn name(&self) -> String {
        "radial".into()
    }

    fn manifold(&self) -> ManifoldRef {
        self.man.clone()
    }

    fn dim_w(&self) -> usize {
        self.man.ambient_dim()
    }

    fn eval(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        let r = linalg::norm(x);
        let u = linalg::scale(x, 1.0 / r);
        linalg::scale(&linalg::axpy(w, -linalg::dot(&u, w), &u), r)
    }
}

pub struct ZeroField {
    man: ManifoldRef,
    k: usize,
}

impl ZeroField {
    pub fn new(man: ManifoldRef, k: usize) -> Self {
        ZeroField { man, k }
    }
}

impl ManifoldField for ZeroField {
    fn name(&self) -> String {
        "zero".into()
    }

    fn manifold(&self) -> ManifoldRef {
        self.man.clone()
    }

    fn dim_w(&self) -> usize {
        self.k
    }

    fn eval(&self, m: &[f64], _w: &[f64]) -> Vec<f64> {
        vec![0.0; m.len()]
    }
}

type FieldFn = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;

pub struct ClosureField {
    name: String,
    man: ManifoldRef,
    k: usize,
    f: Arc<FieldFn>,
}

impl ClosureField {
    pub fn new(name: &str, man: ManifoldRef, k: usize, f: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        ClosureField { name: name.into(), man, k, f: Arc::new(f) }
    }
}

impl ManifoldField for ClosureField {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn manifold(&self) -> ManifoldRef {
        self.man.clone()
    }

    fn dim_w(&self) -> usize {
        self.k
    }

    fn eval(&self, m: &[f64], w: &[f64]) -> Vec<f64> {
        (self.f)(m, w)
    }
}

/// `max_{i,m} |(I − P(m)) F_{e_i}(m)|` over the given points.
pub fn tangency_residual(field: &dyn ManifoldField, points: &[Vec<f64>]) -> f64 {
    let man = field.manifold();
    points
        .iter()
        .map(|m| {
            let f = field.matrix(m);
            man.projector(m).matmul(&f).sub(&f).max_abs()
        })
        .fold(0.0, f64::max)
}

/// Chart representative `F^φ_w(u) = dφ F_w(φ⁻¹(u))` as a flat field on `R^d`.
pub struct ChartField<'a> {
    pub field: &'a dyn ManifoldField,
    pub chart: &'a dyn Chart,
}

impl DrivingField<f64> for ChartField<'_> {
    fn dim_v(&self) -> usize {
        self.chart.dim()
    }

    fn dim_w(&self) -> usize {
        self.field.dim_w()
    }

    fn eval(&self, u: &[f64], w: &[f64]) -> Vec<f64> {
        let m = self.chart.inverse(u);
        self.chart.differential(&m).mul_vec(&self.field.eval(&m, w))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldRdeOptions {
    pub scheme: Scheme,
    /// Project onto `M` after every step.
    pub retraction: bool,
    /// Re-chart when the current chart's margin drops below this.
    pub margin: f64,
    pub bound: f64,
    /// Scan the atlas in reverse order when selecting charts.
    pub reverse_atlas: bool,
}

impl Default for ManifoldRdeOptions {
    fn default() -> Self {
        ManifoldRdeOptions { scheme: Scheme::default(), retraction: false, margin: 0.2, bound: EXPLOSION_BOUND, reverse_atlas: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartSwitch {
    pub t: f64,
    pub chart: String,
}

#[derive(Clone, Debug)]
pub struct RdeSolution {
    pub path: ManifoldControlledPath,
    pub chart_switches: Vec<ChartSwitch>,
}

fn select_chart(man: &dyn Manifold, m: &[f64], reverse: bool) -> Option<(usize, f64)> {
    let n = man.atlas().len();
    let order: Vec<usize> = if reverse { (0..n).rev().collect() } else { (0..n).collect() };
    let mut best: Option<(usize, f64)> = None;
    for i in order {
        let g = man.atlas()[i].margin(m);
        if g > 0.0 && best.is_none_or(|(_, b)| g > b) {
            best = Some((i, g));
        }
    }
    best
}

/// Solves `dy = F_{dX}(y)` on `[a, b]` by stepping the flat scheme in charts.
pub fn rde_solve_manifold(
    field: &dyn ManifoldField,
    rp: Arc<Rp>,
    y0: &[f64],
    interval: (f64, f64),
    opts: &ManifoldRdeOptions,
) -> Result<RdeSolution> {
    let man = field.manifold();
    if field.dim_w() != rp.dim() || y0.len() != man.ambient_dim() {
        return Err(Error::ShapeError(format!(
            "field driven by R^{} on {}, driver in R^{}, y0 in R^{}",
            field.dim_w(),
            man.name(),
            rp.dim(),
            y0.len()
        )));
    }
    let i0 = rp.index_of(interval.0)?;
    let i1 = rp.index_of(interval.1)?;
    if i1 <= i0 {
        return Err(Error::GridMismatch("empty solve interval".into()));
    }
    let times = rp.times();
    let distance = man.distance_to(y0);
    if !(distance <= ON_MANIFOLD_TOL) {
        return Err(Error::NotOnManifold { index: i0, t: times[i0], distance });
    }
    let atlas = man.atlas();
    let (mut ci, _) = select_chart(man.as_ref(), y0, opts.reverse_atlas).ok_or(Error::AtlasGap { t: times[i0] })?;
    let mut switches = vec![ChartSwitch { t: times[i0], chart: atlas[ci].name() }];
    let mut points = vec![y0.to_vec()];
    for i in i0..i1 {
        let y = points.last().expect("nonempty");
        if atlas[ci].margin(y) < opts.margin {
            match select_chart(man.as_ref(), y, opts.reverse_atlas) {
                Some((j, _)) if j != ci => {
                    ci = j;
                    switches.push(ChartSwitch { t: times[i], chart: atlas[ci].name() });
                }
                Some(_) => {}
                None => return Err(Error::AtlasGap { t: times[i] }),
            }
        }
        let chart = atlas[ci].as_ref();
        let cf = ChartField { field, chart };
        let (dx, area) = rp.step(i);
        let u = step(&cf, opts.scheme, &chart.forward(y), &dx, area);
        if u.iter().any(|v| !v.is_finite()) || chart.coord_margin(&u) <= 0.0 {
            return Err(Error::Explosion { t: times[i] });
        }
        let mut next = chart.inverse(&u);
        if opts.retraction {
            next = man.retract(&next);
        }
        if linalg::norm(&next) > opts.bound || !man.in_domain(&next) {
            return Err(Error::Explosion { t: times[i] });
        }
        points.push(next);
    }
    let gub = points.iter().map(|m| field.matrix(m)).collect();
    let path = ManifoldControlledPath::new(man, points, gub, Arc::new(rp.restrict(i0, i1)))?;
    Ok(RdeSolution { path, chart_switches: switches })
}

/// Local-defect study over pair widths `m` (coarse to fine).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FormReport {
    pub widths: Vec<usize>,
    pub hs: Vec<f64>,
    pub defects: Vec<f64>,
    pub fit: OrderFit,
    pub target: f64,
    pub pass: bool,
    /// Largest pointwise gap between two equivalent right-hand sides, when computed.
    pub split_gap: Option<f64>,
}

fn form_report(y: &ManifoldControlledPath, widths: &[usize], defects: Vec<f64>, split_gap: Option<f64>) -> Result<FormReport> {
    let dt = y.times[1] - y.times[0];
    let hs: Vec<f64> = widths.iter().map(|&m| m as f64 * dt).collect();
    let fit = estimate_order_with_floor(&defects, &hs, ROUNDOFF_FLOOR)?;
    let target = 3.0 / y.driver.p();
    let pass = fit.meets(target);
    Ok(FormReport { widths: widths.to_vec(), hs, defects, fit, target, pass, split_gap })
}

fn widest_defect(y: &ManifoldControlledPath, w: usize, mut defect: impl FnMut(usize, usize) -> Result<f64>) -> Result<f64> {
    let mut worst = 0.0f64;
    let mut s = 0;
    while s + w < y.len() {
        worst = worst.max(defect(s, s + w)?);
        s += w;
    }
    Ok(worst)
}

/// `v ↦ d/dε [ψ(m, ·)_{*σ_ε} F_w(σ_ε)]` along `σ̇_0 = v`.
fn log_pushed_derivative(gauge: &dyn Gauge, field: &dyn ManifoldField, m: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
    let man = field.manifold();
    let n = man.ambient_dim();
    fd::directional(man.as_ref(), m, v, fd::NESTED_STEP, |s| match log_differential(gauge, m, s, fd::NESTED_STEP) {
        Ok(d) => d.mul_vec(&field.eval(s, w)),
        Err(_) => vec![f64::NAN; n],
    })
}

/// `v ↦ d/dε [U(m, σ_ε) F_w(σ_ε)]`.
fn transported_derivative(gauge: &dyn Gauge, field: &dyn ManifoldField, m: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
    let man = field.manifold();
    let n = man.ambient_dim();
    fd::directional(man.as_ref(), m, v, fd::NESTED_STEP, |s| match gauge.transport(m, s) {
        Ok(u) => u.mul_vec(&field.eval(s, w)),
        Err(_) => vec![f64::NAN; n],
    })
}

/// Second-order coefficients `c_ij = F_{e_i}(m)[(ψ_m)_* F_{e_j}]` of the gauge form.
fn gauge_form_coefficients(gauge: &dyn Gauge, field: &dyn ManifoldField, m: &[f64]) -> Vec<Vec<f64>> {
    let k = field.dim_w();
    let f = field.matrix(m);
    let mut out = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            out.push(log_pushed_derivative(gauge, field, m, &f.col(i), &linalg::unit(k, j)));
        }
    }
    out
}

/// The same coefficients from the split form `−S^{ψ*,U}(F_i ⊗ F_j) + F_i[U(m, ·) F_j]`.
fn split_form_coefficients(gauge: &dyn Gauge, field: &dyn ManifoldField, m: &[f64]) -> Result<Vec<Vec<f64>>> {
    let k = field.dim_w();
    let f = field.matrix(m);
    let sg = gauge_tensor(gauge, m)?;
    let mut out = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let t = transported_derivative(gauge, field, m, &f.col(i), &linalg::unit(k, j));
            out.push(linalg::sub(&t, &sg.apply(&f.col(i), &f.col(j))));
        }
    }
    Ok(out)
}

fn apply_coefficients(coef: &[Vec<f64>], area: &Mat64) -> Vec<f64> {
    let k = area.rows();
    let mut out = vec![0.0; coef[0].len()];
    for i in 0..k {
        for j in 0..k {
            if area[(i, j)] != 0.0 {
                out = linalg::axpy(&out, area[(i, j)], &coef[i * k + j]);
            }
        }
    }
    out
}

/// Gauge characterisation: `ψ(y_s, y_t) ≈₃ F_{x_{s,t}}(y_s) + X_{s,t}^{ij} F_i(y_s)[(ψ_{y_s})_* F_j]`.
pub fn check_rde_gauge_form(y: &ManifoldControlledPath, field: &dyn ManifoldField, gauge: &dyn Gauge, widths: &[usize]) -> Result<FormReport> {
    let coef: Vec<Vec<Vec<f64>>> = y.points.iter().map(|m| gauge_form_coefficients(gauge, field, m)).collect();
    if coef.iter().flatten().flatten().any(|v| !v.is_finite()) {
        return Err(Error::DomainError(format!("{} undefined near the solution", gauge.name())));
    }
    let mut gap = 0.0f64;
    let stride = (y.len() / 16).max(1);
    for s in (0..y.len()).step_by(stride) {
        let split = split_form_coefficients(gauge, field, &y.points[s])?;
        for (a, b) in coef[s].iter().zip(&split) {
            gap = gap.max(linalg::dist(a, b));
        }
    }
    let defects = widths
        .iter()
        .map(|&w| {
            widest_defect(y, w, |s, t| {
                if !gauge.in_domain(&y.points[s], &y.points[t]) {
                    return Err(Error::DomainError(format!("pair ({}, {}) outside {}", y.times[s], y.times[t], gauge.name())));
                }
                let (x, area) = y.driver.increment(s, t);
                let lhs = gauge.psi(&y.points[s], &y.points[t])?;
                let rhs = linalg::add(&field.eval(&y.points[s], &x), &apply_coefficients(&coef[s], &area));
                Ok(linalg::dist(&lhs, &rhs))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    form_report(y, widths, defects, Some(gap))
}

/// Chart characterisation: `φ(y_t) − φ(y_s) ≈₃ F^φ_{x}(u_s) + X^{ij} ∂_{F^φ_i} F^φ_j (u_s)`.
pub fn check_rde_chart_form(y: &ManifoldControlledPath, field: &dyn ManifoldField, chart: &dyn Chart, widths: &[usize]) -> Result<FormReport> {
    if let Some(i) = y.points.iter().position(|p| !chart.contains(p)) {
        return Err(Error::ChartExit { t: y.times[i] });
    }
    let cf = ChartField { field, chart };
    let k = field.dim_w();
    let us: Vec<Vec<f64>> = y.points.iter().map(|p| chart.forward(p)).collect();
    let defects = widths
        .iter()
        .map(|&w| {
            widest_defect(y, w, |s, t| {
                let (x, area) = y.driver.increment(s, t);
                let fm = cf.matrix(&us[s]);
                let mut rhs = cf.eval(&us[s], &x);
                for i in 0..k {
                    for j in 0..k {
                        if area[(i, j)] != 0.0 {
                            rhs = linalg::axpy(&rhs, area[(i, j)], &cf.jacobian(&us[s], &fm.col(i), &linalg::unit(k, j)));
                        }
                    }
                }
                Ok(linalg::dist(&linalg::sub(&us[t], &us[s]), &rhs))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    form_report(y, widths, defects, None)
}

/// Scalar characterisation: `f(y_t) − f(y_s) ≈₃ x^i (F_i f)(y_s) + X^{ij} (F_i F_j f)(y_s)` for each `f`.
pub fn check_rde_scalar_form(
    y: &ManifoldControlledPath,
    field: &dyn ManifoldField,
    fs: &[&dyn Fn(&[f64]) -> f64],
    widths: &[usize],
) -> Result<FormReport> {
    let man = field.manifold();
    let k = field.dim_w();
    // first and second Lie derivatives at every node
    let first = |f: &dyn Fn(&[f64]) -> f64, m: &[f64], j: usize| -> f64 {
        let df = fd::tangent_jacobian(man.as_ref(), m, fd::NESTED_STEP, |x| vec![f(x)]);
        df.mul_vec(&field.eval(m, &linalg::unit(k, j)))[0]
    };
    let mut defects = vec![0.0f64; widths.len()];
    for f in fs {
        let lie1: Vec<Vec<f64>> = y.points.iter().map(|m| (0..k).map(|j| first(*f, m, j)).collect()).collect();
        let lie2: Vec<Vec<f64>> = y
            .points
            .iter()
            .map(|m| {
                let fm = field.matrix(m);
                let mut out = Vec::with_capacity(k * k);
                for i in 0..k {
                    for j in 0..k {
                        out.push(fd::directional(man.as_ref(), m, &fm.col(i), fd::NESTED_STEP, |s| vec![first(*f, s, j)])[0]);
                    }
                }
                out
            })
            .collect();
        for (slot, &w) in widths.iter().enumerate() {
            let d = widest_defect(y, w, |s, t| {
                let (x, area) = y.driver.increment(s, t);
                let mut rhs: f64 = x.iter().zip(&lie1[s]).map(|(a, b)| a * b).sum();
                for i in 0..k {
                    for j in 0..k {
                        rhs += area[(i, j)] * lie2[s][i * k + j];
                    }
                }
                Ok((f(&y.points[t]) - f(&y.points[s]) - rhs).abs())
            })?;
            defects[slot] = defects[slot].max(d);
        }
    }
    form_report(y, widths, defects, None)
}

/// `∫ α(dy)` against the flat integral `∫ ⟨[α ∘ F_·]_* y, dX⟩`.
pub fn check_rde_integral_form(y: &ManifoldControlledPath, field: &dyn ManifoldField, alpha: OneForm, gauge: &dyn Gauge) -> Result<Comparison> {
    let lhs = integrate_smooth_oneform(alpha, y, gauge)?;
    let man = field.manifold();
    let beta = |m: &[f64]| alpha(m).matmul(&field.matrix(m));
    let k = field.dim_w();
    let mut values = Vec::with_capacity(y.len());
    let mut gub = Vec::with_capacity(y.len());
    for (m, d) in y.points.iter().zip(&y.gubinelli) {
        values.push(beta(m).into_vec());
        let cols: Vec<Vec<f64>> =
            (0..k).map(|i| fd::directional_mat(man.as_ref(), m, &d.col(i), fd::NESTED_STEP, |s| beta(s)).into_vec()).collect();
        gub.push(Mat64::from_cols(&cols));
    }
    let b = ControlledPath { times: y.times.clone(), values, gubinelli: gub };
    let rhs = rough_integrate(&b, &ControlledPath::from_driver(&y.driver), &y.driver)?;
    Ok(Comparison::of_paths(&lhs, &rhs))
}

#[derive(Clone, Debug)]
pub struct RelatedReport {
    pub relatedness: f64,
    pub pushed: ManifoldControlledPath,
    pub direct: ManifoldControlledPath,
    pub diff_sup: f64,
}

/// Checks `f_* F_w = F̃_w ∘ f` on the solution and compares `f_* y` with a direct solve of `F̃`.
pub fn f_related_pushforward(
    f: &SmoothMap,
    field: &dyn ManifoldField,
    target_field: &dyn ManifoldField,
    y: &ManifoldControlledPath,
    opts: &ManifoldRdeOptions,
) -> Result<RelatedReport> {
    let man = field.manifold();
    let mut worst = (0usize, 0.0f64);
    for (i, m) in y.points.iter().enumerate() {
        let lhs = f.pushforward(man.as_ref(), m).matmul(&field.matrix(m));
        let rhs = target_field.matrix(&f.eval(m));
        let r = lhs.sub(&rhs).max_abs();
        if !(r <= worst.1) {
            worst = (i, r);
        }
    }
    if !(worst.1 <= 1e-8) {
        return Err(Error::NotRelated { index: worst.0, residual: worst.1 });
    }
    let pushed = crp_pushforward(f, y)?;
    let (a, b) = (y.times[0], y.times[y.len() - 1]);
    let direct = rde_solve_manifold(target_field, y.driver.clone(), &pushed.points[0], (a, b), opts)?.path;
    let diff_sup = pushed.points.iter().zip(&direct.points).map(|(p, q)| linalg::dist(p, q)).fold(0.0, f64::max);
    Ok(RelatedReport { relatedness: worst.1, pushed, direct, diff_sup })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ConnectionGauge, Euclidean, SonConnection, SpecialOrthogonal, Sphere, SphereLeviCivita, Stereographic};
    use crate::roughcore::{lift_smooth, uniform_grid};

    fn line_driver(n: usize, s: f64) -> Arc<Rp> {
        let grid = uniform_grid(0.0, 1.0, n);
        Arc::new(lift_smooth(move |t: f64| vec![s * t, 0.0, 0.0], &grid, 8).unwrap())
    }

    fn curved_driver(n: usize, t1: f64) -> Arc<Rp> {
        let grid = uniform_grid(0.0, t1, n);
        Arc::new(lift_smooth(|t: f64| vec![(2.0 * t).sin(), t * t - t, (3.0 * t).cos() - 1.0], &grid, 8).unwrap())
    }

    fn rk4_projection_oracle(m0: &[f64], s: f64, h: f64, t1: f64) -> Vec<f64> {
        let f = |m: &[f64]| {
            let w = [s, 0.0, 0.0];
            linalg::axpy(&w, -linalg::dot(m, &w), m)
        };
        let mut m = m0.to_vec();
        let n = (t1 / h).round() as usize;
        for _ in 0..n {
            let k1 = f(&m);
            let k2 = f(&linalg::axpy(&m, 0.5 * h, &k1));
            let k3 = f(&linalg::axpy(&m, 0.5 * h, &k2));
            let k4 = f(&linalg::axpy(&m, h, &k3));
            let sum = linalg::add(&linalg::add(&k1, &k4), &linalg::scale(&linalg::add(&k2, &k3), 2.0));
            m = linalg::axpy(&m, h / 6.0, &sum);
        }
        m
    }

    #[test]
    fn zero_field_is_constant() {
        let man: ManifoldRef = Arc::new(Sphere::new());
        let y0 = [0.0, 0.6, 0.8];
        let sol = rde_solve_manifold(&ZeroField::new(man, 3), curved_driver(32, 1.0), &y0, (0.0, 1.0), &Default::default()).unwrap();
        let d = sol.path.points.iter().map(|p| linalg::dist(p, &y0)).fold(0.0, f64::max);
        assert!(d < 1e-14, "{d}");
    }

    #[test]
    fn sphere_projection_matches_ode_oracle() {
        let man: ManifoldRef = Arc::new(Sphere::new());
        let y0 = vec![0.0, 0.6, 0.8];
        let s = 1.5;
        let sol = rde_solve_manifold(&ProjectionField::new(man), line_driver(1 << 10, s), &y0, (0.0, 1.0), &Default::default()).unwrap();
        let oracle = rk4_projection_oracle(&y0, s, 1e-5, 1.0);
        assert!(linalg::dist(sol.path.last(), &oracle) < 1e-6);
        let drift = sol.path.points.iter().map(|p| (linalg::norm(p) - 1.0).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-9);
    }

    #[test]
    fn so3_constant_direction_is_exponential() {
        let man: ManifoldRef = Arc::new(SpecialOrthogonal::so3());
        let a0 = [0.3, -0.5, 0.8];
        let grid = uniform_grid(0.0, 1.0, 64);
        let rp = Arc::new(lift_smooth(move |t: f64| linalg::scale(&a0, t), &grid, 8).unwrap());
        let sol = rde_solve_manifold(&RotationField::on_so3(man), rp, Mat64::identity(3).as_slice(), (0.0, 1.0), &Default::default()).unwrap();
        let oracle = linalg::hat3(&a0).scale(-1.0).expm();
        assert!(linalg::dist(sol.path.last(), oracle.as_slice()) < 1e-9);
    }

    #[test]
    fn reversed_atlas_gives_same_solution() {
        let man: ManifoldRef = Arc::new(Sphere::new());
        let y0 = vec![0.0, 0.0, 1.0];
        let rp = curved_driver(512, 3.0);
        let opts = ManifoldRdeOptions::default();
        let a = rde_solve_manifold(&ProjectionField::new(man.clone()), rp.clone(), &y0, (0.0, 3.0), &opts).unwrap();
        let rev = ManifoldRdeOptions { reverse_atlas: true, ..opts };
        let b = rde_solve_manifold(&ProjectionField::new(man), rp, &y0, (0.0, 3.0), &rev).unwrap();
        let d = a.path.points.iter().zip(&b.path.points).map(|(p, q)| linalg::dist(p, q)).fold(0.0, f64::max);
        assert!(d < 1e-5, "{d}");
        assert!(a.chart_switches.len() >= 2 || b.chart_switches.len() >= 2);
    }

    #[test]
    fn gauge_form_on_sphere() {
        let man: ManifoldRef = Arc::new(Sphere::new());
        let sol = rde_solve_manifold(&ProjectionField::new(man.clone()), curved_driver(256, 0.5), &[0.0, 0.6, 0.8], (0.0, 0.5), &Default::default())
            .unwrap();
        let field = ProjectionField::new(man);
        let g = ConnectionGauge::new(Arc::new(SphereLeviCivita::new()));
        let rep = check_rde_gauge_form(&sol.path, &field, &g, &[32, 16, 8, 4, 2]).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.split_gap.unwrap() < 1e-8, "{rep:?}");
        let chart = [Stereographic::north(), Stereographic::south()]
            .into_iter()
            .find(|c| sol.path.points.iter().all(|p| c.contains(p)))
            .unwrap();
        let crep = check_rde_chart_form(&sol.path, &field, &chart, &[32, 16, 8, 4, 2]).unwrap();
        assert!(crep.pass, "{crep:?}");
        let srep = check_rde_scalar_form(&sol.path, &field, &[&|m: &[f64]| m[0] * m[1], &|m: &[f64]| m[2]], &[32, 16, 8, 4, 2]).unwrap();
        assert!(srep.pass, "{srep:?}");
    }

    #[test]
    fn rotation_solution_pushes_to_sphere() {
        let so3: ManifoldRef = Arc::new(SpecialOrthogonal::so3());
        let s2: ManifoldRef = Arc::new(Sphere::new());
        let rp = curved_driver(1 << 10, 1.0);
        let opts = ManifoldRdeOptions::default();
        let sol = rde_solve_manifold(&RotationField::on_so3(so3.clone()), rp, Mat64::identity(3).as_slice(), (0.0, 1.0), &opts).unwrap();
        let f = SmoothMap::new("column3", s2.clone(), |g| vec![g[2], g[5], g[8]]);
        let rep = f_related_pushforward(&f, &RotationField::on_so3(so3.clone()), &RotationField::on_sphere(s2.clone()), &sol.path, &opts).unwrap();
        assert!(rep.diff_sup < 1e-6, "{}", rep.diff_sup);
        let bad = f_related_pushforward(&f, &RotationField::on_so3(so3), &ProjectionField::new(s2), &sol.path, &opts);
        assert!(matches!(bad, Err(Error::NotRelated { .. })));
        let g = ConnectionGauge::new(Arc::new(SonConnection::left(3)));
        assert!(crate::mcrp::verify_gauge_crp(&sol.path, &g, 0.25).unwrap().pass);
    }

    #[test]
    fn flat_integral_form_height() {
        let man: ManifoldRef = Arc::new(Sphere::new());
        let field = ProjectionField::new(man.clone());
        let g = ConnectionGauge::new(Arc::new(SphereLeviCivita::new()));
        let df = |_: &[f64]| Mat64::from_rows(&[vec![0.0, 0.0, 1.0]]);
        let mut gaps = Vec::new();
        for n in [1 << 9, 1 << 10, 1 << 11] {
            let sol = rde_solve_manifold(&field, curved_driver(n, 1.0), &[0.0, 0.6, 0.8], (0.0, 1.0), &Default::default()).unwrap();
            let rep = check_rde_integral_form(&sol.path, &field, &df, &g).unwrap();
            let inc = sol.path.last()[2] - sol.path.points[0][2];
            assert!((rep.lhs[0] - inc).abs() < 1e-5 && (rep.rhs[0] - inc).abs() < 1e-5, "{rep:?} {inc}");
            gaps.push(rep.diff_sup);
            assert!(tangency_residual(&field, &sol.path.points) < 1e-12);
        }
        // second-order decay of the gap between the two sums
        assert!(gaps[0] / gaps[1] > 3.0 && gaps[1] / gaps[2] > 3.0, "{gaps:?}");
    }

    #[test]
    fn atlas_gap_and_explosion() {
        let man: ManifoldRef = Arc::new(Euclidean::new(1));
        let field = ClosureField::new("cubic", man, 1, |y, w| vec![y[0] * y[0] * y[0] * w[0]]);
        let grid = uniform_grid(0.0, 1.0, 64);
        let rp = Arc::new(lift_smooth(|t: f64| vec![10.0 * t], &grid, 8).unwrap());
        let e = rde_solve_manifold(&field, rp, &[1.0], (0.0, 1.0), &Default::default()).unwrap_err();
        assert!(matches!(e, Error::Explosion { .. }), "{e:?}");
    }
}
