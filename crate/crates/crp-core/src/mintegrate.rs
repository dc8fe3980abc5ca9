//! Controlled one-forms along manifold paths and their gauge rough integrals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::gauge::log_differential;
use crate::geometry::{compatibility_tensor, fd, gauge_tensor, Bilinear, Chart, ChartGauge, Gauge, Manifold, Parallelism};
use crate::linalg::{self, Mat64};
use crate::mcrp::{crp_pushforward, ManifoldControlledPath, SmoothMap};
use crate::roughcore::controlled::{ratio, CrpReport, LevelConstants, STABILITY_STRIDES};
use crate::roughcore::{rough_integrate, ControlledPath};

/// A smooth `V`-valued one-form, `m ↦ α_m` as an `n × N` matrix on ambient vectors.
pub type OneForm<'a> = &'a dyn Fn(&[f64]) -> Mat64;

/// `(α_s, α_s†)` along a path, controlled against a named parallelism.
///
/// `alpha_dag[s][i]` is the `n × N` matrix of `v ↦ α_s†(e_i ⊗ v)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ControlledOneForm {
    pub times: Vec<f64>,
    pub alpha: Vec<Mat64>,
    pub alpha_dag: Vec<Vec<Mat64>>,
    pub parallelism: String,
}

impl ControlledOneForm {
    pub fn zero(y: &ManifoldControlledPath, out_dim: usize, parallelism: &str) -> Self {
        let n = y.manifold.ambient_dim();
        let k = y.driver.dim();
        ControlledOneForm {
            times: y.times.clone(),
            alpha: vec![Mat64::zeros(out_dim, n); y.len()],
            alpha_dag: vec![vec![Mat64::zeros(out_dim, n); k]; y.len()],
            parallelism: parallelism.into(),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.alpha[0].rows()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `α_s†(w ⊗ ·)` as an `n × N` matrix.
    pub fn dag_along(&self, s: usize, w: &[f64]) -> Mat64 {
        let mut out = Mat64::zeros(self.alpha[s].rows(), self.alpha[s].cols());
        for (wi, b) in w.iter().zip(&self.alpha_dag[s]) {
            if *wi != 0.0 {
                out.axpy(*wi, b);
            }
        }
        out
    }

    pub fn subsample(&self, stride: usize) -> Self {
        let idx: Vec<usize> = (0..self.times.len()).step_by(stride).collect();
        ControlledOneForm {
            times: idx.iter().map(|&i| self.times[i]).collect(),
            alpha: idx.iter().map(|&i| self.alpha[i].clone()).collect(),
            alpha_dag: idx.iter().map(|&i| self.alpha_dag[i].clone()).collect(),
            parallelism: self.parallelism.clone(),
        }
    }

    fn check(&self, y: &ManifoldControlledPath) -> Result<()> {
        if self.len() != y.len() {
            return Err(Error::GridMismatch(format!("one-form on {} nodes, path on {}", self.len(), y.len())));
        }
        let n = y.manifold.ambient_dim();
        let k = y.driver.dim();
        let q = self.out_dim();
        for s in 0..self.len() {
            if self.alpha[s].shape() != (q, n) || self.alpha_dag[s].len() != k || self.alpha_dag[s].iter().any(|b| b.shape() != (q, n)) {
                return Err(Error::ShapeError(format!("one-form at node {s} does not act on R^{n} with a {k}-dimensional driver")));
            }
        }
        Ok(())
    }
}

fn nan_mat(r: usize, c: usize) -> Mat64 {
    Mat64::from_fn(r, c, |_, _| f64::NAN)
}

/// `(α|_{T_{y_s}M}, ∇^U_{y_s† ·} α)` with `∇^U_v α = d/dε [α_{σ_ε} ∘ U(σ_ε, m)]`.
pub fn oneform_from_smooth(alpha: OneForm, y: &ManifoldControlledPath, u: &dyn Parallelism) -> Result<ControlledOneForm> {
    let man = y.manifold.as_ref();
    let k = y.driver.dim();
    let mut a = Vec::with_capacity(y.len());
    let mut dag = Vec::with_capacity(y.len());
    for (s, m) in y.points.iter().enumerate() {
        let am = alpha(m).matmul(&man.projector(m));
        let (q, n) = am.shape();
        let mut blocks = Vec::with_capacity(k);
        for i in 0..k {
            let v = y.gubinelli[s].col(i);
            let b = fd::directional_mat(man, m, &v, fd::NESTED_STEP, |sigma| match u.transport(sigma, m) {
                Ok(t) => alpha(sigma).matmul(&t),
                Err(_) => nan_mat(q, n),
            });
            if !b.is_finite() {
                return Err(Error::DomainError(format!("parallelism undefined near y(t) for t = {}", y.times[s])));
            }
            blocks.push(b);
        }
        a.push(am);
        dag.push(blocks);
    }
    Ok(ControlledOneForm { times: y.times.clone(), alpha: a, alpha_dag: dag, parallelism: u.parallelism_id() })
}

/// Ambient differential of `f` restricted to `T_m M`, as an `n × N` matrix.
pub fn differential(f: &dyn Fn(&[f64]) -> Vec<f64>, man: &dyn Manifold, m: &[f64]) -> Mat64 {
    fd::tangent_jacobian(man, m, fd::NESTED_STEP, f)
}

/// Def-style verifier for a controlled one-form against the parallelism `u`.
pub fn verify_oneform(a: &ControlledOneForm, y: &ManifoldControlledPath, u: &dyn Parallelism, delta: f64) -> Result<CrpReport> {
    a.check(y)?;
    if a.parallelism != u.parallelism_id() {
        return Err(Error::GaugeMismatch(format!("one-form controlled by {}, checked against {}", a.parallelism, u.parallelism_id())));
    }
    let steps = y.len() - 1;
    let mut levels = Vec::new();
    for &stride in STABILITY_STRIDES.iter().filter(|&&s| steps / s >= 2) {
        let (ys, as_) = (y.subsample(stride), a.subsample(stride));
        let mut c = oneform_constants(&as_, &ys, u, delta)?;
        c.stride = stride;
        levels.push(c);
    }
    Ok(CrpReport::from_levels(levels, delta))
}

fn oneform_constants(a: &ControlledOneForm, y: &ManifoldControlledPath, u: &dyn Parallelism, delta: f64) -> Result<LevelConstants> {
    let rp = y.driver.as_ref();
    let p = rp.p();
    let n = y.len();
    let (mut c2, mut c1, mut pairs) = (0.0f64, 0.0f64, 0usize);
    let mut failure = None;
    for s in 0..n - 1 {
        let limit = y.times[s] + delta * (1.0 + 1e-12);
        let last = y.times.partition_point(|&t| t <= limit).saturating_sub(1).max(s);
        rp.for_each_from(s, last, |t, x, _| {
            if failure.is_some() {
                return;
            }
            let ut = match u.transport(&y.points[t], &y.points[s]) {
                Ok(m) => m,
                Err(e) => {
                    failure = Some(e);
                    return;
                }
            };
            pairs += 1;
            let w = rp.omega(s, t);
            let rem = a.alpha[t].matmul(&ut).sub(&a.alpha[s]).sub(&a.dag_along(s, x)).norm();
            let der = a.alpha_dag[t]
                .iter()
                .zip(&a.alpha_dag[s])
                .map(|(bt, bs)| bt.matmul(&ut).sub(bs).norm().powi(2))
                .sum::<f64>()
                .sqrt();
            c2 = c2.max(ratio(rem, w, 2.0 / p));
            c1 = c1.max(ratio(der, w, 1.0 / p));
        });
        if let Some(e) = failure {
            return Err(e);
        }
    }
    Ok(LevelConstants { stride: 1, c_remainder: c2, c_derivative: c1, pairs })
}

fn gauge_tensors(y: &ManifoldControlledPath, gauge: &dyn Gauge) -> Result<Vec<Bilinear>> {
    y.points.iter().map(|m| gauge_tensor(gauge, m)).collect()
}

/// First component of the integrator increment, `ψ(y_s, y_t) + S^G(y_s†⊗² X_{s,t})`.
pub fn integrator_increment(y: &ManifoldControlledPath, gauge: &dyn Gauge, sg: &Bilinear, i: usize, j: usize) -> Result<Vec<f64>> {
    if !gauge.in_domain(&y.points[i], &y.points[j]) {
        return Err(Error::DomainError(format!(
            "step ({}, {}) outside the domain of {}",
            y.times[i],
            y.times[j],
            gauge.name()
        )));
    }
    let mut inc = gauge.psi(&y.points[i], &y.points[j])?;
    let (_, area) = y.driver.increment(i, j);
    let d = &y.gubinelli[i];
    let k = area.rows();
    for a in 0..k {
        for b in 0..k {
            let x = area[(a, b)];
            if x != 0.0 {
                inc = linalg::axpy(&inc, x, &sg.apply(&d.col(a), &d.col(b)));
            }
        }
    }
    Ok(inc)
}

/// `z̃_{s,t} = α_s(ψ(y_s,y_t) + S^G(y_s†⊗²X)) + α_s†((I⊗y_s†)X)`.
pub fn gauge_local_term(
    a: &ControlledOneForm,
    y: &ManifoldControlledPath,
    gauge: &dyn Gauge,
    sg: &Bilinear,
    i: usize,
    j: usize,
) -> Result<Vec<f64>> {
    let inc = integrator_increment(y, gauge, sg, i, j)?;
    let mut out = a.alpha[i].mul_vec(&inc);
    let (_, area) = y.driver.increment(i, j);
    let d = &y.gubinelli[i];
    let k = area.rows();
    for r in 0..k {
        for c in 0..k {
            let x = area[(r, c)];
            if x != 0.0 {
                out = linalg::axpy(&out, x, &a.alpha_dag[i][r].mul_vec(&d.col(c)));
            }
        }
    }
    Ok(out)
}

fn check_gauge(a: &ControlledOneForm, y: &ManifoldControlledPath, gauge: &dyn Gauge) -> Result<()> {
    a.check(y)?;
    if a.parallelism != gauge.parallelism_id() {
        return Err(Error::GaugeMismatch(format!(
            "one-form controlled by {} integrated with {}",
            a.parallelism,
            gauge.parallelism_id()
        )));
    }
    if y.manifold.ambient_dim() != gauge.manifold().ambient_dim() {
        return Err(Error::GaugeMismatch(format!("{} path with a gauge on {}", y.manifold.name(), gauge.manifold().name())));
    }
    Ok(())
}

/// `z = ∫⟨α, dy^G⟩` with `z_0 = 0` and `z† = α ∘ y†`.
pub fn gauge_integrate(a: &ControlledOneForm, y: &ManifoldControlledPath, gauge: &dyn Gauge) -> Result<ControlledPath<f64>> {
    check_gauge(a, y, gauge)?;
    let sg = gauge_tensors(y, gauge)?;
    let mut acc = vec![0.0; a.out_dim()];
    let mut values = Vec::with_capacity(y.len());
    values.push(acc.clone());
    for i in 0..y.len() - 1 {
        acc = linalg::add(&acc, &gauge_local_term(a, y, gauge, &sg[i], i, i + 1)?);
        values.push(acc.clone());
    }
    let gub = (0..y.len()).map(|s| a.alpha[s].matmul(&y.gubinelli[s])).collect();
    Ok(ControlledPath { times: y.times.clone(), values, gubinelli: gub })
}

/// Largest midpoint defect of the local terms over blocks of `2·m` steps.
pub fn gauge_additivity_defects(
    a: &ControlledOneForm,
    y: &ManifoldControlledPath,
    gauge: &dyn Gauge,
    half_widths: &[usize],
) -> Result<Vec<f64>> {
    check_gauge(a, y, gauge)?;
    let sg = gauge_tensors(y, gauge)?;
    let last = y.len() - 1;
    half_widths
        .iter()
        .map(|&m| {
            let mut worst = 0.0f64;
            let mut s = 0;
            while s + 2 * m <= last {
                let whole = gauge_local_term(a, y, gauge, &sg[s], s, s + 2 * m)?;
                let left = gauge_local_term(a, y, gauge, &sg[s], s, s + m)?;
                let right = gauge_local_term(a, y, gauge, &sg[s + m], s + m, s + 2 * m)?;
                worst = worst.max(linalg::norm(&linalg::sub(&whole, &linalg::add(&left, &right))));
                s += 2 * m;
            }
            Ok(worst)
        })
        .collect()
}

/// `(α_s, α_s† + α_s S^{Ũ,U}_{y_s}(y_s† ⊗ I))`, moving a one-form from `old` to `new`.
pub fn gauge_change(
    a: &ControlledOneForm,
    y: &ManifoldControlledPath,
    old: &dyn Parallelism,
    new: &dyn Parallelism,
) -> Result<ControlledOneForm> {
    a.check(y)?;
    if a.parallelism != old.parallelism_id() {
        return Err(Error::GaugeMismatch(format!("one-form controlled by {}, not {}", a.parallelism, old.parallelism_id())));
    }
    let man = y.manifold.as_ref();
    let mut out = a.clone();
    out.parallelism = new.parallelism_id();
    if new.parallelism_id() == old.parallelism_id() {
        return Ok(out);
    }
    for (s, m) in y.points.iter().enumerate() {
        let st = compatibility_tensor(man, m, new, old, fd::NESTED_STEP)?;
        for (i, block) in out.alpha_dag[s].iter_mut().enumerate() {
            let shift = a.alpha[s].matmul(&st.partial(&y.gubinelli[s].col(i)));
            *block = block.add(&shift);
        }
    }
    Ok(out)
}

/// `∫ α(dy)` for a smooth one-form: the lifted one-form integrated with `gauge`.
pub fn integrate_smooth_oneform(alpha: OneForm, y: &ManifoldControlledPath, gauge: &dyn Gauge) -> Result<ControlledPath<f64>> {
    let a = oneform_from_smooth(alpha, y, gauge)?;
    gauge_integrate(&a, y, gauge)
}

/// [`integrate_smooth_oneform`] with the gauge of a chart containing the whole path.
pub fn integrate_in_chart(alpha: OneForm, y: &ManifoldControlledPath, chart: std::sync::Arc<dyn Chart>) -> Result<ControlledPath<f64>> {
    if let Some(i) = y.points.iter().position(|p| !chart.contains(p)) {
        return Err(Error::ChartExit { t: y.times[i] });
    }
    let g = ChartGauge::new(y.manifold.clone(), chart);
    integrate_smooth_oneform(alpha, y, &g)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FtcReport {
    pub integral: Vec<f64>,
    pub increment: Vec<f64>,
    pub residual: f64,
    /// `max_s |df ∘ y_s† − z_s†|`.
    pub derivative_residual: f64,
}

/// Compares `∫ df(dy)` with `f(y_T) − f(y_0)` and `z†` with `df ∘ y†`.
pub fn fundamental_theorem(f: &dyn Fn(&[f64]) -> Vec<f64>, y: &ManifoldControlledPath, gauge: &dyn Gauge) -> Result<FtcReport> {
    let man = y.manifold.clone();
    let df = |m: &[f64]| differential(f, man.as_ref(), m);
    let z = integrate_smooth_oneform(&df, y, gauge)?;
    let increment = linalg::sub(&f(y.last()), &f(&y.points[0]));
    let integral = z.last().to_vec();
    let residual = linalg::dist(&integral, &increment);
    let derivative_residual = y
        .points
        .iter()
        .zip(&y.gubinelli)
        .zip(&z.gubinelli)
        .map(|((m, d), zd)| df(m).matmul(d).sub(zd).max_abs())
        .fold(0.0, f64::max);
    Ok(FtcReport { integral, increment, residual, derivative_residual })
}

/// Two computations of the same integral.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Comparison {
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Largest difference over the whole path.
    pub diff_sup: f64,
}

impl Comparison {
    pub fn of_paths(lhs: &ControlledPath<f64>, rhs: &ControlledPath<f64>) -> Self {
        let diff_sup = lhs.values.iter().zip(&rhs.values).map(|(a, b)| linalg::dist(a, b)).fold(0.0, f64::max);
        Comparison { lhs: lhs.last().to_vec(), rhs: rhs.last().to_vec(), diff_sup }
    }
}

/// `(f_s α_s, f_s† α_s + f_s α_s†)` for `f` over `Hom(V, Ṽ)` stored row-major.
pub fn product_oneform(f: &ControlledPath<f64>, a: &ControlledOneForm) -> Result<ControlledOneForm> {
    let n = a.out_dim();
    if !f.dim().is_multiple_of(n) || f.len() != a.len() {
        return Err(Error::ShapeError(format!("Hom-valued path of size {} cannot act on R^{n}", f.dim())));
    }
    let q = f.dim() / n;
    let mut out = a.clone();
    for s in 0..a.len() {
        let fs = Mat64::from_row_slice(q, n, &f.values[s]);
        out.alpha[s] = fs.matmul(&a.alpha[s]);
        out.alpha_dag[s] = a.alpha_dag[s]
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let fdag = Mat64::from_row_slice(q, n, &f.gubinelli[s].col(i));
                fdag.matmul(&a.alpha[s]).add(&fs.matmul(b))
            })
            .collect();
    }
    Ok(out)
}

/// `∫⟨f, d∫⟨α, dy^G⟩⟩` against `∫⟨fα, dy^G⟩`.
pub fn associativity_check(
    f: &ControlledPath<f64>,
    a: &ControlledOneForm,
    y: &ManifoldControlledPath,
    gauge: &dyn Gauge,
) -> Result<Comparison> {
    let z = gauge_integrate(a, y, gauge)?;
    let lhs = rough_integrate(f, &z, &y.driver)?;
    let rhs = gauge_integrate(&product_oneform(f, a)?, y, gauge)?;
    Ok(Comparison::of_paths(&lhs, &rhs))
}

/// `K_*(y) = (K(y), DK ∘ y†)` for `K: M → Hom(V, Ṽ)`.
pub fn smooth_hom_path(k: &dyn Fn(&[f64]) -> Mat64, y: &ManifoldControlledPath) -> ControlledPath<f64> {
    let man = y.manifold.as_ref();
    let mut values = Vec::with_capacity(y.len());
    let mut gub = Vec::with_capacity(y.len());
    for (m, d) in y.points.iter().zip(&y.gubinelli) {
        let km = k(m);
        let cols: Vec<Vec<f64>> = (0..d.cols())
            .map(|i| fd::directional_mat(man, m, &d.col(i), fd::NESTED_STEP, |s| k(s)).into_vec())
            .collect();
        values.push(km.into_vec());
        gub.push(Mat64::from_cols(&cols));
    }
    ControlledPath { times: y.times.clone(), values, gubinelli: gub }
}

/// The associativity check with `f = K_*(y)`.
pub fn associativity_check_smooth(
    k: &dyn Fn(&[f64]) -> Mat64,
    a: &ControlledOneForm,
    y: &ManifoldControlledPath,
    gauge: &dyn Gauge,
) -> Result<Comparison> {
    associativity_check(&smooth_hom_path(k, y), a, y, gauge)
}

/// `∫ f*α(dy)` against `∫ α(d(f_* y))`.
pub fn push_pull_check(
    f: &SmoothMap,
    alpha: OneForm,
    y: &ManifoldControlledPath,
    gauge: &dyn Gauge,
    target_gauge: &dyn Gauge,
) -> Result<Comparison> {
    let man = y.manifold.clone();
    let pulled = |m: &[f64]| alpha(&f.eval(m)).matmul(&f.pushforward_with_step(man.as_ref(), m, fd::NESTED_STEP));
    let lhs = integrate_smooth_oneform(&pulled, y, gauge)?;
    let fy = crp_pushforward(f, y)?;
    let rhs = integrate_smooth_oneform(alpha, &fy, target_gauge)?;
    Ok(Comparison::of_paths(&lhs, &rhs))
}

/// `max_s |y^G_{s,s+m} − y^{G̃}_{s,s+m} − S^{Ũ,U}(y_s†⊗² X)|` for each `m`.
pub fn increment_identity_defects(
    y: &ManifoldControlledPath,
    gauge: &dyn Gauge,
    other: &dyn Gauge,
    widths: &[usize],
) -> Result<Vec<f64>> {
    let man = y.manifold.as_ref();
    let sg = gauge_tensors(y, gauge)?;
    let sg_other = gauge_tensors(y, other)?;
    let cross: Vec<Bilinear> =
        y.points.iter().map(|m| compatibility_tensor(man, m, other, gauge, fd::NESTED_STEP)).collect::<Result<_>>()?;
    widths
        .iter()
        .map(|&w| {
            let mut worst = 0.0f64;
            for s in (0..y.len() - w).step_by(w) {
                let a = integrator_increment(y, gauge, &sg[s], s, s + w)?;
                let b = integrator_increment(y, other, &sg_other[s], s, s + w)?;
                let corr = integrator_increment_area_only(y, &cross[s], s, s + w);
                worst = worst.max(linalg::norm(&linalg::sub(&linalg::sub(&a, &b), &corr)));
            }
            Ok(worst)
        })
        .collect()
}

fn integrator_increment_area_only(y: &ManifoldControlledPath, s_tensor: &Bilinear, i: usize, j: usize) -> Vec<f64> {
    let (_, area) = y.driver.increment(i, j);
    let d = &y.gubinelli[i];
    let mut out = vec![0.0; s_tensor.out_dim()];
    for a in 0..area.rows() {
        for b in 0..area.cols() {
            if area[(a, b)] != 0.0 {
                out = linalg::axpy(&out, area[(a, b)], &s_tensor.apply(&d.col(a), &d.col(b)));
            }
        }
    }
    out
}

/// `max_s |S_{y_t}(Uv, Uw) − U S_{y_s}(v, w)|` with `U = U(y_t, y_s)`, `t = s + m`.
pub fn transport_commutation_defects(
    y: &ManifoldControlledPath,
    u_tilde: &dyn Parallelism,
    u: &dyn Parallelism,
    widths: &[usize],
) -> Result<Vec<f64>> {
    let man = y.manifold.as_ref();
    let tensors: Vec<Bilinear> =
        y.points.iter().map(|m| compatibility_tensor(man, m, u_tilde, u, fd::NESTED_STEP)).collect::<Result<_>>()?;
    widths
        .iter()
        .map(|&w| {
            let mut worst = 0.0f64;
            for s in (0..y.len() - w).step_by(w) {
                let t = s + w;
                let ut = u.transport(&y.points[t], &y.points[s])?;
                let b = &tensors[s].basis;
                for i in 0..b.cols() {
                    for j in 0..b.cols() {
                        let (v, x) = (b.col(i), b.col(j));
                        let lhs = tensors[t].apply(&ut.mul_vec(&v), &ut.mul_vec(&x));
                        let rhs = ut.mul_vec(&tensors[s].apply(&v, &x));
                        worst = worst.max(linalg::dist(&lhs, &rhs));
                    }
                }
            }
            Ok(worst)
        })
        .collect()
}

/// `max |ψ(y_t, y_u) − ψ(y_t, ·)_{*y_s}[ψ(y_s, y_u) − ψ(y_s, y_t)]|` over blocks `s, t = s+m, u = s+2m`.
pub fn log_additivity_defects(y: &ManifoldControlledPath, gauge: &dyn Gauge, half_widths: &[usize]) -> Result<Vec<f64>> {
    half_widths
        .iter()
        .map(|&m| {
            let mut worst = 0.0f64;
            let mut s = 0;
            while s + 2 * m < y.len() {
                let (ys, yt, yu) = (&y.points[s], &y.points[s + m], &y.points[s + 2 * m]);
                let push = log_differential(gauge, yt, ys, fd::FD_STEP)?;
                let inner = linalg::sub(&gauge.psi(ys, yu)?, &gauge.psi(ys, yt)?);
                let d = linalg::sub(&gauge.psi(yt, yu)?, &push.mul_vec(&inner));
                worst = worst.max(linalg::norm(&d));
                s += 2 * m;
            }
            Ok(worst)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::{ConnectionGauge, CustomGauge, Euclidean, LogParallelism, ManifoldRef, Sphere, SphereLeviCivita};
    use crate::mcrp::crp_from_projection;
    use crate::roughcore::{lift_smooth, uniform_grid, RoughPath};

    fn equator(n: usize, t1: f64) -> ManifoldControlledPath {
        let grid = uniform_grid(0.0, t1, n);
        let rp = Arc::new(lift_smooth(|t: f64| vec![t.cos(), t.sin(), 0.0], &grid, 8).unwrap());
        crp_from_projection(rp, Arc::new(Sphere::new())).unwrap()
    }

    fn flat(n: usize) -> (ManifoldControlledPath, Arc<RoughPath<f64>>) {
        let grid = uniform_grid(0.0, 1.0, n);
        let rp = Arc::new(lift_smooth(|t: f64| vec![t.sin(), (3.0 * t).cos()], &grid, 8).unwrap());
        let c = ControlledPath::from_driver(&rp);
        (ManifoldControlledPath::new(Arc::new(Euclidean::new(2)), c.values, c.gubinelli, rp.clone()).unwrap(), rp)
    }

    fn lc() -> ConnectionGauge {
        ConnectionGauge::new(Arc::new(SphereLeviCivita::new()))
    }

    #[test]
    fn flat_case_reduces_to_rough_integrate() {
        let (y, rp) = flat(64);
        let man = y.manifold.clone();
        let g = ChartGauge::from_atlas(man, 0);
        let alpha = |m: &[f64]| Mat64::from_rows(&[vec![m[1], m[0] * m[0]]]);
        let a = oneform_from_smooth(&alpha, &y, &g).unwrap();
        // the flat one-form as a controlled path over Hom(R², R)
        let flat_alpha = ControlledPath {
            times: y.times.clone(),
            values: a.alpha.iter().map(|m| m.clone().into_vec()).collect(),
            gubinelli: a
                .alpha_dag
                .iter()
                .map(|blocks| Mat64::from_cols(&blocks.iter().map(|b| b.clone().into_vec()).collect::<Vec<_>>()))
                .collect(),
        };
        let z1 = gauge_integrate(&a, &y, &g).unwrap();
        let z2 = rough_integrate(&flat_alpha, &y.ambient(), &rp).unwrap();
        assert!(Comparison::of_paths(&z1, &z2).diff_sup < 1e-13);
        // α† is the plain directional derivative
        let s = 10;
        let x = &y.points[s];
        for i in 0..2 {
            let v = y.gubinelli[s].col(i);
            assert!(linalg::dist(&a.alpha_dag[s][i].row(0), &[v[1], 2.0 * x[0] * v[0]]) < 1e-8);
        }
    }

    #[test]
    fn height_hessian_on_sphere() {
        let y = equator(32, 1.0);
        let g = lc();
        let df = |_: &[f64]| Mat64::from_rows(&[vec![0.0, 0.0, 1.0]]);
        let a = oneform_from_smooth(&df, &y, &g).unwrap();
        // ∇df(v, w) = −m₃ ⟨v, w⟩ for the height function
        for s in [0, 7, 31] {
            let m = &y.points[s];
            for i in 0..3 {
                let v = y.gubinelli[s].col(i);
                for w in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
                    let w = Sphere::new().project_tangent(m, &w);
                    let got = a.alpha_dag[s][i].mul_vec(&w)[0];
                    assert!((got - (-m[2] * linalg::dot(&v, &w))).abs() < 1e-6);
                }
            }
        }
        assert!(verify_oneform(&a, &y, &g, 0.5).unwrap().pass);
    }

    #[test]
    fn ftc_on_equator() {
        // third-order Taylor remainder of cos along the geodesic: Σ h³/6 sin t
        for t1 in [0.4, 2.0] {
            let y = equator(1024, t1);
            let rep = fundamental_theorem(&|m: &[f64]| vec![m[0]], &y, &lc()).unwrap();
            let h = t1 / 1024.0;
            let leading = h * h / 6.0 * (1.0 - t1.cos());
            assert!((rep.residual - leading).abs() < 0.02 * leading, "{rep:?} {leading}");
            assert!(rep.derivative_residual < 1e-12);
            if t1 < 0.5 {
                assert!(rep.residual < 1e-8);
            }
        }
    }

    #[test]
    fn zero_form_integrates_to_zero() {
        let y = equator(16, 1.0);
        let g = lc();
        let a = ControlledOneForm::zero(&y, 2, &g.parallelism_id());
        let z = gauge_integrate(&a, &y, &g).unwrap();
        assert!(z.values.iter().all(|v| v.iter().all(|x| *x == 0.0)));
    }

    #[test]
    fn mismatched_parallelism_is_rejected() {
        let y = equator(16, 1.0);
        let g = lc();
        let a = ControlledOneForm::zero(&y, 1, "chart:stereo-south");
        assert!(matches!(gauge_integrate(&a, &y, &g), Err(Error::GaugeMismatch(_))));
    }

    #[test]
    fn area_form_on_equator_loop() {
        let y = equator(1024, std::f64::consts::TAU);
        let alpha = |m: &[f64]| Mat64::from_rows(&[vec![-m[1], m[0], 0.0]]);
        let z = integrate_smooth_oneform(&alpha, &y, &lc()).unwrap();
        assert!((z.last()[0] - std::f64::consts::TAU).abs() < 1e-6, "{}", z.last()[0]);
    }

    #[test]
    fn quadratic_gauge_shift_on_the_line() {
        let c = 0.4;
        let grid = uniform_grid(0.0, 1.0, 32);
        let rp = Arc::new(lift_smooth(|t: f64| vec![t.sin()], &grid, 8).unwrap());
        let man: ManifoldRef = Arc::new(Euclidean::new(1));
        let cp = ControlledPath::from_driver(&rp);
        let y = ManifoldControlledPath::new(man.clone(), cp.values, cp.gubinelli, rp).unwrap();
        let quad = CustomGauge::new("quad", man.clone(), move |x, y| {
            let d = y[0] - x[0];
            Ok(vec![d + c * d * d])
        })
        .with_transport(|_, _| Ok(Mat64::identity(1)));
        let lp = LogParallelism::new(&quad);
        let alpha = |m: &[f64]| Mat64::from_rows(&[vec![1.0 + m[0]]]);
        let a = oneform_from_smooth(&alpha, &y, &quad).unwrap();
        let b = gauge_change(&a, &y, &quad, &lp).unwrap();
        for s in 0..y.len() {
            let shift = b.alpha_dag[s][0][(0, 0)] - a.alpha_dag[s][0][(0, 0)];
            let expected = -2.0 * c * a.alpha[s][(0, 0)] * y.gubinelli[s][(0, 0)];
            assert!((shift - expected).abs() < 1e-7, "{shift} {expected}");
        }
        let back = gauge_change(&b, &y, &lp, &quad).unwrap();
        for s in 0..y.len() {
            assert!(back.alpha_dag[s][0].sub(&a.alpha_dag[s][0]).max_abs() < 1e-8);
        }
    }

    #[test]
    fn identity_associativity_and_push_pull() {
        let y = equator(64, 1.0);
        let g = lc();
        let alpha = |m: &[f64]| Mat64::from_rows(&[vec![m[2], 1.0, m[0]]]);
        let a = oneform_from_smooth(&alpha, &y, &g).unwrap();
        let id = ControlledPath::constant(y.times.clone(), vec![1.0], 3);
        let rep = associativity_check(&id, &a, &y, &g).unwrap();
        assert!(rep.diff_sup < 1e-14);
        let f = SmoothMap::new("id", y.manifold.clone(), |x| x.to_vec());
        let pp = push_pull_check(&f, &alpha, &y, &g, &g).unwrap();
        assert!(pp.diff_sup < 1e-9, "{pp:?}");
    }

    #[test]
    fn log_additivity_decays() {
        let y = equator(256, 2.0);
        let d = log_additivity_defects(&y, &lc(), &[16, 8, 4, 2]).unwrap();
        assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
    }
}
