//! Manifold-valued controlled rough paths.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{fd, Chart, Gauge, Manifold, ManifoldRef};
use crate::linalg::{self, Mat64};
use crate::roughcore::controlled::{ratio, CrpReport, LevelConstants, STABILITY_STRIDES};
use crate::roughcore::{verify_crp, ControlledPath, RoughPath};

/// Tolerance for `P(y_i) y†_i = y†_i`.
pub const BASE_POINT_TOL: f64 = 1e-10;

/// Tolerance for the distance of sample points to the manifold.
pub const ON_MANIFOLD_TOL: f64 = 1e-10;

type Rp = RoughPath<f64>;

/// `(y, y†)` on an embedded manifold, with `y†(t_i) ∈ L(W, T_{y_i}M)` stored as `N × k`.
#[derive(Clone)]
pub struct ManifoldControlledPath {
    pub manifold: ManifoldRef,
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub gubinelli: Vec<Mat64>,
    pub driver: Arc<Rp>,
}

impl std::fmt::Debug for ManifoldControlledPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManifoldControlledPath")
            .field("manifold", &self.manifold.name())
            .field("nodes", &self.times.len())
            .finish()
    }
}

/// JSON layout of a controlled path.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrpRecord {
    #[serde(rename = "manifold-ref")]
    pub manifold_ref: String,
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub gubinelli: Vec<Mat64>,
    #[serde(rename = "driver-ref")]
    pub driver_ref: String,
}

impl ManifoldControlledPath {
    /// Checks lengths, that points lie on `M` and that `y†` is tangent.
    pub fn new(manifold: ManifoldRef, points: Vec<Vec<f64>>, gubinelli: Vec<Mat64>, driver: Arc<Rp>) -> Result<Self> {
        let times = driver.times().to_vec();
        if points.len() != times.len() || gubinelli.len() != times.len() {
            return Err(Error::GridMismatch(format!(
                "{} points and {} derivatives on {} nodes",
                points.len(),
                gubinelli.len(),
                times.len()
            )));
        }
        let n = manifold.ambient_dim();
        let k = driver.dim();
        for (i, (p, g)) in points.iter().zip(&gubinelli).enumerate() {
            if p.len() != n || g.shape() != (n, k) {
                return Err(Error::ShapeError(format!("node {i}: expected a point in R^{n} and a {n}x{k} derivative")));
            }
            let distance = manifold.distance_to(p);
            if !(distance <= ON_MANIFOLD_TOL) || !manifold.in_domain(p) {
                return Err(Error::NotOnManifold { index: i, t: times[i], distance });
            }
        }
        let y = ManifoldControlledPath { manifold, times, points, gubinelli, driver };
        let res = y.base_point_residual();
        if !(res <= BASE_POINT_TOL) {
            return Err(Error::ShapeError(format!("Gubinelli derivative leaves the tangent space (residual {res:e})")));
        }
        Ok(y)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &[f64] {
        &self.points[self.points.len() - 1]
    }

    /// `max_i |P(y_i) y†_i − y†_i|`.
    pub fn base_point_residual(&self) -> f64 {
        self.points
            .iter()
            .zip(&self.gubinelli)
            .map(|(p, g)| self.manifold.projector(p).matmul(g).sub(g).max_abs())
            .fold(0.0, f64::max)
    }

    pub fn subsample(&self, stride: usize) -> Self {
        let idx: Vec<usize> = (0..self.times.len()).step_by(stride).collect();
        ManifoldControlledPath {
            manifold: self.manifold.clone(),
            times: idx.iter().map(|&i| self.times[i]).collect(),
            points: idx.iter().map(|&i| self.points[i].clone()).collect(),
            gubinelli: idx.iter().map(|&i| self.gubinelli[i].clone()).collect(),
            driver: Arc::new(self.driver.subsample(stride)),
        }
    }

    pub fn restrict(&self, i0: usize, i1: usize) -> Self {
        ManifoldControlledPath {
            manifold: self.manifold.clone(),
            times: self.times[i0..=i1].to_vec(),
            points: self.points[i0..=i1].to_vec(),
            gubinelli: self.gubinelli[i0..=i1].to_vec(),
            driver: Arc::new(self.driver.restrict(i0, i1)),
        }
    }

    /// The flat controlled path `(y, y†)` in ambient coordinates.
    pub fn ambient(&self) -> ControlledPath<f64> {
        ControlledPath { times: self.times.clone(), values: self.points.clone(), gubinelli: self.gubinelli.clone() }
    }

    pub fn record(&self, driver_ref: &str) -> CrpRecord {
        CrpRecord {
            manifold_ref: self.manifold.name(),
            times: self.times.clone(),
            points: self.points.clone(),
            gubinelli: self.gubinelli.clone(),
            driver_ref: driver_ref.into(),
        }
    }

    /// Largest step length divided by step duration.
    pub fn speed(&self) -> f64 {
        self.points
            .windows(2)
            .zip(self.times.windows(2))
            .map(|(p, t)| linalg::dist(&p[0], &p[1]) / (t[1] - t[0]))
            .fold(0.0, f64::max)
    }
}

/// A quarter of `radius` divided by the path's speed.
pub fn default_delta(y: &ManifoldControlledPath, radius: f64) -> f64 {
    let v = y.speed();
    if v > 0.0 {
        0.25 * radius / v
    } else {
        f64::INFINITY
    }
}

fn last_within(times: &[f64], i: usize, delta: f64) -> usize {
    let limit = times[i] + delta * (1.0 + 1e-12);
    times.partition_point(|&t| t <= limit).saturating_sub(1).max(i)
}

/// Constants of the gauge inequalities at one mesh.
pub fn gauge_constants(y: &ManifoldControlledPath, gauge: &dyn Gauge, delta: f64) -> Result<LevelConstants> {
    let rp = y.driver.as_ref();
    let p = rp.p();
    let n = y.len();
    let mut c2 = 0.0f64;
    let mut c1 = 0.0f64;
    let mut pairs = 0usize;
    let mut failure = None;
    for i in 0..n.saturating_sub(1) {
        let last = last_within(&y.times, i, delta);
        let (yi, di) = (&y.points[i], &y.gubinelli[i]);
        rp.for_each_from(i, last, |j, x, _| {
            if failure.is_some() {
                return;
            }
            let yj = &y.points[j];
            if !gauge.in_domain(yi, yj) {
                failure = Some(Error::DomainError(format!(
                    "pair ({}, {}) outside the domain of {}",
                    y.times[i],
                    y.times[j],
                    gauge.name()
                )));
                return;
            }
            let r = gauge.psi(yi, yj).and_then(|psi| Ok((psi, gauge.transport(yi, yj)?)));
            let (psi, u) = match r {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e);
                    return;
                }
            };
            pairs += 1;
            let w = rp.omega(i, j);
            let rem = linalg::norm(&linalg::sub(&psi, &di.mul_vec(x)));
            let der = u.matmul(&y.gubinelli[j]).sub(di).norm();
            c2 = c2.max(ratio(rem, w, 2.0 / p));
            c1 = c1.max(ratio(der, w, 1.0 / p));
        });
        if let Some(e) = failure {
            return Err(e);
        }
    }
    Ok(LevelConstants { stride: 1, c_remainder: c2, c_derivative: c1, pairs })
}

/// Gauge verifier over pairs with `t − s ≤ delta`, refinement stability on
/// strides 8, 4, 2, 1.
pub fn verify_gauge_crp(y: &ManifoldControlledPath, gauge: &dyn Gauge, delta: f64) -> Result<CrpReport> {
    let steps = y.len() - 1;
    let mut levels = Vec::new();
    for &s in STABILITY_STRIDES.iter().filter(|&&s| steps / s >= 2) {
        let coarse = if s == 1 { y.clone() } else { y.subsample(s) };
        let mut c = gauge_constants(&coarse, gauge, delta)?;
        c.stride = s;
        levels.push(c);
    }
    Ok(CrpReport::from_levels(levels, delta))
}

/// `(φ(y), dφ ∘ y†)` on the nodes `i0..=i1`.
pub fn chart_coordinates(y: &ManifoldControlledPath, chart: &dyn Chart, i0: usize, i1: usize) -> Result<ControlledPath<f64>> {
    let mut values = Vec::with_capacity(i1 - i0 + 1);
    let mut gub = Vec::with_capacity(i1 - i0 + 1);
    for i in i0..=i1 {
        if !chart.contains(&y.points[i]) {
            return Err(Error::ChartExit { t: y.times[i] });
        }
        values.push(chart.forward(&y.points[i]));
        gub.push(chart.differential(&y.points[i]).matmul(&y.gubinelli[i]));
    }
    ControlledPath::new(y.times[i0..=i1].to_vec(), values, gub)
}

/// Chart verifier on `[a, b]`: the flat verifier applied to `(φ(y), dφ ∘ y†)`.
pub fn verify_chart_crp(y: &ManifoldControlledPath, chart: &dyn Chart, a: f64, b: f64) -> Result<CrpReport> {
    let i0 = y.driver.index_of(a)?;
    let i1 = y.driver.index_of(b)?;
    let u = chart_coordinates(y, chart, i0, i1)?;
    verify_crp(&u, &y.driver.restrict(i0, i1))
}

/// `(x, P(x))` for a driver that lives on the manifold.
pub fn crp_from_projection(rp: Arc<Rp>, manifold: ManifoldRef) -> Result<ManifoldControlledPath> {
    if rp.dim() != manifold.ambient_dim() {
        return Err(Error::ShapeError(format!("driver in R^{} for a manifold in R^{}", rp.dim(), manifold.ambient_dim())));
    }
    for (i, x) in rp.values().iter().enumerate() {
        let distance = manifold.distance_to(x);
        if !(distance <= ON_MANIFOLD_TOL) {
            return Err(Error::NotOnManifold { index: i, t: rp.times()[i], distance });
        }
    }
    let points = rp.values().to_vec();
    let gub = points.iter().map(|x| manifold.projector(x)).collect();
    ManifoldControlledPath::new(manifold, points, gub, rp)
}

type MapFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type DiffFn = dyn Fn(&[f64]) -> Mat64 + Send + Sync;

/// A smooth map between embedded manifolds, given on ambient coordinates.
#[derive(Clone)]
pub struct SmoothMap {
    pub name: String,
    pub target: ManifoldRef,
    f: Arc<MapFn>,
    df: Option<Arc<DiffFn>>,
}

impl SmoothMap {
    pub fn new(name: &str, target: ManifoldRef, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        SmoothMap { name: name.into(), target, f: Arc::new(f), df: None }
    }

    /// Closed-form ambient differential, restricted to the source tangent space by the caller.
    pub fn with_differential(mut self, df: impl Fn(&[f64]) -> Mat64 + Send + Sync + 'static) -> Self {
        self.df = Some(Arc::new(df));
        self
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }

    /// `f_*` at `m ∈ M` as an `Ñ × N` matrix vanishing on the normal space.
    pub fn pushforward(&self, source: &dyn Manifold, m: &[f64]) -> Mat64 {
        self.pushforward_with_step(source, m, fd::FD_STEP)
    }

    pub fn pushforward_with_step(&self, source: &dyn Manifold, m: &[f64], h: f64) -> Mat64 {
        match &self.df {
            Some(df) => df(m).matmul(&source.projector(m)),
            None => fd::tangent_jacobian(source, m, h, |x| self.eval(x)),
        }
    }

    /// `g ∘ f`.
    pub fn then(&self, g: &SmoothMap) -> SmoothMap {
        let (f1, f2) = (self.f.clone(), g.f.clone());
        SmoothMap { name: format!("{}.{}", g.name, self.name), target: g.target.clone(), f: Arc::new(move |x| f2(&f1(x))), df: None }
    }
}

/// `(f(y), f_* ∘ y†)`.
pub fn crp_pushforward(f: &SmoothMap, y: &ManifoldControlledPath) -> Result<ManifoldControlledPath> {
    let target = f.target.clone();
    let mut points = Vec::with_capacity(y.len());
    let mut gub = Vec::with_capacity(y.len());
    for (i, (p, g)) in y.points.iter().zip(&y.gubinelli).enumerate() {
        let q = f.eval(p);
        if !target.in_domain(&q) || !(target.distance_to(&q) <= 1e-8) {
            return Err(Error::DomainError(format!("{} leaves {} at t = {}", f.name, target.name(), y.times[i])));
        }
        let q = target.retract(&q);
        let d = target.projector(&q).matmul(&f.pushforward(y.manifold.as_ref(), p)).matmul(g);
        points.push(q);
        gub.push(d);
    }
    ManifoldControlledPath::new(target, points, gub, y.driver.clone())
}

/// `(f(y), df ∘ y†)` for a scalar function.
pub fn scalar_pushforward(f: &dyn Fn(&[f64]) -> f64, y: &ManifoldControlledPath) -> ControlledPath<f64> {
    let man = y.manifold.as_ref();
    let mut values = Vec::with_capacity(y.len());
    let mut gub = Vec::with_capacity(y.len());
    for (p, g) in y.points.iter().zip(&y.gubinelli) {
        values.push(vec![f(p)]);
        let df = fd::tangent_jacobian(man, p, fd::FD_STEP, |x| vec![f(x)]);
        gub.push(df.matmul(g));
    }
    ControlledPath { times: y.times.clone(), values, gubinelli: gub }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalarSuiteReport {
    pub entries: Vec<(String, CrpReport)>,
    #[serde(rename = "C2")]
    pub c_remainder: f64,
    #[serde(rename = "C1")]
    pub c_derivative: f64,
    pub pass: bool,
}

/// Flat verification of `f_* y` for every test function.
pub fn scalar_test_suite(y: &ManifoldControlledPath, fs: &[(&str, &dyn Fn(&[f64]) -> f64)]) -> Result<ScalarSuiteReport> {
    let mut entries = Vec::with_capacity(fs.len());
    for (name, f) in fs {
        let z = scalar_pushforward(*f, y);
        entries.push((name.to_string(), verify_crp(&z, &y.driver)?));
    }
    let c_remainder = entries.iter().map(|(_, r)| r.c_remainder).fold(0.0, f64::max);
    let c_derivative = entries.iter().map(|(_, r)| r.c_derivative).fold(0.0, f64::max);
    let pass = entries.iter().all(|(_, r)| r.pass);
    Ok(ScalarSuiteReport { entries, c_remainder, c_derivative, pass })
}

/// Largest ratio between the constants of two reports, in either direction.
pub fn covariance_factor(a: &CrpReport, b: &CrpReport) -> f64 {
    let f = |x: f64, y: f64| {
        if x == 0.0 && y == 0.0 {
            1.0
        } else {
            (x / y).max(y / x)
        }
    };
    f(a.c_remainder, b.c_remainder).max(f(a.c_derivative, b.c_derivative))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ChartGauge, ConnectionGauge, Euclidean, IdentityChart, Sphere, SphereLeviCivita};
    use crate::roughcore::{lift_smooth, uniform_grid};

    fn equator(n: usize, t1: f64) -> Arc<Rp> {
        let grid = uniform_grid(0.0, t1, n);
        Arc::new(lift_smooth(|t: f64| vec![t.cos(), t.sin(), 0.0], &grid, 8).unwrap())
    }

    #[test]
    fn projection_gubinelli_is_projector() {
        let rp = equator(64, std::f64::consts::TAU);
        let y = crp_from_projection(rp, Arc::new(Sphere::new())).unwrap();
        for (p, g) in y.points.iter().zip(&y.gubinelli) {
            let oracle = Mat64::identity(3).sub(&Mat64::outer(p, p));
            assert!(g.sub(&oracle).max_abs() < 1e-15);
        }
        assert!(y.base_point_residual() < 1e-15);
    }

    #[test]
    fn off_manifold_sample_is_rejected() {
        let grid = uniform_grid(0.0, 1.0, 8);
        let rp = Arc::new(lift_smooth(|t: f64| vec![1.0 + t, 0.0, 0.0], &grid, 8).unwrap());
        let e = crp_from_projection(rp, Arc::new(Sphere::new())).unwrap_err();
        assert!(matches!(e, Error::NotOnManifold { index: 1, .. }));
    }

    #[test]
    fn constant_path_has_zero_gauge_constants() {
        let grid = uniform_grid(0.0, 1.0, 16);
        let rp = Arc::new(lift_smooth(|t: f64| vec![t, t * t], &grid, 8).unwrap());
        let m = vec![0.0, 0.6, 0.8];
        let y = ManifoldControlledPath::new(Arc::new(Sphere::new()), vec![m; 17], vec![Mat64::zeros(3, 2); 17], rp).unwrap();
        let g = ConnectionGauge::new(Arc::new(SphereLeviCivita::new()));
        let rep = verify_gauge_crp(&y, &g, f64::INFINITY).unwrap();
        assert_eq!((rep.c_remainder, rep.c_derivative), (0.0, 0.0));
        assert!(rep.pass);
    }

    #[test]
    fn equator_passes_both_verifiers() {
        let rp = equator(256, 2.0);
        let man: ManifoldRef = Arc::new(Sphere::new());
        let y = crp_from_projection(rp, man.clone()).unwrap();
        let g = ConnectionGauge::new(Arc::new(SphereLeviCivita::new()));
        let rep = verify_gauge_crp(&y, &g, 1.0).unwrap();
        assert!(rep.pass, "{rep:?}");
        let chart = man.atlas()[1].clone();
        let crep = verify_chart_crp(&y, chart.as_ref(), 0.0, 2.0).unwrap();
        assert!(crep.pass, "{crep:?}");
        let cg = ChartGauge::from_atlas(man, 1);
        let grep = verify_gauge_crp(&y, &cg, 1.0).unwrap();
        assert!(grep.pass);
        assert!(covariance_factor(&rep, &grep) < 1e3);
    }

    #[test]
    fn flat_chart_verifier_is_flat_verifier() {
        let grid = uniform_grid(0.0, 1.0, 32);
        let rp = Arc::new(lift_smooth(|t: f64| vec![t.sin(), (2.0 * t).cos()], &grid, 8).unwrap());
        let flat = ControlledPath::from_driver(&rp);
        let y = ManifoldControlledPath::new(Arc::new(Euclidean::new(2)), flat.values.clone(), flat.gubinelli.clone(), rp.clone())
            .unwrap();
        let a = verify_chart_crp(&y, &IdentityChart::new(2), 0.0, 1.0).unwrap();
        let b = verify_crp(&flat, &rp).unwrap();
        assert!((a.c_remainder - b.c_remainder).abs() <= 1e-12);
        assert!((a.c_derivative - b.c_derivative).abs() <= 1e-12);
    }

    #[test]
    fn chart_exit_is_reported() {
        let rp = equator(32, 2.0);
        let man: ManifoldRef = Arc::new(Sphere::new());
        let y = crp_from_projection(rp, man).unwrap();
        let far = crate::geometry::Stereographic::north();
        let pole = ManifoldControlledPath::new(
            y.manifold.clone(),
            vec![vec![0.0, 0.0, 1.0]; y.len()],
            vec![Mat64::zeros(3, 3); y.len()],
            y.driver.clone(),
        )
        .unwrap();
        assert!(matches!(verify_chart_crp(&pole, &far, 0.0, 2.0), Err(Error::ChartExit { .. })));
    }

    #[test]
    fn normalisation_pushforward_and_covariance() {
        let grid = uniform_grid(0.0, 1.0, 64);
        let rp = Arc::new(lift_smooth(|t: f64| vec![1.0 + t, t * t, 0.5 - t], &grid, 8).unwrap());
        let flat = ControlledPath::from_driver(&rp);
        let y = ManifoldControlledPath::new(Arc::new(Euclidean::new(3)), flat.values, flat.gubinelli, rp).unwrap();
        let sphere: ManifoldRef = Arc::new(Sphere::new());
        let f = SmoothMap::new("normalise", sphere.clone(), |x| linalg::scale(x, 1.0 / linalg::norm(x)));
        let z = crp_pushforward(&f, &y).unwrap();
        let g = ConnectionGauge::new(Arc::new(SphereLeviCivita::new()));
        assert!(verify_gauge_crp(&z, &g, 0.5).unwrap().pass);
        // (g∘f)_* = g_* ∘ f_*
        let rot = SmoothMap::new("rotate", sphere, |x| vec![x[1], -x[0], x[2]])
            .with_differential(|_| Mat64::from_rows(&[vec![0.0, 1.0, 0.0], vec![-1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]));
        let two_step = crp_pushforward(&rot, &z).unwrap();
        let composed = crp_pushforward(&f.then(&rot), &y).unwrap();
        for (a, b) in two_step.gubinelli.iter().zip(&composed.gubinelli) {
            assert!(a.sub(b).max_abs() < 1e-9);
        }
    }

    #[test]
    fn height_on_equator_is_constant() {
        let rp = equator(64, 3.0);
        let y = crp_from_projection(rp, Arc::new(Sphere::new())).unwrap();
        let z = scalar_pushforward(&|m: &[f64]| m[2], &y);
        for (v, g) in z.values.iter().zip(&z.gubinelli) {
            assert_eq!(v[0], 0.0);
            assert!(linalg::dist(&g.row(0), &[0.0, 0.0, 1.0]) < 1e-9);
        }
        let fs: [(&str, &dyn Fn(&[f64]) -> f64); 3] =
            [("x1", &|m: &[f64]| m[0]), ("exp", &|m: &[f64]| m[0].exp()), ("one", &|_: &[f64]| 1.0)];
        let rep = scalar_test_suite(&y, &fs).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.entries[2].1.c_remainder, 0.0);
    }
}
