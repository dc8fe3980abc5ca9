//! Deterministic paths, drivers and solutions shared by the suites and the CLI.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crp_core::geometry::{
    lie, ChartGauge, ChartRef, ConnectionGauge, Euclidean, Gauge, ManifoldRef, SonConnection, SpecialOrthogonal, Sphere,
    SphereLeviCivita,
};
use crp_core::linalg::{self, Mat64};
use crp_core::mcrp::{crp_from_projection, crp_pushforward, ManifoldControlledPath, SmoothMap};
use crp_core::mrde::{rde_solve_manifold, ClosureField, ManifoldField, ManifoldRdeOptions, ProjectionField, RotationField};
use crp_core::roughcore::{lift_smooth, pure_area_driver, uniform_grid, Control, ControlledPath, LinearField, RoughPath};
use crp_core::transport::{roll, transport_options, FrameBundle};
use crp_core::{Error, Result};

pub type Rp = RoughPath<f64>;

pub fn sphere() -> ManifoldRef {
    Arc::new(Sphere::new())
}

pub fn so3() -> ManifoldRef {
    Arc::new(SpecialOrthogonal::so3())
}

pub fn plane(d: usize) -> ManifoldRef {
    Arc::new(Euclidean::new(d))
}

pub fn levi_civita() -> Arc<dyn Gauge> {
    Arc::new(ConnectionGauge::new(Arc::new(SphereLeviCivita::new())))
}

pub fn left_so3() -> Arc<dyn Gauge> {
    Arc::new(ConnectionGauge::new(Arc::new(SonConnection::left(3))))
}

pub fn identity_gauge(d: usize) -> Arc<dyn Gauge> {
    Arc::new(ChartGauge::from_atlas(plane(d), 0))
}

/// First atlas chart containing every point of `y`.
pub fn containing_chart(y: &ManifoldControlledPath) -> Result<ChartRef> {
    y.manifold
        .atlas()
        .iter()
        .find(|c| y.points.iter().all(|p| c.contains(p)))
        .cloned()
        .ok_or_else(|| Error::ChartExit { t: y.times[y.len() - 1] })
}

pub fn chart_gauge(y: &ManifoldControlledPath) -> Result<Arc<dyn Gauge>> {
    Ok(Arc::new(ChartGauge::new(y.manifold.clone(), containing_chart(y)?)))
}

fn lift(f: impl Fn(f64) -> Vec<f64>, t1: f64, n: usize) -> Result<Arc<Rp>> {
    Ok(Arc::new(lift_smooth(f, &uniform_grid(0.0, t1, n), 8)?))
}

/// `x(t) = (sin 2t, t² − t, cos 3t − 1)`.
pub fn curved_driver(n: usize, t1: f64) -> Result<Arc<Rp>> {
    lift(|t| vec![(2.0 * t).sin(), t * t - t, (3.0 * t).cos() - 1.0], t1, n)
}

pub fn curved_velocity(t: f64) -> Vec<f64> {
    vec![2.0 * (2.0 * t).cos(), 2.0 * t - 1.0, -3.0 * (3.0 * t).sin()]
}

/// `x(t) = t·s·e_1` in `R³`.
pub fn line_driver(n: usize, s: f64) -> Result<Arc<Rp>> {
    lift(move |t| vec![s * t, 0.0, 0.0], 1.0, n)
}

pub fn pure_area(n: usize, a: f64) -> Result<Arc<Rp>> {
    Ok(Arc::new(pure_area_driver(a, &uniform_grid(0.0, 1.0, n))?))
}

/// Smooth curve in the northern cap of `S²`, `t ∈ [0, 2]`.
pub fn sphere_curve(n: usize) -> Result<ManifoldControlledPath> {
    let rp = lift(
        |t| {
            let v = [0.6 * (1.3 * t).sin() + 0.1, 0.5 * (0.7 * t).cos() - 0.2, 1.0];
            linalg::scale(&v, 1.0 / linalg::norm(&v))
        },
        2.0,
        n,
    )?;
    crp_from_projection(rp, sphere())
}

/// Full small circle of angular radius `theta` around the pole, tilted by `tilt` about `e_1`.
pub fn polar_loop(n: usize, theta: f64, tilt: f64) -> Result<ManifoldControlledPath> {
    let r = lie::axis_rotation(0, tilt);
    let rp = lift(move |t| r.mul_vec(&[theta.sin() * t.cos(), theta.sin() * t.sin(), theta.cos()]), 2.0 * PI, n)?;
    crp_from_projection(rp, sphere())
}

/// Unit-speed equator on `[0, t1]`.
pub fn equator(n: usize, t1: f64) -> Result<ManifoldControlledPath> {
    crp_from_projection(lift(|t| vec![t.cos(), t.sin(), 0.0], t1, n)?, sphere())
}

/// Unit-speed great circle through `e_1`, tilted by `tilt` out of the equator.
pub fn great_circle(n: usize, tilt: f64, t1: f64) -> Result<ManifoldControlledPath> {
    crp_from_projection(lift(move |t| vec![t.cos(), t.sin() * tilt.cos(), t.sin() * tilt.sin()], t1, n)?, sphere())
}

/// Latitude at polar angle `theta` driven by the clock `x(t) = t`.
pub fn clock_latitude(n: usize, theta: f64, t1: f64) -> Result<ManifoldControlledPath> {
    let x = crp_from_projection(lift(|t| vec![t], t1, n)?, plane(1))?;
    let f = SmoothMap::new("latitude", sphere(), move |t| vec![theta.sin() * t[0].cos(), theta.sin() * t[0].sin(), theta.cos()]);
    crp_pushforward(&f, &x)
}

pub const SPHERE_Y0: [f64; 3] = [0.0, 0.6, 0.8];

/// Projection-field RDE on `S²` driven by [`curved_driver`] on `[0, t1]`.
pub fn projection_rde(n: usize, t1: f64) -> Result<ManifoldControlledPath> {
    let field = ProjectionField::new(sphere());
    Ok(rde_solve_manifold(&field, curved_driver(n, t1)?, &SPHERE_Y0, (0.0, t1), &ManifoldRdeOptions::default())?.path)
}

/// Rotation-field RDE on `SO(3)` from the identity.
pub fn rotation_rde(n: usize, t1: f64) -> Result<ManifoldControlledPath> {
    let field = RotationField::on_so3(so3());
    let g0 = Mat64::identity(3);
    Ok(rde_solve_manifold(&field, curved_driver(n, t1)?, g0.as_slice(), (0.0, t1), &ManifoldRdeOptions::default())?.path)
}

/// `−a × m` on `S²`.
pub fn sphere_rotation_rde(n: usize, t1: f64) -> Result<ManifoldControlledPath> {
    let field = RotationField::on_sphere(sphere());
    Ok(rde_solve_manifold(&field, curved_driver(n, t1)?, &SPHERE_Y0, (0.0, t1), &ManifoldRdeOptions::default())?.path)
}

/// `F_w(y) = (w_1 E_21 + w_2 E_12) y`; under the unit pure-area driver `y_1 = e^t y_1(0)`, `y_2 = e^{−t} y_2(0)`.
pub fn commutator_field() -> LinearField<f64> {
    LinearField { mats: vec![Mat64::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]), Mat64::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]])] }
}

pub fn commutator_manifold_field() -> ClosureField {
    ClosureField::new("commutator", plane(2), 2, |y, w| vec![w[1] * y[1], w[0] * y[0]])
}

/// Pure-area flat RDE from `(1, 1)` as a controlled path on `R²` (`p = 2`).
pub fn pure_area_rde(n: usize) -> Result<ManifoldControlledPath> {
    let field = commutator_manifold_field();
    Ok(rde_solve_manifold(&field, pure_area(n, 1.0)?, &[1.0, 1.0], (0.0, 1.0), &ManifoldRdeOptions::default())?.path)
}

pub const ROLL_Y0: [f64; 3] = [0.0, 0.6, 0.8];

/// [`area_driver`] rolled onto `S²` (`p = 2`).
pub fn rolled_area(n: usize, a: f64) -> Result<ManifoldControlledPath> {
    let rp = area_driver(n, a)?;
    let z = ControlledPath::from_driver(&rp);
    roll(&z, rp, &FrameBundle::sphere(), &ROLL_Y0, &Mat64::identity(2), &transport_options())?.base()
}

/// `y†` doubled, so the first-order expansion is wrong.
pub fn bad_dagger(y: &ManifoldControlledPath) -> Result<ManifoldControlledPath> {
    let gub = y.gubinelli.iter().map(|g| g.scale(2.0)).collect();
    ManifoldControlledPath::new(y.manifold.clone(), y.points.clone(), gub, y.driver.clone())
}

/// A moving path on `R²` paired with the derivative of a different path.
pub fn mismatched_plane(n: usize) -> Result<ManifoldControlledPath> {
    let rp = lift(|t| vec![t.sin(), t * t], 1.0, n)?;
    let points = rp.values().iter().map(|x| vec![x[0] + x[1], x[0] * x[1]]).collect();
    let gub = vec![Mat64::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]); rp.times().len()];
    ManifoldControlledPath::new(plane(2), points, gub, rp)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Example67Variant {
    /// `x_s = (s − 1)^{1/p}` on `[1, 2]`.
    Shifted,
    /// `x_s = s^{1/p} − 1` on `[1, 2]`.
    Literal,
}

/// Steps per unit time for the Example 6.7 grid; `1 + 0.01` is a node.
pub const EX67_STEPS_PER_UNIT: usize = 100;

/// The piecewise path on `[0, 2]` that is flat until `s = 1`, with control `ω(s,t) = t − (s ∨ 1)`.
pub fn example_6_7(p: f64, variant: Example67Variant) -> Result<ManifoldControlledPath> {
    let n = 2 * EX67_STEPS_PER_UNIT;
    let times = uniform_grid(0.0, 2.0, n);
    let x = |s: f64| -> f64 {
        if s <= 1.0 {
            0.0
        } else {
            match variant {
                Example67Variant::Shifted => (s - 1.0).powf(1.0 / p),
                Example67Variant::Literal => s.powf(1.0 / p) - 1.0,
            }
        }
    };
    let values: Vec<Vec<f64>> = times.iter().map(|&s| vec![x(s)]).collect();
    let areas = values
        .windows(2)
        .map(|w| {
            let d = w[1][0] - w[0][0];
            Mat64::from_rows(&[vec![0.5 * d * d]])
        })
        .collect();
    let clock = times.iter().map(|&t| t.max(1.0)).collect();
    let rp = Arc::new(RoughPath::from_parts(times.clone(), values.clone(), areas, Control::clock(clock, p))?);
    let gub = times.iter().map(|&s| Mat64::from_rows(&[vec![if s <= 0.5 { 2.0 - 2.0 * s } else { 1.0 }]])).collect();
    ManifoldControlledPath::new(plane(1), values, gub, rp)
}

/// Grid index of `t` on the Example 6.7 mesh.
pub fn example_6_7_index(t: f64) -> usize {
    (t * EX67_STEPS_PER_UNIT as f64).round() as usize
}

/// A controlled path together with what the verifiers need.
pub struct CrpFixture {
    pub name: &'static str,
    pub path: ManifoldControlledPath,
    pub gauge: Arc<dyn Gauge>,
    pub chart: ChartRef,
    pub delta: f64,
}

impl CrpFixture {
    fn new(name: &'static str, path: ManifoldControlledPath, gauge: Arc<dyn Gauge>, delta: f64) -> Result<Self> {
        let chart = containing_chart(&path)?;
        Ok(CrpFixture { name, path, gauge, chart, delta })
    }
}

pub const CRP_FIXTURES: [&str; 8] = [
    "sphere-curve",
    "sphere-projection-rde",
    "so3-rotation-rde",
    "sphere-rolled-area",
    "sphere-bad-dagger",
    "plane-mismatched",
    "example-6.7",
    "example-6.7-literal",
];

pub fn crp_fixture(name: &str, p: f64) -> Result<CrpFixture> {
    let n = 256;
    match name {
        "sphere-curve" => CrpFixture::new("sphere-curve", sphere_curve(n)?, levi_civita(), 0.5),
        "sphere-projection-rde" => CrpFixture::new("sphere-projection-rde", projection_rde(n, 0.5)?, levi_civita(), 0.25),
        "so3-rotation-rde" => CrpFixture::new("so3-rotation-rde", rotation_rde(n, 0.5)?, left_so3(), 0.25),
        "sphere-rolled-area" => CrpFixture::new("sphere-rolled-area", rolled_area(n, 1.0)?, levi_civita(), 0.25),
        "sphere-bad-dagger" => CrpFixture::new("sphere-bad-dagger", bad_dagger(&sphere_curve(n)?)?, levi_civita(), 0.5),
        "plane-mismatched" => CrpFixture::new("plane-mismatched", mismatched_plane(n)?, identity_gauge(2), 0.5),
        "example-6.7" => CrpFixture::new("example-6.7", example_6_7(p, Example67Variant::Shifted)?, identity_gauge(1), 0.5),
        "example-6.7-literal" => CrpFixture::new("example-6.7-literal", example_6_7(p, Example67Variant::Literal)?, identity_gauge(1), 0.5),
        other => Err(Error::DomainError(format!("unknown fixture {other}"))),
    }
}

/// Generic smooth `R`-valued one-form on `R³ ⊃ S²`, as a `1 × 3` matrix.
pub fn generic_sphere_form(m: &[f64]) -> Mat64 {
    Mat64::from_rows(&[vec![m[1] + 0.5 * m[0] * m[2], m[0].sin(), m[0] * m[1] - 0.3]])
}

/// `R²`-valued one-form on `R³ ⊃ S²`.
pub fn vector_sphere_form(m: &[f64]) -> Mat64 {
    Mat64::from_rows(&[vec![m[2], 0.0, -m[0]], vec![m[1] * m[1], m[0], 1.0]])
}

/// `SO(3) ∋ g ↦ (ξ ↦ (ξgᵀ)_{21}, (ξgᵀ)_{02})`, row-major ambient coordinates.
pub fn so3_form(g: &[f64]) -> Mat64 {
    let gm = lie::mat(3, g);
    let cols: Vec<Vec<f64>> = (0..9)
        .map(|j| {
            let e = lie::mat(3, &linalg::unit(9, j)).matmul(&gm.transpose());
            vec![e[(2, 1)], e[(0, 2)]]
        })
        .collect();
    Mat64::from_cols(&cols)
}

/// One RDE fixture with the manifold data needed by the characterisation checks.
pub struct RdeFixture {
    pub name: &'static str,
    pub field: Box<dyn ManifoldField>,
    pub path: ManifoldControlledPath,
    pub gauge: Arc<dyn Gauge>,
    pub chart: ChartRef,
    pub scalars: Vec<fn(&[f64]) -> f64>,
}

fn scalar_m0m1(m: &[f64]) -> f64 {
    m[0] * m[1]
}

fn scalar_last(m: &[f64]) -> f64 {
    m[m.len() - 1]
}

fn scalar_trace(m: &[f64]) -> f64 {
    m[0] + m[4] + m[8]
}

fn scalar_g02(m: &[f64]) -> f64 {
    m[2]
}

pub const RDE_FIXTURES: [&str; 4] = ["sphere-projection-rde", "so3-rotation-rde", "sphere-rotation-rde", "plane-pure-area-rde"];

pub fn rde_fixture(name: &str, n: usize) -> Result<RdeFixture> {
    let (field, path, gauge, scalars): (Box<dyn ManifoldField>, _, _, Vec<fn(&[f64]) -> f64>) = match name {
        "sphere-projection-rde" => (Box::new(ProjectionField::new(sphere())), projection_rde(n, 0.5)?, levi_civita(), vec![scalar_m0m1, scalar_last]),
        "so3-rotation-rde" => (Box::new(RotationField::on_so3(so3())), rotation_rde(n, 0.5)?, left_so3(), vec![scalar_trace, scalar_g02]),
        "sphere-rotation-rde" => {
            (Box::new(RotationField::on_sphere(sphere())), sphere_rotation_rde(n, 0.5)?, levi_civita(), vec![scalar_m0m1, scalar_last])
        }
        "plane-pure-area-rde" => (Box::new(commutator_manifold_field()), pure_area_rde(n)?, identity_gauge(2), vec![scalar_m0m1, scalar_last]),
        other => return Err(Error::DomainError(format!("unknown RDE fixture {other}"))),
    };
    let chart = containing_chart(&path)?;
    Ok(RdeFixture { name: RDE_FIXTURES.iter().find(|n| **n == name).copied().unwrap_or("custom"), field, path, gauge, chart, scalars })
}

fn rk4_step(f: &impl Fn(f64, &[f64]) -> Vec<f64>, t: f64, m: &[f64], h: f64) -> Vec<f64> {
    let k1 = f(t, m);
    let k2 = f(t + 0.5 * h, &linalg::axpy(m, 0.5 * h, &k1));
    let k3 = f(t + 0.5 * h, &linalg::axpy(m, 0.5 * h, &k2));
    let k4 = f(t + h, &linalg::axpy(m, h, &k3));
    let sum = linalg::add(&linalg::add(&k1, &k4), &linalg::scale(&linalg::add(&k2, &k3), 2.0));
    linalg::axpy(m, h / 6.0, &sum)
}

/// RK4 solution of `ẏ = P(y) ẋ(t)` for [`curved_driver`] at each of `times`, steps at most `max_h`.
pub fn projection_ode_trajectory(y0: &[f64], times: &[f64], max_h: f64) -> Vec<Vec<f64>> {
    let f = |t: f64, m: &[f64]| {
        let w = curved_velocity(t);
        linalg::axpy(&w, -linalg::dot(m, &w), m)
    };
    let mut out = vec![y0.to_vec()];
    let mut m = y0.to_vec();
    for w in times.windows(2) {
        let sub = ((w[1] - w[0]) / max_h).ceil().max(1.0) as usize;
        let h = (w[1] - w[0]) / sub as f64;
        for k in 0..sub {
            m = rk4_step(&f, w[0] + k as f64 * h, &m, h);
        }
        out.push(m.clone());
    }
    out
}

/// Endpoint of [`projection_ode_trajectory`] on `[0, t1]`.
pub fn projection_ode_oracle(y0: &[f64], t1: f64, h: f64) -> Vec<f64> {
    projection_ode_trajectory(y0, &[0.0, t1], h).pop().unwrap_or_default()
}

/// Rotation RDE on `SO(3)` from `I`, driven by `t·a0` on `[0, 1]`; the exact solution is `exp(−â0)`.
pub fn so3_constant_rde(n: usize, a0: [f64; 3]) -> Result<ManifoldControlledPath> {
    let field = RotationField::on_so3(so3());
    let rp = lift(move |t| vec![a0[0] * t, a0[1] * t, a0[2] * t], 1.0, n)?;
    Ok(rde_solve_manifold(&field, rp, Mat64::identity(3).as_slice(), (0.0, 1.0), &ManifoldRdeOptions::default())?.path)
}

/// Dyadic step counts `base · 2^i`, `i < levels`.
pub fn dyadic(base: usize, levels: usize) -> Vec<usize> {
    (0..levels).map(|i| base << i).collect()
}

/// Smooth planar path with an extra area `a(t − s)(e₁⊗e₂ − e₂⊗e₁)` per step, calibrated for `p = 2`.
pub fn area_driver(n: usize, a: f64) -> Result<Arc<Rp>> {
    let rp = lift(|t| vec![(2.0 * t).sin(), t.cos() - 1.0], 1.0, n)?;
    let areas = rp
        .areas()
        .iter()
        .zip(rp.times().windows(2))
        .map(|(m, w)| {
            let s = a * (w[1] - w[0]);
            m.add(&Mat64::from_rows(&[vec![0.0, s], vec![-s, 0.0]]))
        })
        .collect();
    let mut out = RoughPath::from_parts(rp.times().to_vec(), rp.values().to_vec(), areas, Control::time_scale(1.0, 2.0))?;
    out.calibrate(2.0);
    Ok(Arc::new(out))
}

/// `(A(x_s), DA(x_s) ∘ x_s†)` for a matrix-valued `A` on the driver's space, flattened row-major.
pub fn smooth_integrand(a: fn(&[f64]) -> Mat64, y: &ControlledPath<f64>) -> ControlledPath<f64> {
    let h = 1e-5;
    let mut gub = Vec::with_capacity(y.len());
    for (x, d) in y.values.iter().zip(&y.gubinelli) {
        let cols: Vec<Vec<f64>> = (0..d.cols())
            .map(|i| {
                let v = d.col(i);
                let plus = a(&linalg::axpy(x, h, &v));
                let minus = a(&linalg::axpy(x, -h, &v));
                plus.sub(&minus).scale(0.5 / h).into_vec()
            })
            .collect();
        gub.push(Mat64::from_cols(&cols));
    }
    let values = y.values.iter().map(|x| a(x).into_vec()).collect();
    ControlledPath { times: y.times.clone(), values, gubinelli: gub }
}

/// `1 × 2` integrand on `R²`.
pub fn planar_form(x: &[f64]) -> Mat64 {
    Mat64::from_rows(&[vec![x[1] * x[1] + x[0], (x[0] * x[1]).sin()]])
}

/// Smooth planar driver `(sin 2t, t² − t)` on `[0, 1]`.
pub fn lifted_plane_curve(n: usize) -> Result<Arc<Rp>> {
    lift(|t| vec![(2.0 * t).sin(), t * t - t], 1.0, n)
}

/// Curved path in `so(3)` (row-major `3 × 3`), the hat of [`curved_driver`].
pub fn skew_driver(n: usize) -> Result<Arc<Rp>> {
    lift(|t| lie::hat(3, &[(2.0 * t).sin(), t * t - t, (3.0 * t).cos() - 1.0]).into_vec(), 1.0, n)
}
