//! The acceptance criteria as named suites.

use std::f64::consts::{E, PI};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crp_core::geometry::{
    compatibility_tensor, fd, gauge_tensor_fd, lie, torsion_check, Bilinear, ChartGauge, Parallelism, SonConnection,
    SphereLeviCivita, Stereographic,
};
use crp_core::linalg::{self, Mat64};
use crp_core::mcrp::{verify_chart_crp, verify_gauge_crp, SmoothMap};
use crp_core::mintegrate::{associativity_check_smooth, fundamental_theorem, oneform_from_smooth, push_pull_check, Comparison};
use crp_core::mrde::{check_rde_chart_form, check_rde_gauge_form, check_rde_scalar_form, FormReport};
use crp_core::order::estimate_order_with_floor;
use crp_core::roughcore::{controlled::ratio, rde_solve_flat, RdeOptions, RoughPath};
use crp_core::transport::{parallel_translate_frame, transport_options, FrameBundle};
use crp_core::{Error, Result};

use crate::convergence::{self, global_target, ConvergenceReport};
use crate::fixtures::{self as fx, Example67Variant};
use crate::report::{Check, ComparisonRecord, CriterionReport, Verification, VerificationRecord};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Roughness exponent of the Example 6.7 fixture.
    pub p: f64,
    pub deterministic: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { seed: crate::DEFAULT_SEED, p: 2.0, deterministic: false }
    }
}

pub const CRITERIA: [(&str, &str); 11] = [
    ("c1", "algebraic-exactness"),
    ("c2", "sewing-order"),
    ("c3", "example-6.7"),
    ("c4", "gauge-independence"),
    ("c5", "fundamental-theorem"),
    ("c6", "push-pull-and-associativity"),
    ("c7", "rde-correctness"),
    ("c8", "equivalence"),
    ("c9", "compatibility-tensor"),
    ("c10", "transport"),
    ("c11", "determinism"),
];

/// Looks a criterion up by id (`c3`) or name (`example-6.7`).
pub fn criterion_id(key: &str) -> Option<&'static str> {
    CRITERIA.iter().find(|(id, name)| *id == key || *name == key).map(|(id, _)| *id)
}

pub fn run_criterion(id: &str, opts: &SuiteOptions) -> CriterionReport {
    let name = CRITERIA.iter().find(|(i, _)| *i == id).map(|(_, n)| *n).unwrap_or("unknown");
    let mut r = CriterionReport::new(id, name, opts.seed);
    let t0 = Instant::now();
    let out = match id {
        "c1" => algebraic_exactness(opts, &mut r),
        "c2" => sewing_order(&mut r),
        "c3" => example_6_7(opts, &mut r),
        "c4" => gauge_independence(&mut r),
        "c5" => fundamental_theorem_suite(&mut r),
        "c6" => push_pull_and_associativity(&mut r),
        "c7" => rde_correctness(&mut r),
        "c8" => equivalence(opts, &mut r),
        "c9" => compatibility_algebra(opts, &mut r),
        "c10" => transport_suite(&mut r),
        "c11" => determinism(opts, &mut r),
        other => Err(Error::DomainError(format!("unknown criterion {other}"))),
    };
    if let Err(e) = out {
        r.checks.push(Check::error(id, e));
    }
    if !opts.deterministic {
        r.runtime = Some(t0.elapsed().as_secs_f64());
    }
    r.finish()
}

/// Runs the criteria in parallel; the result is ordered by id whatever the scheduling.
pub fn run_criteria(ids: &[&str], opts: &SuiteOptions) -> Vec<CriterionReport> {
    let mut out: Vec<CriterionReport> = ids.par_iter().map(|id| run_criterion(id, opts)).collect();
    out.sort_by_key(|r| CRITERIA.iter().position(|(id, _)| *id == r.id).unwrap_or(usize::MAX));
    out
}

fn push_study(r: &mut CriterionReport, name: &str, levels: usize, cap: Option<f64>) -> Result<ConvergenceReport> {
    let mut c = convergence::study(name, levels)?;
    if let Some(cap) = cap {
        c.cap = cap;
        c.pass = c.pass && c.finest() <= cap;
    }
    c.runtime = None;
    r.convergence.push(c.clone());
    Ok(c)
}

fn compare(fixture: &str, lhs: &str, rhs: &str, diffs: &[f64], hs: &[f64], target: f64, cap: f64) -> Result<ComparisonRecord> {
    let fit = estimate_order_with_floor(diffs, hs, crp_core::order::ROUNDOFF_FLOOR)?;
    let finest = *diffs.last().unwrap_or(&f64::NAN);
    Ok(ComparisonRecord {
        fixture: fixture.into(),
        lhs: lhs.into(),
        rhs: rhs.into(),
        diff_sup: finest,
        slope: Some(fit.slope),
        pass: fit.meets(target) && finest <= cap,
    })
}

/// Comparison over `N = base·2^i` for `i < 4`, on `[0, t1]`.
fn refinement_comparison(
    fixture: &str,
    lhs: &str,
    rhs: &str,
    base: usize,
    t1: f64,
    target: f64,
    cap: f64,
    cmp: impl Fn(usize) -> Result<Comparison> + Sync,
) -> Result<ComparisonRecord> {
    let ns = fx::dyadic(base, 4);
    let diffs = ns.par_iter().map(|&n| cmp(n).map(|c| c.diff_sup)).collect::<Result<Vec<_>>>()?;
    let hs: Vec<f64> = ns.iter().map(|&n| t1 / n as f64).collect();
    compare(fixture, lhs, rhs, &diffs, &hs, target, cap)
}

const CHEN_TOL: f64 = 1e-12;
const WEAK_GEOMETRIC_TOL: f64 = 1e-10;
const C1_RUNTIME: f64 = 1.0;

fn algebraic_exactness(opts: &SuiteOptions, r: &mut CriterionReport) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = 256;
    let times: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let mut walk = vec![vec![0.0; 3]];
    for _ in 0..n {
        let last = walk.last().cloned().unwrap_or_default();
        walk.push(last.iter().map(|v| v + rng.gen_range(-0.1..0.1)).collect());
    }
    let paths: Vec<(&str, Arc<RoughPath<f64>>)> = vec![
        ("curved-smooth-lift", fx::curved_driver(n, 1.0)?),
        ("plane-curve-lift", fx::lifted_plane_curve(n)?),
        ("pure-area", fx::pure_area(n, 1.0)?),
        ("area-perturbed", fx::area_driver(n, 1.0)?),
        ("random-piecewise-linear", Arc::new(RoughPath::piecewise_linear(times, walk, 2.0)?)),
        ("example-6.7", fx::example_6_7(opts.p, Example67Variant::Shifted)?.driver.clone()),
    ];
    let t0 = Instant::now();
    for (name, rp) in &paths {
        r.checks.push(Check::at_most(format!("{name} chen"), rp.chen_residual(), CHEN_TOL));
        r.checks.push(Check::at_most(format!("{name} weak-geometric"), rp.weak_geometric_residual(), WEAK_GEOMETRIC_TOL));
    }
    if !opts.deterministic {
        r.checks.push(Check::at_most("residual checks runtime seconds", t0.elapsed().as_secs_f64(), C1_RUNTIME));
    }
    Ok(())
}

const SEWING_STUDIES: [&str; 4] = ["sewing-flat-smooth", "sewing-flat-area", "sewing-gauge-sphere", "sewing-gauge-rolled-area"];

fn sewing_order(r: &mut CriterionReport) -> Result<()> {
    for s in SEWING_STUDIES {
        push_study(r, s, 5, None)?;
    }
    Ok(())
}

const EX67_EPS: f64 = 0.01;
const EX67_RATIO_TOL: f64 = 1e-9;

/// The remainder ratio `|y_{0,1+ε} − y_0† x_{0,1+ε}| / ω(0,1+ε)^{2/p}` and its closed form.
pub fn example_6_7_ratio(p: f64, variant: Example67Variant, eps: f64) -> Result<(f64, f64)> {
    let y = fx::example_6_7(p, variant)?;
    let j = fx::example_6_7_index(1.0 + eps);
    let x = y.driver.values()[j][0] - y.driver.values()[0][0];
    let rem = (y.points[j][0] - y.points[0][0] - y.gubinelli[0][(0, 0)] * x).abs();
    let got = ratio(rem, y.driver.omega(0, j), 2.0 / p);
    Ok((got, eps.powf(-1.0 / p)))
}

/// Gauge and chart verdicts for one Example 6.7 variant.
pub fn example_6_7_verdicts(p: f64, variant: Example67Variant) -> Result<(crp_core::roughcore::CrpReport, crp_core::roughcore::CrpReport)> {
    let f = fx::crp_fixture(if variant == Example67Variant::Shifted { "example-6.7" } else { "example-6.7-literal" }, p)?;
    let gauge = verify_gauge_crp(&f.path, f.gauge.as_ref(), f.delta)?;
    let chart = verify_chart_crp(&f.path, f.chart.as_ref(), 0.0, 2.0)?;
    Ok((gauge, chart))
}

fn example_6_7(opts: &SuiteOptions, r: &mut CriterionReport) -> Result<()> {
    let (got, expected) = example_6_7_ratio(opts.p, Example67Variant::Shifted, EX67_EPS)?;
    r.checks.push(Check::at_most(format!("ratio {got} vs eps^(-1/p) = {expected}"), (got - expected).abs(), EX67_RATIO_TOL));
    if opts.p == 2.0 {
        r.checks.push(Check::at_most("ratio equals 10 at p = 2", (got - 10.0).abs(), EX67_RATIO_TOL));
    }
    let (gauge, chart) = example_6_7_verdicts(opts.p, Example67Variant::Shifted)?;
    r.checks.push(Check::holds("chart verifier fails", !chart.pass));
    r.checks.push(Check::holds("gauge verifier remainder bound holds at delta = 1/2", gauge.remainder_pass && gauge.delta == 0.5));
    r.verifications.push(VerificationRecord { fixture: "example-6.7".into(), verifier: "gauge".into(), report: Verification::from(&gauge) });
    r.verifications.push(VerificationRecord { fixture: "example-6.7".into(), verifier: "chart".into(), report: Verification::from(&chart) });
    let (lg, lc) = example_6_7_verdicts(opts.p, Example67Variant::Literal)?;
    r.verifications.push(VerificationRecord { fixture: "example-6.7-literal".into(), verifier: "gauge".into(), report: Verification::from(&lg) });
    r.verifications.push(VerificationRecord { fixture: "example-6.7-literal".into(), verifier: "chart".into(), report: Verification::from(&lc) });
    Ok(())
}

const GAUGE_INDEPENDENCE_CAP: f64 = 1e-5;

fn gauge_independence(r: &mut CriterionReport) -> Result<()> {
    for s in ["gauge-independence-sphere", "gauge-independence-rolled-area"] {
        let c = push_study(r, s, 5, Some(GAUGE_INDEPENDENCE_CAP))?;
        r.comparisons.push(ComparisonRecord {
            fixture: s.trim_start_matches("gauge-independence-").into(),
            lhs: "levi-civita".into(),
            rhs: "stereographic-chart".into(),
            diff_sup: c.finest(),
            slope: Some(c.slope),
            pass: c.pass,
        });
    }
    Ok(())
}

const FTC_TOL: f64 = 1e-7;
const FTC_DERIVATIVE_TOL: f64 = 1e-12;

/// Closed polar loops `(θ, tilt)`.
pub const FTC_LOOPS: [(f64, f64); 3] = [(0.5, 0.0), (0.5, 0.3), (0.4, 0.6)];

fn fundamental_theorem_suite(r: &mut CriterionReport) -> Result<()> {
    let reports = FTC_LOOPS
        .par_iter()
        .map(|&(theta, tilt)| {
            let y = fx::polar_loop(1 << 10, theta, tilt)?;
            let f = |m: &[f64]| vec![m[2], m[0] * m[1]];
            let lc = fundamental_theorem(&f, &y, fx::levi_civita().as_ref())?;
            let chart = fundamental_theorem(&f, &y, fx::chart_gauge(&y)?.as_ref())?;
            Ok((theta, tilt, lc, chart))
        })
        .collect::<Result<Vec<_>>>()?;
    for (theta, tilt, lc, chart) in reports {
        let tag = format!("polar-loop theta={theta} tilt={tilt}");
        r.checks.push(Check::at_most(format!("{tag} levi-civita residual"), lc.residual, FTC_TOL));
        r.checks.push(Check::at_most(format!("{tag} chart residual"), chart.residual, FTC_TOL));
        r.checks.push(Check::at_most(format!("{tag} df.y-dagger = z-dagger"), lc.derivative_residual.max(chart.derivative_residual), FTC_DERIVATIVE_TOL));
    }
    Ok(())
}

const PUSH_PULL_CAP: f64 = 1e-5;

fn rotate_sphere(m: &[f64]) -> Vec<f64> {
    lie::axis_rotation(2, 0.7).matmul(&lie::axis_rotation(0, 0.4)).mul_vec(m)
}

fn bend(m: &[f64]) -> Vec<f64> {
    vec![m[0] + m[1] * m[1], m[1] * m[2], m[0].sin()]
}

fn third_column(g: &[f64]) -> Vec<f64> {
    vec![g[2], g[5], g[8]]
}

fn push_pull_and_associativity(r: &mut CriterionReport) -> Result<()> {
    let p1 = global_target(1.0);
    let sphere_rot = SmoothMap::new("rotate", fx::sphere(), rotate_sphere);
    r.comparisons.push(refinement_comparison("sphere-curve/rotation", "pull-back", "push-forward", 128, 2.0, p1, PUSH_PULL_CAP, |n| {
        let y = fx::sphere_curve(n)?;
        let g = fx::levi_civita();
        push_pull_check(&sphere_rot, &fx::generic_sphere_form, &y, g.as_ref(), g.as_ref())
    })?);
    let bent = SmoothMap::new("bend", fx::plane(3), bend);
    r.comparisons.push(refinement_comparison("sphere-curve/bend-into-R3", "pull-back", "push-forward", 128, 2.0, p1, PUSH_PULL_CAP, |n| {
        let y = fx::sphere_curve(n)?;
        push_pull_check(&bent, &fx::generic_sphere_form, &y, fx::levi_civita().as_ref(), fx::identity_gauge(3).as_ref())
    })?);
    let column = SmoothMap::new("third-column", fx::sphere(), third_column);
    r.comparisons.push(refinement_comparison("so3-rotation-rde/third-column", "pull-back", "push-forward", 128, 0.5, p1, PUSH_PULL_CAP, |n| {
        let y = fx::rotation_rde(n, 0.5)?;
        push_pull_check(&column, &fx::generic_sphere_form, &y, fx::left_so3().as_ref(), fx::levi_civita().as_ref())
    })?);

    let k_sphere = |m: &[f64]| Mat64::from_rows(&[vec![m[0]], vec![m[1] * m[2]]]);
    r.comparisons.push(refinement_comparison("sphere-curve", "iterated", "product", 128, 2.0, p1, PUSH_PULL_CAP, |n| {
        let y = fx::sphere_curve(n)?;
        let g = fx::levi_civita();
        let a = oneform_from_smooth(&fx::generic_sphere_form, &y, g.as_ref())?;
        associativity_check_smooth(&k_sphere, &a, &y, g.as_ref())
    })?);
    let k_so3 = |g: &[f64]| Mat64::from_rows(&[vec![g[0], g[4]]]);
    r.comparisons.push(refinement_comparison("so3-rotation-rde", "iterated", "product", 128, 0.5, p1, PUSH_PULL_CAP, |n| {
        let y = fx::rotation_rde(n, 0.5)?;
        let g = fx::left_so3();
        let a = oneform_from_smooth(&fx::so3_form, &y, g.as_ref())?;
        associativity_check_smooth(&k_so3, &a, &y, g.as_ref())
    })?);
    let k_rolled = |m: &[f64]| Mat64::from_rows(&[vec![m[2], 1.0]]);
    r.comparisons.push(refinement_comparison("sphere-rolled-area", "iterated", "product", 128, 1.0, global_target(2.0), PUSH_PULL_CAP, |n| {
        let y = fx::rolled_area(n, 1.0)?;
        let g = fx::levi_civita();
        let a = oneform_from_smooth(&fx::vector_sphere_form, &y, g.as_ref())?;
        associativity_check_smooth(&k_rolled, &a, &y, g.as_ref())
    })?);
    Ok(())
}

const RK4_ORACLE_STEP: f64 = 1e-5;
const PROJECTION_RDE_TOL: f64 = 1e-6;
const SO3_EXP_TOL: f64 = 1e-9;
const PURE_AREA_TOL: f64 = 1e-6;
pub const SO3_DIRECTION: [f64; 3] = [0.3, -0.5, 0.8];

fn rde_correctness(r: &mut CriterionReport) -> Result<()> {
    let y = fx::projection_rde(1 << 10, 1.0)?;
    let oracle = fx::projection_ode_trajectory(&fx::SPHERE_Y0, &y.times, RK4_ORACLE_STEP);
    let sup = y.points.iter().zip(&oracle).map(|(a, b)| linalg::dist(a, b)).fold(0.0, f64::max);
    r.checks.push(Check::at_most("sphere projection RDE vs RK4 sup error", sup, PROJECTION_RDE_TOL));

    let g = fx::so3_constant_rde(64, SO3_DIRECTION)?;
    let expected = linalg::so3_exp(&linalg::scale(&SO3_DIRECTION, -1.0));
    r.checks.push(Check::at_most("SO(3) constant direction vs exp(-A0)", linalg::dist(g.last(), expected.as_slice()), SO3_EXP_TOL));

    let rp = fx::pure_area(1 << 10, 1.0)?;
    let sol = rde_solve_flat(&fx::commutator_field(), rp.as_ref(), &[1.0, 1.0], (0.0, 1.0), RdeOptions::default())?;
    r.checks.push(Check::at_most("pure-area RDE vs diag(e, 1/e)", linalg::dist(sol.last(), &[E, 1.0 / E]), PURE_AREA_TOL));
    Ok(())
}

const FORM_WIDTHS: [usize; 5] = [16, 8, 4, 2, 1];
pub const MIN_CRP_FIXTURES: usize = 6;

/// Gauge and chart verdicts on one CRP fixture.
pub fn verify_fixture(name: &str, p: f64) -> Result<(Verification, Verification, crp_core::roughcore::CrpReport)> {
    let f = fx::crp_fixture(name, p)?;
    let gauge = verify_gauge_crp(&f.path, f.gauge.as_ref(), f.delta)?;
    let (a, b) = (f.path.times[0], f.path.times[f.path.len() - 1]);
    let chart = verify_chart_crp(&f.path, f.chart.as_ref(), a, b)?;
    Ok((Verification::from(&gauge), Verification::from(&chart), gauge))
}

fn form_reports(name: &str) -> Result<[FormReport; 3]> {
    let f = fx::rde_fixture(name, 256)?;
    let fs: Vec<&dyn Fn(&[f64]) -> f64> = f.scalars.iter().map(|s| s as &dyn Fn(&[f64]) -> f64).collect();
    Ok([
        check_rde_gauge_form(&f.path, f.field.as_ref(), f.gauge.as_ref(), &FORM_WIDTHS)?,
        check_rde_chart_form(&f.path, f.field.as_ref(), f.chart.as_ref(), &FORM_WIDTHS)?,
        check_rde_scalar_form(&f.path, f.field.as_ref(), &fs, &FORM_WIDTHS)?,
    ])
}

fn equivalence(opts: &SuiteOptions, r: &mut CriterionReport) -> Result<()> {
    let verdicts = fx::CRP_FIXTURES.par_iter().map(|name| verify_fixture(name, opts.p).map(|v| (*name, v))).collect::<Result<Vec<_>>>()?;
    r.checks.push(Check::at_least("CRP fixtures", verdicts.len() as f64, MIN_CRP_FIXTURES as f64));
    for (name, (gauge, chart, _)) in verdicts {
        r.checks.push(Check::equal(format!("{name} gauge/chart verdicts"), gauge.pass, chart.pass));
        r.verifications.push(VerificationRecord { fixture: name.into(), verifier: "gauge".into(), report: gauge });
        r.verifications.push(VerificationRecord { fixture: name.into(), verifier: "chart".into(), report: chart });
    }
    let forms = fx::RDE_FIXTURES.par_iter().map(|name| form_reports(name).map(|f| (*name, f))).collect::<Result<Vec<_>>>()?;
    for (name, [gauge, chart, scalar]) in forms {
        r.checks.push(Check::holds(format!("{name} gauge form"), gauge.pass));
        r.checks.push(Check::holds(format!("{name} chart form"), chart.pass));
        r.checks.push(Check::holds(format!("{name} scalar form"), scalar.pass));
        if let Some(gap) = gauge.split_gap {
            r.checks.push(Check::at_most(format!("{name} split gauge coefficients"), gap, SPLIT_GAP_TOL));
        }
    }
    Ok(())
}

const SPLIT_GAP_TOL: f64 = 1e-7;
const COCYCLE_TOL: f64 = 1e-8;
const SO3_TORSION_TOL: f64 = 1e-5;
const SPHERE_TORSION_TOL: f64 = 1e-6;
const BRACKET_TOL: f64 = 1e-6;
const RANDOM_POINTS: usize = 6;

/// Seeded point on `S²` with `|m_3| ≤ 0.5`, inside both stereographic charts.
fn random_sphere_point(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let z: f64 = rng.gen_range(-0.5..0.5);
    let phi: f64 = rng.gen_range(0.0..2.0 * PI);
    let rho = (1.0 - z * z).sqrt();
    vec![rho * phi.cos(), rho * phi.sin(), z]
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Mat64 {
    let w: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.2..1.2)).collect();
    linalg::so3_exp(&w)
}

/// `−½ g[gᵀv, gᵀw]` for tangent vectors at `g`, row-major.
pub fn left_bracket_formula(g: &Mat64, v: &[f64], w: &[f64]) -> Vec<f64> {
    let a = g.transpose().matmul(&lie::mat(3, v));
    let b = g.transpose().matmul(&lie::mat(3, w));
    g.matmul(&lie::bracket(&a, &b)).scale(-0.5).into_vec()
}

fn compatibility_algebra(opts: &SuiteOptions, r: &mut CriterionReport) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);
    let sphere = fx::sphere();
    let lc = fx::levi_civita();
    let north = ChartGauge::new(sphere.clone(), Arc::new(Stereographic::north()));
    let south = ChartGauge::new(sphere.clone(), Arc::new(Stereographic::south()));
    let us: [&dyn Parallelism; 3] = [lc.as_ref(), &north, &south];
    let (mut cocycle, mut anti, mut sphere_torsion) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..RANDOM_POINTS {
        let m = random_sphere_point(&mut rng);
        let s = |a: usize, b: usize| compatibility_tensor(sphere.as_ref(), &m, us[a], us[b], fd::FD_STEP);
        let (s20, s21, s10) = (s(2, 0)?, s(2, 1)?, s(1, 0)?);
        cocycle = cocycle.max(s20.diff_sup(&s21.add(&s10)));
        anti = anti.max(s10.add(&s(0, 1)?).max_abs()).max(s21.add(&s(1, 2)?).max_abs());
        sphere_torsion = sphere_torsion.max(torsion_check(lc.as_ref(), &SphereLeviCivita::new(), &m)?.sup);
    }
    r.checks.push(Check::at_most("cocycle S(U3,U1) = S(U3,U2) + S(U2,U1)", cocycle, COCYCLE_TOL));
    r.checks.push(Check::at_most("antisymmetry S(U,V) = -S(V,U)", anti, COCYCLE_TOL));
    r.checks.push(Check::at_most("Levi-Civita S2 gauge tensor = half torsion = 0", sphere_torsion, SPHERE_TORSION_TOL));

    let left = fx::left_so3();
    let conn = SonConnection::left(3);
    let so3 = fx::so3();
    let (mut so3_torsion, mut bracket) = (0.0f64, 0.0f64);
    for _ in 0..RANDOM_POINTS {
        let g = random_rotation(&mut rng);
        so3_torsion = so3_torsion.max(torsion_check(left.as_ref(), &conn, g.as_slice())?.sup);
        let formula = Bilinear::from_fn(so3.tangent_basis(g.as_slice()), |v, w| left_bracket_formula(&g, v, w));
        bracket = bracket.max(gauge_tensor_fd(left.as_ref(), g.as_slice())?.diff_sup(&formula));
    }
    r.checks.push(Check::at_most("left SO(3) gauge tensor = half torsion", so3_torsion, SO3_TORSION_TOL));
    r.checks.push(Check::at_most("left SO(3) gauge tensor = -1/2 g[A,B]", bracket, BRACKET_TOL));
    Ok(())
}

const HOLONOMY_TOL: f64 = 1e-6;
pub const HOLONOMY_THETAS: [f64; 2] = [PI / 3.0, 2.0 * PI / 5.0];
const TRANSPORT_CAP: f64 = 1e-4;

/// `|hol − R(2π(1 − cos θ))|` for the clock-driven latitude with `n` steps.
pub fn latitude_holonomy_error(theta: f64, n: usize) -> Result<f64> {
    let y = fx::clock_latitude(n, theta, 2.0 * PI)?;
    let lift = parallel_translate_frame(&y, &FrameBundle::sphere(), &Mat64::identity(2), &transport_options())?;
    let expected = lie::exp(2, &[2.0 * PI * (1.0 - theta.cos())]);
    Ok(lift.holonomy()?.sub(&expected).max_abs())
}

fn transport_suite(r: &mut CriterionReport) -> Result<()> {
    let errs = HOLONOMY_THETAS.par_iter().map(|&t| latitude_holonomy_error(t, 1 << 12)).collect::<Result<Vec<_>>>()?;
    for (theta, err) in HOLONOMY_THETAS.iter().zip(errs) {
        r.checks.push(Check::at_most(format!("latitude holonomy theta={theta:.6}"), err, HOLONOMY_TOL));
    }
    let studies = [
        ("roll-unroll-latitude", TRANSPORT_CAP),
        ("unroll-roll-smooth", TRANSPORT_CAP),
        ("unroll-roll-area", 1e-2),
        ("maurer-cartan-so3", TRANSPORT_CAP),
        ("rolled-integral-geodesic", TRANSPORT_CAP),
        ("rolled-integral-sphere-curve", TRANSPORT_CAP),
    ];
    let reports = studies.par_iter().map(|(s, _)| convergence::study(s, 5)).collect::<Result<Vec<_>>>()?;
    for (mut c, (_, cap)) in reports.into_iter().zip(studies) {
        c.pass = c.pass && c.finest() <= cap;
        c.cap = cap;
        c.runtime = None;
        r.convergence.push(c);
    }
    Ok(())
}

const DETERMINISM_CRITERIA: [&str; 3] = ["c1", "c3", "c9"];

fn determinism(opts: &SuiteOptions, r: &mut CriterionReport) -> Result<()> {
    let o = SuiteOptions { deterministic: true, ..*opts };
    let render = || serde_json::to_string(&run_criteria(&DETERMINISM_CRITERIA, &o)).map_err(|e| Error::DomainError(e.to_string()));
    let (a, b) = (render()?, render()?);
    r.checks.push(Check::holds(format!("repeat runs of {} are byte-identical", DETERMINISM_CRITERIA.join(",")), a == b));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_and_names_resolve() {
        assert_eq!(criterion_id("c3"), Some("c3"));
        assert_eq!(criterion_id("example-6.7"), Some("c3"));
        assert_eq!(criterion_id("nope"), None);
    }

    #[test]
    fn example_ratio_is_closed_form() {
        let (got, expected) = example_6_7_ratio(2.0, Example67Variant::Shifted, 0.01).unwrap();
        assert!((expected - 10.0).abs() < 1e-12);
        assert!((got - expected).abs() < 1e-9, "{got}");
        let (got3, expected3) = example_6_7_ratio(3.0, Example67Variant::Shifted, 0.01).unwrap();
        assert!((got3 - expected3).abs() < 1e-9, "{got3} {expected3}");
    }

    #[test]
    fn left_bracket_formula_is_antisymmetric() {
        let g = linalg::so3_exp(&[0.2, -0.4, 0.9]);
        let v = g.matmul(&lie::hat(3, &[1.0, 0.0, 0.5])).into_vec();
        let w = g.matmul(&lie::hat(3, &[0.0, 2.0, -1.0])).into_vec();
        let a = left_bracket_formula(&g, &v, &w);
        let b = left_bracket_formula(&g, &w, &v);
        assert!(linalg::norm(&linalg::add(&a, &b)) < 1e-14);
    }
}
