//! The `crp` command line.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crp_core::geometry::{lie, Gauge};
use crp_core::linalg::{self, Mat64};
use crp_core::mcrp::{CrpRecord, ManifoldControlledPath};
use crp_core::mintegrate::{integrate_smooth_oneform, Comparison};
use crp_core::mrde::{rde_solve_manifold, ChartSwitch, ClosureField, ManifoldField, ManifoldRdeOptions, ProjectionField, RotationField};
use crp_core::roughcore::{ControlledPath, RoughPath};
use crp_core::transport::{parallel_translate_frame, transport_options, FrameBundle};

use crate::config::{self, ConfigError, DriverSpec, FieldKind, FormSpec, GaugeSpec, ManifoldSpec, SpherePathSpec};
use crate::convergence::{self, ConvergenceReport};
use crate::fixtures::{self as fx, Example67Variant, Rp};
use crate::report::{self, CriterionReport, SuiteBundle, Verification};
use crate::suites::{self, SuiteOptions};
use crate::DEFAULT_SEED;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "crp", version, about = "Controlled rough paths on manifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// JSON configuration for the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; `CRP_OUT` takes precedence.
    #[arg(long, global = true, default_value = "crp-out")]
    pub out: PathBuf,
    /// Dyadic levels for convergence studies.
    #[arg(long, global = true)]
    pub levels: Option<usize>,
    #[arg(long, global = true)]
    pub p: Option<f64>,
    /// Omit wall-clock timings so reruns are byte-identical.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Build a rough path from a driver description.
    Lift,
    /// Integrate a one-form along a path on the sphere under several gauges.
    Integrate,
    /// Solve a rough differential equation on a manifold.
    Rde,
    /// Parallel transport of the orthonormal frame along a path on the sphere.
    Transport,
    /// Run the gauge and chart verifiers on named fixtures.
    Verify {
        #[arg(long = "fixture")]
        fixtures: Vec<String>,
        /// Every known fixture.
        #[arg(long)]
        all: bool,
    },
    /// Refinement studies.
    Convergence {
        #[arg(long = "fixture")]
        fixtures: Vec<String>,
        #[arg(long)]
        all: bool,
    },
    /// Acceptance criteria, by id (`c3`) or name.
    Suite {
        #[arg(long = "criterion")]
        criteria: Vec<String>,
    },
}

/// Outcome of one command: exit code and the failing items.
#[derive(Debug, Default)]
pub struct Outcome {
    pub failures: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Numerical(#[from] crp_core::Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            _ => EXIT_FAIL,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

pub fn out_dir(flag: &Path) -> PathBuf {
    std::env::var_os("CRP_OUT").map(PathBuf::from).unwrap_or_else(|| flag.to_path_buf())
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(ConfigError::Invalid(msg.into()))
}

fn required<T: for<'de> serde::Deserialize<'de>>(g: &GlobalArgs, what: &str) -> CliResult<T> {
    match &g.config {
        Some(p) => Ok(config::load(p)?),
        None => Err(invalid(format!("`{what}` needs --config <json>"))),
    }
}

fn optional<T: for<'de> serde::Deserialize<'de> + Default>(g: &GlobalArgs) -> CliResult<T> {
    match &g.config {
        Some(p) => Ok(config::load(p)?),
        None => Ok(T::default()),
    }
}

/// Runs a parsed command line, writing reports under the output directory.
pub fn run(cli: &Cli) -> CliResult<Outcome> {
    let g = &cli.global;
    let out = out_dir(&g.out);
    match &cli.command {
        Command::Lift => lift(g, &out),
        Command::Integrate => integrate(g, &out),
        Command::Rde => rde(g, &out),
        Command::Transport => transport(g, &out),
        Command::Verify { fixtures, all } => verify(g, &out, fixtures, *all),
        Command::Convergence { fixtures, all } => convergence_cmd(g, &out, fixtures, *all),
        Command::Suite { criteria } => suite(g, &out, criteria),
    }
}

pub fn build_driver(spec: &DriverSpec) -> CliResult<Arc<Rp>> {
    let rp = match spec {
        DriverSpec::Curved { n, horizon } => fx::curved_driver(*n, *horizon)?,
        DriverSpec::Line { n, direction } => {
            let d = direction.clone();
            Arc::new(crp_core::roughcore::lift_smooth(
                move |t: f64| linalg::scale(&d, t),
                &crp_core::roughcore::uniform_grid(0.0, 1.0, *n),
                8,
            )?)
        }
        DriverSpec::PureArea { n, a } => fx::pure_area(*n, *a)?,
        DriverSpec::Area { n, a } => fx::area_driver(*n, *a)?,
        DriverSpec::PiecewiseLinear { times, values, p } => Arc::new(RoughPath::piecewise_linear(times.clone(), values.clone(), *p)?),
        DriverSpec::Example67 { p, variant } => fx::example_6_7(*p, *variant)?.driver.clone(),
    };
    Ok(rp)
}

#[derive(Serialize)]
struct LiftReport<'a> {
    seed: u64,
    driver: &'a DriverSpec,
    p: f64,
    chen_residual: f64,
    weak_geometric_residual: f64,
    path: &'a Rp,
}

fn lift(g: &GlobalArgs, out: &Path) -> CliResult<Outcome> {
    let c: config::LiftConfig = required(g, "lift")?;
    let rp = build_driver(&c.driver)?;
    let rep = LiftReport {
        seed: g.seed.unwrap_or(DEFAULT_SEED),
        driver: &c.driver,
        p: rp.p(),
        chen_residual: rp.chen_residual(),
        weak_geometric_residual: rp.weak_geometric_residual(),
        path: &rp,
    };
    report::write_json(&out.join("lift.json"), &rep)?;
    println!("lift: {} steps, p = {}, chen {:e}, weak-geometric {:e}", rp.steps(), rep.p, rep.chen_residual, rep.weak_geometric_residual);
    Ok(Outcome::default())
}

pub fn sphere_path(spec: &SpherePathSpec) -> CliResult<ManifoldControlledPath> {
    Ok(match *spec {
        SpherePathSpec::SphereCurve { n } => fx::sphere_curve(n)?,
        SpherePathSpec::PolarLoop { n, theta, tilt } => fx::polar_loop(n, theta, tilt)?,
        SpherePathSpec::Latitude { n, theta, horizon } => fx::clock_latitude(n, theta, horizon)?,
        SpherePathSpec::GreatCircle { n, tilt, horizon } => fx::great_circle(n, tilt, horizon)?,
        SpherePathSpec::RolledArea { n, a } => fx::rolled_area(n, a)?,
    })
}

fn height_form(_m: &[f64]) -> Mat64 {
    Mat64::from_rows(&[vec![0.0, 0.0, 1.0]])
}

#[derive(Serialize)]
struct IntegralRecord {
    gauge: String,
    endpoint: Vec<f64>,
    integral: ControlledPath<f64>,
}

#[derive(Serialize)]
struct IntegrateReport {
    seed: u64,
    form: FormSpec,
    integrals: Vec<IntegralRecord>,
    comparisons: Vec<report::ComparisonRecord>,
}

const GAUGE_AGREEMENT_TOL: f64 = 1e-4;

fn integrate(g: &GlobalArgs, out: &Path) -> CliResult<Outcome> {
    let c: config::IntegrateConfig = required(g, "integrate")?;
    let y = sphere_path(&c.path)?;
    let form: fn(&[f64]) -> Mat64 = match c.form {
        FormSpec::Generic => fx::generic_sphere_form,
        FormSpec::Vector => fx::vector_sphere_form,
        FormSpec::Height => height_form,
    };
    let mut integrals = Vec::new();
    for spec in &c.gauges {
        let (name, gauge): (&str, Arc<dyn Gauge>) = match spec {
            GaugeSpec::LeviCivita => ("levi-civita", fx::levi_civita()),
            GaugeSpec::Chart => ("stereographic-chart", fx::chart_gauge(&y)?),
        };
        let z = integrate_smooth_oneform(&form, &y, gauge.as_ref())?;
        integrals.push(IntegralRecord { gauge: name.into(), endpoint: z.values[z.len() - 1].clone(), integral: z });
    }
    let mut comparisons = Vec::new();
    for pair in integrals.windows(2) {
        let cmp = Comparison::of_paths(&pair[0].integral, &pair[1].integral);
        comparisons.push(report::ComparisonRecord {
            fixture: "integrate".into(),
            lhs: pair[0].gauge.clone(),
            rhs: pair[1].gauge.clone(),
            diff_sup: cmp.diff_sup,
            slope: None,
            pass: cmp.diff_sup <= GAUGE_AGREEMENT_TOL,
        });
    }
    let failures = comparisons.iter().filter(|c| !c.pass).map(|c| format!("{} vs {}", c.lhs, c.rhs)).collect();
    for i in &integrals {
        println!("integrate [{}]: {:?}", i.gauge, i.endpoint);
    }
    report::write_comparison_csv(&out.join("integrate-comparisons.csv"), &comparisons)?;
    report::write_json(&out.join("integrate.json"), &IntegrateReport { seed: g.seed.unwrap_or(DEFAULT_SEED), form: c.form, integrals, comparisons })?;
    Ok(Outcome { failures })
}

fn plane_field(mats: &[Vec<Vec<f64>>]) -> CliResult<ClosureField> {
    let d = mats.first().map(|m| m.len()).ok_or_else(|| invalid("custom field needs params.matrices"))?;
    if mats.iter().any(|m| m.len() != d || m.iter().any(|r| r.len() != d)) {
        return Err(invalid("params.matrices must all be square of the same size"));
    }
    let mats: Vec<Mat64> = mats.iter().map(|m| Mat64::from_rows(m)).collect();
    let k = mats.len();
    Ok(ClosureField::new("custom-linear", fx::plane(d), k, move |y, w| {
        let mut v = vec![0.0; y.len()];
        for (a, wi) in mats.iter().zip(w) {
            v = linalg::axpy(&v, *wi, &a.mul_vec(y));
        }
        v
    }))
}

pub fn build_field(manifold: ManifoldSpec, field: &config::FieldSpec) -> CliResult<Box<dyn ManifoldField>> {
    Ok(match (manifold, field.kind) {
        (ManifoldSpec::Sphere, FieldKind::Projection) => Box::new(ProjectionField::new(fx::sphere())),
        (ManifoldSpec::Sphere, FieldKind::LeftInvariant) => Box::new(RotationField::on_sphere(fx::sphere())),
        (ManifoldSpec::So3, FieldKind::LeftInvariant) => Box::new(RotationField::on_so3(fx::so3())),
        (ManifoldSpec::Plane, FieldKind::Custom) => Box::new(plane_field(&field.params.matrices)?),
        (m, k) => return Err(invalid(format!("field {k:?} is not available on {m:?}"))),
    })
}

#[derive(Serialize)]
struct RdeReport {
    seed: u64,
    field: String,
    #[serde(flatten)]
    solution: CrpRecord,
    chart_switches: Vec<ChartSwitch>,
    base_point_residual: f64,
}

fn rde(g: &GlobalArgs, out: &Path) -> CliResult<Outcome> {
    let c: config::RdeConfig = required(g, "rde")?;
    let field = build_field(c.manifold, &c.field)?;
    let rp = build_driver(&c.driver)?;
    let t = rp.times();
    let interval = c.horizon.unwrap_or((t[0], t[t.len() - 1]));
    let opts = ManifoldRdeOptions { retraction: c.scheme.retraction, ..Default::default() };
    let sol = rde_solve_manifold(field.as_ref(), rp, &c.y0, interval, &opts)?;
    let rep = RdeReport {
        seed: g.seed.unwrap_or(DEFAULT_SEED),
        field: field.name(),
        solution: sol.path.record(&format!("{:?}", c.driver)),
        chart_switches: sol.chart_switches,
        base_point_residual: sol.path.base_point_residual(),
    };
    println!("rde [{}]: y_T = {:?}, {} chart switches", rep.field, sol.path.last(), rep.chart_switches.len());
    report::write_json(&out.join("rde.json"), &rep)?;
    Ok(Outcome::default())
}

#[derive(Serialize)]
struct TransportReport {
    seed: u64,
    connection: String,
    g0: Mat64,
    holonomy: Mat64,
    holonomy_angle: f64,
    base: CrpRecord,
    fibers: Vec<Mat64>,
}

fn transport(g: &GlobalArgs, out: &Path) -> CliResult<Outcome> {
    let c: config::TransportConfig = required(g, "transport")?;
    let y = sphere_path(&c.path)?;
    let g0 = lie::exp(2, &[c.g0_angle]);
    let lift = parallel_translate_frame(&y, &FrameBundle::sphere(), &g0, &transport_options())?;
    let hol = lift.holonomy()?;
    let rep = TransportReport {
        seed: g.seed.unwrap_or(DEFAULT_SEED),
        connection: lift.connection.clone(),
        g0,
        holonomy_angle: hol[(1, 0)].atan2(hol[(0, 0)]),
        holonomy: hol,
        base: y.record(&format!("{:?}", c.path)),
        fibers: (0..lift.len()).map(|s| lift.fiber(s)).collect(),
    };
    println!("transport [{}]: holonomy angle {}", rep.connection, rep.holonomy_angle);
    report::write_json(&out.join("transport.json"), &rep)?;
    Ok(Outcome::default())
}

#[derive(Serialize)]
struct FixtureVerdict {
    fixture: String,
    gauge: Verification,
    chart: Verification,
    remainder_pass: bool,
    derivative_pass: bool,
    agree: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ratio_expected: Option<f64>,
}

#[derive(Serialize)]
struct VerifyReport {
    seed: u64,
    p: f64,
    fixtures: Vec<FixtureVerdict>,
}

const RATIO_EPS: f64 = 0.01;
const RATIO_TOL: f64 = 1e-9;

fn fixture_list(cli: &[String], from_config: Vec<String>, all: bool, known: &[&str]) -> Vec<String> {
    if all {
        return known.iter().map(|s| s.to_string()).collect();
    }
    let mut v = from_config;
    v.extend(cli.iter().cloned());
    v
}

fn check_known(names: &[String], known: &[&str]) -> CliResult<()> {
    match names.iter().find(|n| !known.contains(&n.as_str())) {
        Some(n) => Err(invalid(format!("unknown fixture `{n}`; known: {}", known.join(", ")))),
        None => Ok(()),
    }
}

fn verify(g: &GlobalArgs, out: &Path, cli_fixtures: &[String], all: bool) -> CliResult<Outcome> {
    use rayon::prelude::*;
    let c: config::FixtureListConfig = optional(g)?;
    let p = g.p.or(c.p).unwrap_or(2.0);
    let seed = g.seed.or(c.seed).unwrap_or(DEFAULT_SEED);
    let names = fixture_list(cli_fixtures, c.fixtures, all, &fx::CRP_FIXTURES);
    check_known(&names, &fx::CRP_FIXTURES)?;
    let verdicts = names
        .par_iter()
        .map(|name| -> CliResult<FixtureVerdict> {
            let (gauge, chart, full) = suites::verify_fixture(name, p)?;
            let variant = match name.as_str() {
                "example-6.7" => Some(Example67Variant::Shifted),
                "example-6.7-literal" => Some(Example67Variant::Literal),
                _ => None,
            };
            let ratio = variant.map(|v| suites::example_6_7_ratio(p, v, RATIO_EPS)).transpose()?;
            Ok(FixtureVerdict {
                fixture: name.clone(),
                agree: gauge.pass == chart.pass,
                gauge,
                chart,
                remainder_pass: full.remainder_pass,
                derivative_pass: full.derivative_pass,
                ratio: ratio.map(|r| r.0),
                ratio_expected: ratio.map(|r| r.1),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut failures = Vec::new();
    for v in &verdicts {
        let verdict = |b: bool| if b { "pass" } else { "fail" };
        let mut line = format!(
            "{}: gauge remainder-{} derivative-{} overall-{}, chart-{}",
            v.fixture,
            verdict(v.remainder_pass),
            verdict(v.derivative_pass),
            verdict(v.gauge.pass),
            verdict(v.chart.pass)
        );
        if let (Some(r), Some(e)) = (v.ratio, v.ratio_expected) {
            line.push_str(&format!(" ratio {r:.9}"));
            if (r - e).abs() > RATIO_TOL {
                failures.push(format!("{} ratio {r} != {e}", v.fixture));
            }
        }
        if !v.agree {
            failures.push(format!("{} gauge/chart disagree", v.fixture));
        }
        println!("{line}");
    }
    report::write_json(&out.join("verify.json"), &VerifyReport { seed, p, fixtures: verdicts })?;
    Ok(Outcome { failures })
}

#[derive(Serialize)]
struct ConvergenceBundle {
    seed: u64,
    levels: usize,
    studies: Vec<ConvergenceReport>,
}

const DEFAULT_LEVELS: usize = 5;

fn convergence_cmd(g: &GlobalArgs, out: &Path, cli_fixtures: &[String], all: bool) -> CliResult<Outcome> {
    use rayon::prelude::*;
    let c: config::FixtureListConfig = optional(g)?;
    let levels = g.levels.or(c.levels).unwrap_or(DEFAULT_LEVELS);
    let seed = g.seed.or(c.seed).unwrap_or(DEFAULT_SEED);
    let names = fixture_list(cli_fixtures, c.fixtures, all, &convergence::STUDIES);
    check_known(&names, &convergence::STUDIES)?;
    let mut studies = names.par_iter().map(|n| convergence::study(n, levels)).collect::<crp_core::Result<Vec<_>>>()?;
    let mut failures = Vec::new();
    for s in &mut studies {
        if g.deterministic {
            s.runtime = None;
        }
        println!("{}: slope {:.3} (target {:.3}), finest error {:e} {}", s.name, s.slope, s.target, s.finest(), if s.pass { "PASS" } else { "FAIL" });
        if !s.pass {
            failures.push(s.name.clone());
        }
        report::write_convergence_csv(&out.join(format!("{}.csv", s.name)), s)?;
    }
    report::write_json(&out.join("convergence.json"), &ConvergenceBundle { seed, levels, studies })?;
    Ok(Outcome { failures })
}

fn suite(g: &GlobalArgs, out: &Path, cli_criteria: &[String]) -> CliResult<Outcome> {
    let c: config::SuiteConfig = optional(g)?;
    let opts = SuiteOptions {
        seed: g.seed.or(c.seed).unwrap_or(DEFAULT_SEED),
        p: g.p.or(c.p).unwrap_or(2.0),
        deterministic: g.deterministic,
    };
    let mut keys: Vec<String> = c.criteria.unwrap_or_default();
    keys.extend(cli_criteria.iter().cloned());
    let ids: Vec<&str> = if keys.is_empty() {
        suites::CRITERIA.iter().map(|(id, _)| *id).collect()
    } else {
        keys.iter().map(|k| suites::criterion_id(k).ok_or_else(|| invalid(format!("unknown criterion `{k}`")))).collect::<CliResult<_>>()?
    };
    let reports: Vec<CriterionReport> = suites::run_criteria(&ids, &opts);
    let bundle = SuiteBundle::new(opts.seed, reports);
    for r in &bundle.criteria {
        println!("{}", r.summary_line());
    }
    report::write_bundle(out, &bundle)?;
    let failures = bundle.criteria.iter().filter(|r| !r.pass).map(|r| format!("{} {}", r.id, r.name)).collect();
    Ok(Outcome { failures })
}

/// Parses `args`, runs, and maps the result to an exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    if let Some(n) = cli.global.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("crp: cannot set up {n} worker threads: {e}");
        }
    }
    match run(&cli) {
        Ok(o) if o.failures.is_empty() => EXIT_PASS,
        Ok(o) => {
            for f in &o.failures {
                eprintln!("FAIL {f}");
            }
            EXIT_FAIL
        }
        Err(e) => {
            eprintln!("crp: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_global_flags_after_subcommand() {
        let cli = Cli::try_parse_from(["crp", "verify", "--fixture", "example-6.7", "--p", "2", "--deterministic"]).unwrap();
        assert!(cli.global.deterministic);
        assert_eq!(cli.global.p, Some(2.0));
        match cli.command {
            Command::Verify { fixtures, all } => assert_eq!((fixtures, all), (vec!["example-6.7".to_string()], false)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn custom_plane_field_is_linear() {
        let spec = config::FieldSpec {
            kind: FieldKind::Custom,
            params: config::FieldParams { matrices: vec![vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![vec![0.0, 1.0], vec![0.0, 0.0]]] },
        };
        let f = build_field(ManifoldSpec::Plane, &spec).unwrap();
        assert_eq!(f.eval(&[2.0, 3.0], &[1.0, 0.5]), vec![1.5, 2.0]);
        assert!(build_field(ManifoldSpec::So3, &spec).is_err());
    }

    #[test]
    fn unknown_fixture_is_a_config_error() {
        let e = check_known(&["nope".into()], &fx::CRP_FIXTURES).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_CONFIG);
    }
}
