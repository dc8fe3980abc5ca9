//! Dyadic refinement studies and their reports.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crp_core::linalg::{self, Mat64};
use crp_core::mintegrate::{gauge_additivity_defects, integrate_smooth_oneform, oneform_from_smooth, Comparison};
use crp_core::order::{estimate_order_with_floor, ROUNDOFF_FLOOR, SLOPE_TOL};
use crp_core::roughcore::{almost_additivity_defects, ControlledPath};
use crp_core::transport::{maurer_cartan_check, roll_unroll_defect, transport_options, unroll_roll_defect, FrameBundle, MatrixGroup};
use crp_core::{Error, Result};

use crate::fixtures::{self as fx};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub level: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub h: f64,
    pub error: f64,
    pub slope_partial: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub name: String,
    pub levels: Vec<LevelRow>,
    pub slope: f64,
    pub intercept: f64,
    pub exact: bool,
    pub target: f64,
    pub cap: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime: Option<f64>,
}

impl ConvergenceReport {
    /// Fits the errors (coarse to fine); passes when the order meets `target` and the finest error is at most `cap`.
    pub fn from_errors(name: &str, ns: &[usize], hs: &[f64], errors: &[f64], target: f64, cap: f64) -> Result<Self> {
        let fit = estimate_order_with_floor(errors, hs, ROUNDOFF_FLOOR)?;
        let finest = *errors.last().unwrap_or(&f64::NAN);
        let levels = (0..errors.len())
            .map(|i| LevelRow { level: i, n: ns[i], h: hs[i], error: errors[i], slope_partial: fit.partial_slopes[i] })
            .collect();
        let pass = errors.iter().all(|e| e.is_finite()) && fit.meets(target) && finest <= cap;
        Ok(ConvergenceReport {
            name: name.into(),
            levels,
            slope: fit.slope,
            intercept: fit.constant,
            exact: fit.exact,
            target,
            cap,
            pass,
            runtime: None,
        })
    }

    pub fn finest(&self) -> f64 {
        self.levels.last().map(|l| l.error).unwrap_or(f64::NAN)
    }

    /// Slope bound actually applied.
    pub fn threshold(&self) -> f64 {
        self.target - SLOPE_TOL
    }
}

/// Errors for each step count of a mesh family on `[0, t1]`.
fn mesh_study(name: &str, ns: &[usize], t1: f64, target: f64, cap: f64, err: impl Fn(usize) -> Result<f64>) -> Result<ConvergenceReport> {
    let errors = ns.iter().map(|&n| err(n)).collect::<Result<Vec<_>>>()?;
    let hs: Vec<f64> = ns.iter().map(|&n| t1 / n as f64).collect();
    ConvergenceReport::from_errors(name, ns, &hs, &errors, target, cap)
}

/// Defects at half-widths `m` on one fine mesh; `h` is the full block `2m·dt`.
fn defect_study(name: &str, n: usize, t1: f64, half_widths: &[usize], defects: Vec<f64>, target: f64, cap: f64) -> Result<ConvergenceReport> {
    let dt = t1 / n as f64;
    let hs: Vec<f64> = half_widths.iter().map(|&m| 2.0 * m as f64 * dt).collect();
    let ns: Vec<usize> = half_widths.iter().map(|&m| n / (2 * m)).collect();
    ConvergenceReport::from_errors(name, &ns, &hs, &defects, target, cap)
}

const SEWING_HALF_WIDTHS: [usize; 5] = [32, 16, 8, 4, 2];

pub const STUDIES: [&str; 13] = [
    "sphere-projection-rde",
    "sewing-flat-smooth",
    "sewing-flat-area",
    "sewing-gauge-sphere",
    "sewing-gauge-rolled-area",
    "gauge-independence-sphere",
    "gauge-independence-rolled-area",
    "roll-unroll-latitude",
    "unroll-roll-smooth",
    "unroll-roll-area",
    "maurer-cartan-so3",
    "rolled-integral-geodesic",
    "rolled-integral-sphere-curve",
];

/// Runs a named study with `levels` dyadic levels (at least 4).
pub fn study(name: &str, levels: usize) -> Result<ConvergenceReport> {
    if levels < 4 {
        return Err(Error::InsufficientLevels { got: levels });
    }
    let t0 = std::time::Instant::now();
    let mut rep = match name {
        "sphere-projection-rde" => {
            let oracle = fx::projection_ode_oracle(&fx::SPHERE_Y0, 1.0, 1e-5);
            mesh_study(name, &fx::dyadic(32, levels), 1.0, 2.0, 1e-4, |n| Ok(linalg::dist(fx::projection_rde(n, 1.0)?.last(), &oracle)))?
        }
        "sewing-flat-smooth" => {
            let n = 1024;
            let rp = fx::curved_driver(n, 1.0)?;
            let y = ControlledPath::from_driver(&rp);
            let alpha = fx::smooth_integrand(fx::generic_sphere_form, &y);
            let hw = half_widths(levels);
            let d = almost_additivity_defects(&alpha, &y, &rp, &hw)?;
            defect_study(name, n, 1.0, &hw, d, 3.0 / rp.p(), 1e-6)?
        }
        "sewing-flat-area" => {
            let n = 1024;
            let rp = fx::area_driver(n, 1.0)?;
            let y = ControlledPath::from_driver(&rp);
            let alpha = fx::smooth_integrand(fx::planar_form, &y);
            let hw = half_widths(levels);
            let d = almost_additivity_defects(&alpha, &y, &rp, &hw)?;
            defect_study(name, n, 1.0, &hw, d, 3.0 / rp.p(), 1e-4)?
        }
        "sewing-gauge-sphere" => {
            let n = 1024;
            let y = fx::sphere_curve(n)?;
            let g = fx::levi_civita();
            let a = oneform_from_smooth(&fx::generic_sphere_form, &y, g.as_ref())?;
            let hw = half_widths(levels);
            let d = gauge_additivity_defects(&a, &y, g.as_ref(), &hw)?;
            defect_study(name, n, 2.0, &hw, d, 3.0 / y.driver.p(), 1e-6)?
        }
        "sewing-gauge-rolled-area" => {
            let n = 1024;
            let y = fx::rolled_area(n, 1.0)?;
            let g = fx::levi_civita();
            let a = oneform_from_smooth(&fx::generic_sphere_form, &y, g.as_ref())?;
            let hw = half_widths(levels);
            let d = gauge_additivity_defects(&a, &y, g.as_ref(), &hw)?;
            defect_study(name, n, 1.0, &hw, d, 3.0 / y.driver.p(), 1e-4)?
        }
        "gauge-independence-sphere" => mesh_study(name, &fx::dyadic(64, levels), 2.0, global_target(1.0), 1e-5, |n| {
            gauge_independence(&fx::sphere_curve(n)?).map(|c| c.diff_sup)
        })?,
        "gauge-independence-rolled-area" => mesh_study(name, &fx::dyadic(64, levels), 1.0, global_target(2.0), 1e-3, |n| {
            gauge_independence(&fx::rolled_area(n, 1.0)?).map(|c| c.diff_sup)
        })?,
        "roll-unroll-latitude" => mesh_study(name, &fx::dyadic(32, levels), 2.0, global_target(1.0), 1e-4, |n| {
            roll_unroll_defect(&fx::clock_latitude(n, 1.0, 2.0)?, &FrameBundle::sphere(), &Mat64::identity(2), &transport_options())
        })?,
        "unroll-roll-smooth" => mesh_study(name, &fx::dyadic(32, levels), 1.0, global_target(1.0), 1e-4, |n| {
            let rp = fx::lifted_plane_curve(n)?;
            let z = ControlledPath::from_driver(&rp);
            unroll_roll_defect(&z, rp, &FrameBundle::sphere(), &fx::ROLL_Y0, &Mat64::identity(2), &transport_options())
        })?,
        "unroll-roll-area" => mesh_study(name, &fx::dyadic(32, levels), 1.0, global_target(2.0), 1e-2, |n| {
            let rp = fx::area_driver(n, 1.0)?;
            let z = ControlledPath::from_driver(&rp);
            unroll_roll_defect(&z, rp, &FrameBundle::sphere(), &fx::ROLL_Y0, &Mat64::identity(2), &transport_options())
        })?,
        "maurer-cartan-so3" => mesh_study(name, &fx::dyadic(32, levels), 1.0, global_target(1.0), 1e-4, |n| {
            let rp = fx::skew_driver(n)?;
            let z = ControlledPath::from_driver(&rp);
            let g = crp_core::transport::group_rde(&z, rp, &Mat64::identity(3), MatrixGroup::Orthogonal(3), &transport_options())?;
            Ok(maurer_cartan_check(&g, &z, MatrixGroup::Orthogonal(3))?.diff_sup)
        })?,
        "rolled-integral-geodesic" => mesh_study(name, &fx::dyadic(32, levels), PI / 2.0, global_target(1.0), 1e-4, |n| {
            rolled_integral(&fx::great_circle(n, 0.4, PI / 2.0)?).map(|c| c.diff_sup)
        })?,
        "rolled-integral-sphere-curve" => mesh_study(name, &fx::dyadic(64, levels), 2.0, global_target(1.0), 1e-4, |n| {
            rolled_integral(&fx::sphere_curve(n)?).map(|c| c.diff_sup)
        })?,
        other => return Err(Error::DomainError(format!("unknown convergence study {other}"))),
    };
    rep.runtime = Some(t0.elapsed().as_secs_f64());
    Ok(rep)
}

/// Global order `3/p − 1` of sewn sums.
pub fn global_target(p: f64) -> f64 {
    3.0 / p - 1.0
}

fn half_widths(levels: usize) -> Vec<usize> {
    let top = SEWING_HALF_WIDTHS[0] << levels.saturating_sub(SEWING_HALF_WIDTHS.len());
    (0..levels).map(|i| top >> i).filter(|&m| m >= 1).collect()
}

/// `∫α(dy)` in the Levi-Civita gauge against the stereographic chart gauge.
pub fn gauge_independence(y: &crp_core::mcrp::ManifoldControlledPath) -> Result<Comparison> {
    let lhs = integrate_smooth_oneform(&fx::generic_sphere_form, y, fx::levi_civita().as_ref())?;
    let rhs = integrate_smooth_oneform(&fx::generic_sphere_form, y, fx::chart_gauge(y)?.as_ref())?;
    Ok(Comparison::of_paths(&lhs, &rhs))
}

/// Rolled-integral check for the vector one-form on a sphere path.
pub fn rolled_integral(y: &crp_core::mcrp::ManifoldControlledPath) -> Result<Comparison> {
    let b = FrameBundle::sphere();
    let alpha = oneform_from_smooth(&fx::vector_sphere_form, y, b.gauge.as_ref())?;
    crp_core::transport::rolled_integral_check(&alpha, y, &b, &Mat64::identity(2), &transport_options())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_from_synthetic_errors() {
        let ns = [16, 32, 64, 128];
        let hs: Vec<f64> = ns.iter().map(|&n| 1.0 / n as f64).collect();
        let errs: Vec<f64> = hs.iter().map(|h| 3.0 * h * h).collect();
        let r = ConvergenceReport::from_errors("q", &ns, &hs, &errs, 2.0, 1e-3).unwrap();
        assert!((r.slope - 2.0).abs() < 1e-9 && r.pass);
        assert!((r.intercept - 3.0).abs() < 1e-8);
        let r = ConvergenceReport::from_errors("q", &ns, &hs, &errs, 2.0, 1e-5).unwrap();
        assert!(!r.pass, "cap on the finest error");
    }

    #[test]
    fn half_widths_extend_for_more_levels() {
        assert_eq!(half_widths(4), vec![32, 16, 8, 4]);
        assert_eq!(half_widths(6), vec![64, 32, 16, 8, 4, 2]);
    }
}
