//! Empirical convergence orders from dyadic refinement studies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Errors at or below this value are treated as exact zeros.
pub const ZERO_CLIP: f64 = 1e-16;

/// Slope tolerance applied to every order assertion.
pub const SLOPE_TOL: f64 = 0.25;

/// Differences below this level carry no asymptotic information; a study
/// whose errors never exceed it is reported as exact to rounding.
pub const ROUNDOFF_FLOOR: f64 = 1e-11;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    /// Least-squares slope of `log(error)` against `log(h)`;
    /// `f64::INFINITY` when every error is exact.
    pub slope: f64,
    /// Fitted constant `C` in `error ≈ C h^slope`.
    pub constant: f64,
    pub exact: bool,
    /// Slopes between consecutive levels (first entry is NaN).
    pub partial_slopes: Vec<f64>,
}

impl OrderFit {
    pub fn meets(&self, target: f64) -> bool {
        self.exact || self.slope >= target - SLOPE_TOL
    }
}

/// Fits `error ≈ C h^slope` over the supplied levels, ordered from coarse to
/// fine. The coarsest level is discarded before fitting.
pub fn estimate_order(errors: &[f64], hs: &[f64]) -> Result<OrderFit> {
    if errors.len() != hs.len() {
        return Err(Error::ShapeError(format!("{} errors for {} step sizes", errors.len(), hs.len())));
    }
    if errors.len() < 4 {
        return Err(Error::InsufficientLevels { got: errors.len() });
    }
    let partial_slopes = partial_slopes(errors, hs);
    if errors.iter().all(|&e| e.abs() <= ZERO_CLIP) {
        return Ok(OrderFit { slope: f64::INFINITY, constant: 0.0, exact: true, partial_slopes });
    }
    let pts: Vec<(f64, f64)> = errors
        .iter()
        .zip(hs)
        .skip(1)
        .map(|(&e, &h)| (h.ln(), e.abs().max(ZERO_CLIP).ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let constant = (my - slope * mx).exp();
    Ok(OrderFit { slope, constant, exact: false, partial_slopes })
}

/// Like [`estimate_order`], but studies whose errors all sit at the rounding
/// floor are flagged exact instead of producing a meaningless slope.
pub fn estimate_order_with_floor(errors: &[f64], hs: &[f64], floor: f64) -> Result<OrderFit> {
    let mut fit = estimate_order(errors, hs)?;
    if !fit.exact && errors.iter().all(|e| e.abs() <= floor) {
        fit.exact = true;
        fit.slope = f64::INFINITY;
    }
    Ok(fit)
}

fn partial_slopes(errors: &[f64], hs: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NAN];
    for i in 1..errors.len() {
        let e0 = errors[i - 1].abs().max(ZERO_CLIP);
        let e1 = errors[i].abs().max(ZERO_CLIP);
        out.push((e1 / e0).ln() / (hs[i] / hs[i - 1]).ln());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dyadic(levels: usize, start: i32) -> Vec<f64> {
        (0..levels).map(|i| 2f64.powi(-(start + i as i32))).collect()
    }

    #[test]
    fn exact_power_law() {
        let hs = dyadic(5, 3);
        let errs: Vec<f64> = hs.iter().map(|h| 3.0 * h * h).collect();
        let fit = estimate_order(&errs, &hs).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-9);
        assert!((fit.constant - 3.0).abs() < 1e-9);
    }

    #[test]
    fn cubic_with_noise_floor() {
        let hs = dyadic(4, 4);
        let errs: Vec<f64> = hs.iter().map(|h| 0.7 * h.powi(3) + 1e-15).collect();
        let fit = estimate_order(&errs, &hs).unwrap();
        assert!(fit.slope >= 2.9, "slope {}", fit.slope);
    }

    #[test]
    fn all_zero_is_exact() {
        let hs = dyadic(4, 1);
        let fit = estimate_order(&[0.0; 4], &hs).unwrap();
        assert!(fit.exact);
        assert!(fit.slope.is_infinite());
        assert!(fit.meets(100.0));
    }

    #[test]
    fn too_few_levels() {
        let err = estimate_order(&[1.0, 0.5, 0.25], &[1.0, 0.5, 0.25]).unwrap_err();
        assert_eq!(err, Error::InsufficientLevels { got: 3 });
    }

    #[test]
    fn rounding_floor_flags_exact() {
        let hs = dyadic(5, 2);
        let errs = [3e-14, 1e-14, 4e-14, 2e-14, 3e-14];
        let fit = estimate_order_with_floor(&errs, &hs, ROUNDOFF_FLOOR).unwrap();
        assert!(fit.exact);
    }
}
