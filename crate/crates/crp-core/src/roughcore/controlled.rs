//! Flat controlled paths `(y, y†)` and their verifier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::roughcore::rough_path::RoughPath;
use crate::scalar::{lit, Scalar};

/// Strides used by every refinement-stability check, coarse to fine.
pub const STABILITY_STRIDES: [usize; 4] = [8, 4, 2, 1];

/// Numerators below this are counted as zero when `ω` vanishes.
pub const ZERO_RATIO_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlledPath<T> {
    pub times: Vec<T>,
    pub values: Vec<Vec<T>>,
    /// `y†(t_i)` as a `dim V × k` matrix.
    pub gubinelli: Vec<Mat<T>>,
}

impl<T: Scalar> ControlledPath<T> {
    pub fn new(times: Vec<T>, values: Vec<Vec<T>>, gubinelli: Vec<Mat<T>>) -> Result<Self> {
        if values.len() != times.len() || gubinelli.len() != times.len() {
            return Err(Error::ShapeError("controlled path arrays differ in length".into()));
        }
        let n = values[0].len();
        if values.iter().any(|v| v.len() != n) || gubinelli.iter().any(|g| g.rows() != n) {
            return Err(Error::ShapeError("inconsistent value dimension".into()));
        }
        Ok(ControlledPath { times, values, gubinelli })
    }

    /// The driver itself, `(x, I)`.
    pub fn from_driver(rp: &RoughPath<T>) -> Self {
        let k = rp.dim();
        ControlledPath {
            times: rp.times().to_vec(),
            values: rp.values().to_vec(),
            gubinelli: vec![Mat::identity(k); rp.times().len()],
        }
    }

    pub fn constant(times: Vec<T>, value: Vec<T>, k: usize) -> Self {
        let n = value.len();
        let len = times.len();
        ControlledPath { times, values: vec![value; len], gubinelli: vec![Mat::zeros(n, k); len] }
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &[T] {
        &self.values[self.values.len() - 1]
    }

    /// `y_T − y_0`.
    pub fn total_increment(&self) -> Vec<T> {
        linalg::sub(self.last(), &self.values[0])
    }

    pub fn check_grid(&self, rp: &RoughPath<T>) -> Result<()> {
        if self.times.len() != rp.times().len() {
            return Err(Error::GridMismatch(format!("{} nodes against {}", self.times.len(), rp.times().len())));
        }
        let tol = lit::<T>(1e-12);
        for (i, (a, b)) in self.times.iter().zip(rp.times()).enumerate() {
            if (*a - *b).abs() > tol * (T::one() + b.abs()) {
                return Err(Error::GridMismatch(format!("node {i}: {a} against {b}")));
            }
        }
        if self.gubinelli.iter().any(|g| g.cols() != rp.dim()) {
            return Err(Error::ShapeError("Gubinelli derivative does not act on the driver space".into()));
        }
        Ok(())
    }

    pub fn subsample(&self, stride: usize) -> Self {
        let idx: Vec<usize> = (0..self.times.len()).step_by(stride).collect();
        ControlledPath {
            times: idx.iter().map(|&i| self.times[i]).collect(),
            values: idx.iter().map(|&i| self.values[i].clone()).collect(),
            gubinelli: idx.iter().map(|&i| self.gubinelli[i].clone()).collect(),
        }
    }

    pub fn restrict(&self, i0: usize, i1: usize) -> Self {
        ControlledPath {
            times: self.times[i0..=i1].to_vec(),
            values: self.values[i0..=i1].to_vec(),
            gubinelli: self.gubinelli[i0..=i1].to_vec(),
        }
    }

    /// Joins two paths sharing the node `self.last == other.first`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        let t = self.times[self.times.len() - 1];
        let tol = lit::<T>(1e-12) * (T::one() + t.abs());
        if (other.times[0] - t).abs() > tol {
            return Err(Error::GridMismatch(format!("paths meet at {t} and {}", other.times[0])));
        }
        if linalg::dist(self.last(), &other.values[0]) > lit::<T>(1e-9) * (T::one() + linalg::norm(self.last())) {
            return Err(Error::ShapeError("paths do not share their junction value".into()));
        }
        let mut out = self.clone();
        out.times.extend_from_slice(&other.times[1..]);
        out.values.extend_from_slice(&other.values[1..]);
        out.gubinelli.extend_from_slice(&other.gubinelli[1..]);
        Ok(out)
    }
}

/// `num / ω^e`, with the convention `0/0 = 0` and `x/0 = ∞`.
pub fn ratio(num: f64, omega: f64, exponent: f64) -> f64 {
    if omega > 0.0 {
        num / omega.powf(exponent)
    } else if num <= ZERO_RATIO_TOL {
        0.0
    } else {
        f64::INFINITY
    }
}

/// `true` when every constant is finite and the finest one stays within
/// a factor two of the coarsest.
pub fn refinement_stable(constants: &[f64]) -> bool {
    let (Some(&first), Some(&last)) = (constants.first(), constants.last()) else {
        return false;
    };
    constants.iter().all(|c| c.is_finite()) && last <= 2.0 * first + 1e-10
}

/// Constants of a controlled-path type inequality at one mesh.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelConstants {
    pub stride: usize,
    pub c_remainder: f64,
    pub c_derivative: f64,
    pub pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrpReport {
    #[serde(rename = "C2")]
    pub c_remainder: f64,
    #[serde(rename = "C1")]
    pub c_derivative: f64,
    /// Largest probed time gap (`∞` when all pairs are probed).
    pub delta: f64,
    pub pairs_probed: usize,
    pub remainder_pass: bool,
    pub derivative_pass: bool,
    pub pass: bool,
    pub levels: Vec<LevelConstants>,
}

impl CrpReport {
    pub fn from_levels(levels: Vec<LevelConstants>, delta: f64) -> Self {
        let fine = *levels.last().expect("at least one level");
        let rem: Vec<f64> = levels.iter().map(|l| l.c_remainder).collect();
        let der: Vec<f64> = levels.iter().map(|l| l.c_derivative).collect();
        let remainder_pass = refinement_stable(&rem);
        let derivative_pass = refinement_stable(&der);
        CrpReport {
            c_remainder: fine.c_remainder,
            c_derivative: fine.c_derivative,
            delta,
            pairs_probed: fine.pairs,
            remainder_pass,
            derivative_pass,
            pass: remainder_pass && derivative_pass,
            levels,
        }
    }
}

/// Smallest constants for `|y_{s,t} − y_s† x_{s,t}| ≤ C ω^{2/p}` and
/// `|y_t† − y_s†| ≤ C ω^{1/p}` over all pairs with `t − s ≤ delta`.
pub fn crp_constants<T: Scalar>(y: &ControlledPath<T>, rp: &RoughPath<T>, delta: f64) -> LevelConstants {
    let p = rp.p().to_f64_lossy();
    let n = rp.times().len();
    let mut c2 = 0.0f64;
    let mut c1 = 0.0f64;
    let mut pairs = 0usize;
    for i in 0..n - 1 {
        let ti = rp.times()[i].to_f64_lossy();
        rp.for_each_from(i, n - 1, |j, x, _| {
            if rp.times()[j].to_f64_lossy() - ti > delta * (1.0 + 1e-12) {
                return;
            }
            pairs += 1;
            let w = rp.omega(i, j).to_f64_lossy();
            let pred = y.gubinelli[i].mul_vec(x);
            let rem = linalg::norm(&linalg::sub(&linalg::sub(&y.values[j], &y.values[i]), &pred)).to_f64_lossy();
            let der = y.gubinelli[j].sub(&y.gubinelli[i]).norm().to_f64_lossy();
            c2 = c2.max(ratio(rem, w, 2.0 / p));
            c1 = c1.max(ratio(der, w, 1.0 / p));
        });
    }
    LevelConstants { stride: 1, c_remainder: c2, c_derivative: c1, pairs }
}

/// Def-style verifier over every grid pair, with refinement stability
/// measured on strides 8, 4, 2, 1 of the supplied mesh.
pub fn verify_crp<T: Scalar>(y: &ControlledPath<T>, rp: &RoughPath<T>) -> Result<CrpReport> {
    verify_crp_within(y, rp, f64::INFINITY)
}

/// [`verify_crp`] restricted to pairs with `t − s ≤ delta`.
pub fn verify_crp_within<T: Scalar>(y: &ControlledPath<T>, rp: &RoughPath<T>, delta: f64) -> Result<CrpReport> {
    y.check_grid(rp)?;
    let levels = STABILITY_STRIDES
        .iter()
        .filter(|&&s| rp.steps() / s >= 2)
        .map(|&s| {
            let mut c = crp_constants(&y.subsample(s), &rp.subsample(s), delta);
            c.stride = s;
            c
        })
        .collect();
    Ok(CrpReport::from_levels(levels, delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roughcore::rough_path::{lift_smooth, uniform_grid};

    #[test]
    fn driver_is_controlled_by_itself() {
        let grid = uniform_grid(0.0, 1.0, 64);
        let rp = lift_smooth(|t: f64| vec![t.sin(), t * t], &grid, 8).unwrap();
        let y = ControlledPath::from_driver(&rp);
        let rep = verify_crp(&y, &rp).unwrap();
        assert!(rep.c_remainder < 1e-12);
        assert_eq!(rep.c_derivative, 0.0);
        assert!(rep.pass);
    }

    #[test]
    fn constant_path_has_zero_constants() {
        let grid = uniform_grid(0.0, 1.0, 32);
        let rp = lift_smooth(|t: f64| vec![t.cos()], &grid, 8).unwrap();
        let y = ControlledPath::constant(grid, vec![2.0, -1.0], 1);
        let rep = verify_crp(&y, &rp).unwrap();
        assert_eq!((rep.c_remainder, rep.c_derivative), (0.0, 0.0));
    }

    #[test]
    fn ratio_conventions() {
        assert_eq!(ratio(0.0, 0.0, 1.0), 0.0);
        assert!(ratio(1e-6, 0.0, 1.0).is_infinite());
        assert_eq!(ratio(2.0, 4.0, 0.5), 1.0);
    }

    #[test]
    fn stability_rule() {
        assert!(refinement_stable(&[1.0, 1.2, 1.9]));
        assert!(!refinement_stable(&[1.0, 2.5]));
        assert!(!refinement_stable(&[1.0, f64::INFINITY, 1.0]));
    }

    #[test]
    fn concat_joins_at_shared_node() {
        let a = ControlledPath::constant(vec![0.0, 0.5], vec![1.0], 1);
        let b = ControlledPath::constant(vec![0.5, 1.0], vec![1.0], 1);
        let c = a.concat(&b).unwrap();
        assert_eq!(c.times, vec![0.0, 0.5, 1.0]);
        let bad = ControlledPath::constant(vec![0.6, 1.0], vec![1.0], 1);
        assert!(a.concat(&bad).is_err());
    }
}
