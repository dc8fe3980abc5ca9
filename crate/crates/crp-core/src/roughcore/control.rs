use serde::{Deserialize, Serialize};

use crate::linalg::Mat;
use crate::scalar::{lit, Scalar};

/// How `ω` is represented on the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ControlKind<T> {
    /// `ω(s,t) = scale · (t − s)`.
    TimeScale { scale: T },
    /// Additive control `ω(t_i,t_j) = clock_j − clock_i` from a nondecreasing clock.
    Clock { clock: Vec<T> },
    /// Full table of `ω(t_i,t_j)` for `i ≤ j`.
    Table { table: Mat<T> },
}

/// A superadditive control together with the roughness exponent `p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Control<T> {
    #[serde(flatten)]
    pub kind: ControlKind<T>,
    pub p: T,
}

impl<T: Scalar> Control<T> {
    pub fn time_scale(scale: T, p: T) -> Self {
        Control { kind: ControlKind::TimeScale { scale }, p }
    }

    pub fn clock(clock: Vec<T>, p: T) -> Self {
        Control { kind: ControlKind::Clock { clock }, p }
    }

    pub fn table(table: Mat<T>, p: T) -> Self {
        Control { kind: ControlKind::Table { table }, p }
    }

    /// `ω(t_i, t_j)` for grid indices `i ≤ j`.
    pub fn omega(&self, times: &[T], i: usize, j: usize) -> T {
        if i == j {
            return T::zero();
        }
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        match &self.kind {
            ControlKind::TimeScale { scale } => *scale * (times[j] - times[i]),
            ControlKind::Clock { clock } => clock[j] - clock[i],
            ControlKind::Table { table } => table[(i, j)],
        }
    }

    /// Control restricted to every `stride`-th grid node.
    pub fn subsample(&self, stride: usize, n_nodes: usize) -> Self {
        let idx: Vec<usize> = (0..n_nodes).step_by(stride).collect();
        let kind = match &self.kind {
            ControlKind::TimeScale { scale } => ControlKind::TimeScale { scale: *scale },
            ControlKind::Clock { clock } => ControlKind::Clock { clock: idx.iter().map(|&i| clock[i]).collect() },
            ControlKind::Table { table } => {
                ControlKind::Table { table: Mat::from_fn(idx.len(), idx.len(), |a, b| table[(idx[a], idx[b])]) }
            }
        };
        Control { kind, p: self.p }
    }

    /// Control restricted to grid nodes `i0..=i1`.
    pub fn restrict(&self, i0: usize, i1: usize) -> Self {
        let kind = match &self.kind {
            ControlKind::TimeScale { scale } => ControlKind::TimeScale { scale: *scale },
            ControlKind::Clock { clock } => ControlKind::Clock { clock: clock[i0..=i1].to_vec() },
            ControlKind::Table { table } => {
                ControlKind::Table { table: Mat::from_fn(i1 - i0 + 1, i1 - i0 + 1, |a, b| table[(i0 + a, i0 + b)]) }
            }
        };
        Control { kind, p: self.p }
    }

    /// Largest violation of `ω(s,t) + ω(t,u) ≤ ω(s,u) + 1e-12·max(1, ω(s,u))`
    /// over all grid triples, together with diagonal and monotonicity defects.
    pub fn check(&self, times: &[T]) -> ControlCheck {
        let n = times.len();
        let mut superadditivity = 0.0f64;
        let mut monotonicity = 0.0f64;
        let mut diagonal = 0.0f64;
        for i in 0..n {
            diagonal = diagonal.max(self.omega(times, i, i).abs().to_f64_lossy());
            for j in i..n {
                let wij = self.omega(times, i, j);
                if j + 1 < n {
                    let grow = wij - self.omega(times, i, j + 1);
                    monotonicity = monotonicity.max(grow.to_f64_lossy());
                }
                for k in j..n {
                    let wik = self.omega(times, i, k);
                    let slack = lit::<T>(1e-12) * wik.max(T::one());
                    let v = wij + self.omega(times, j, k) - wik - slack;
                    superadditivity = superadditivity.max(v.to_f64_lossy());
                }
            }
        }
        ControlCheck { diagonal, superadditivity, monotonicity }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlCheck {
    pub diagonal: f64,
    /// Positive part of the worst superadditivity violation (0 when valid).
    pub superadditivity: f64,
    pub monotonicity: f64,
}

impl ControlCheck {
    pub fn holds(&self) -> bool {
        self.diagonal == 0.0 && self.superadditivity <= 0.0 && self.monotonicity <= 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_scale_is_additive() {
        let times: Vec<f64> = (0..9).map(|i| i as f64 * 0.125).collect();
        let c = Control::time_scale(2.0, 1.0);
        assert!(c.check(&times).holds());
        assert!((c.omega(&times, 2, 6) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn clock_control_with_flat_start() {
        let times: Vec<f64> = (0..21).map(|i| i as f64 * 0.1).collect();
        let clock: Vec<f64> = times.iter().map(|&t| t.max(1.0)).collect();
        let c = Control::clock(clock, 2.0);
        assert!(c.check(&times).holds());
        assert_eq!(c.omega(&times, 0, 10), 0.0);
        assert!((c.omega(&times, 0, 15) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn subadditive_table_is_rejected() {
        let times = [0.0, 0.5, 1.0];
        let table = Mat::from_fn(3, 3, |i, j| if j > i { ((times[j] - times[i]) as f64).sqrt() } else { 0.0 });
        let c = Control::table(table, 2.0);
        assert!(c.check(&times).superadditivity > 0.0);
    }
}
