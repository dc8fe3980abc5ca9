//! Rough integration by compensated Riemann sums.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::roughcore::controlled::ControlledPath;
use crate::roughcore::rough_path::RoughPath;
use crate::scalar::Scalar;

/// Local increment `α_s y_{s,t} + Σ_ij X_ij (α†e_i)(y†e_j)`.
///
/// `alpha` is the `m × n` matrix of `α_s`, `alpha_dag` is the flattened
/// `(m·n) × k` derivative (row-major over `(Ṽ, V)`), `ydag` is `n × k`.
pub fn local_term<T: Scalar>(alpha: &Mat<T>, alpha_dag: &Mat<T>, dy: &[T], ydag: &Mat<T>, area: &Mat<T>) -> Vec<T> {
    let (m, n) = alpha.shape();
    let k = area.rows();
    let mut out = alpha.mul_vec(dy);
    for i in 0..k {
        for j in 0..k {
            let xij = area[(i, j)];
            if xij == T::zero() {
                continue;
            }
            for r in 0..m {
                let mut acc = T::zero();
                for c in 0..n {
                    acc = acc + alpha_dag[(r * n + c, i)] * ydag[(c, j)];
                }
                out[r] = out[r] + xij * acc;
            }
        }
    }
    out
}

struct Prepared<T> {
    m: usize,
    n: usize,
    alphas: Vec<Mat<T>>,
}

fn prepare<T: Scalar>(alpha: &ControlledPath<T>, y: &ControlledPath<T>, rp: &RoughPath<T>) -> Result<Prepared<T>> {
    alpha.check_grid(rp)?;
    y.check_grid(rp)?;
    let n = y.dim();
    if n == 0 || !alpha.dim().is_multiple_of(n) {
        return Err(Error::ShapeError(format!("integrand of size {} does not act on V = R^{n}", alpha.dim())));
    }
    let m = alpha.dim() / n;
    let alphas = alpha.values.iter().map(|a| Mat::from_row_slice(m, n, a)).collect();
    Ok(Prepared { m, n, alphas })
}

/// `z = ∫ α dy` with `z_0 = 0` and `z† = α ∘ y†`.
pub fn rough_integrate<T: Scalar>(alpha: &ControlledPath<T>, y: &ControlledPath<T>, rp: &RoughPath<T>) -> Result<ControlledPath<T>> {
    let pre = prepare(alpha, y, rp)?;
    let len = rp.times().len();
    let mut values = Vec::with_capacity(len);
    let mut acc = vec![T::zero(); pre.m];
    values.push(acc.clone());
    for i in 0..len - 1 {
        let dy = linalg::sub(&y.values[i + 1], &y.values[i]);
        let term = local_term(&pre.alphas[i], &alpha.gubinelli[i], &dy, &y.gubinelli[i], &rp.areas()[i]);
        acc = linalg::add(&acc, &term);
        values.push(acc.clone());
    }
    let gubinelli = (0..len).map(|i| pre.alphas[i].matmul(&y.gubinelli[i])).collect();
    debug_assert_eq!(pre.n, y.dim());
    Ok(ControlledPath { times: rp.times().to_vec(), values, gubinelli })
}

/// Local term `Ξ_{t_i,t_j}` between arbitrary grid nodes.
pub fn local_term_pair<T: Scalar>(
    alpha: &ControlledPath<T>,
    y: &ControlledPath<T>,
    rp: &RoughPath<T>,
    i: usize,
    j: usize,
) -> Result<Vec<T>> {
    let pre = prepare(alpha, y, rp)?;
    let (_, area) = rp.increment(i, j);
    let dy = linalg::sub(&y.values[j], &y.values[i]);
    Ok(local_term(&pre.alphas[i], &alpha.gubinelli[i], &dy, &y.gubinelli[i], &area))
}

/// Largest midpoint defect `|Ξ_{s,u} − Ξ_{s,t} − Ξ_{t,u}|` over blocks of
/// `2·m` fine steps, for each `m` in `half_widths`.
pub fn almost_additivity_defects<T: Scalar>(
    alpha: &ControlledPath<T>,
    y: &ControlledPath<T>,
    rp: &RoughPath<T>,
    half_widths: &[usize],
) -> Result<Vec<f64>> {
    let pre = prepare(alpha, y, rp)?;
    let xi = |i: usize, j: usize| {
        let (_, area) = rp.increment(i, j);
        let dy = linalg::sub(&y.values[j], &y.values[i]);
        local_term(&pre.alphas[i], &alpha.gubinelli[i], &dy, &y.gubinelli[i], &area)
    };
    let last = rp.steps();
    Ok(half_widths
        .iter()
        .map(|&m| {
            let mut worst = 0.0f64;
            let mut s = 0;
            while s + 2 * m <= last {
                let whole = xi(s, s + 2 * m);
                let parts = linalg::add(&xi(s, s + m), &xi(s + m, s + 2 * m));
                worst = worst.max(linalg::norm(&linalg::sub(&whole, &parts)).to_f64_lossy());
                s += 2 * m;
            }
            worst
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roughcore::rough_path::{lift_smooth, pure_area_driver, uniform_grid};

    #[test]
    fn identity_integrand_returns_increment() {
        let grid = uniform_grid(0.0, 1.0, 16);
        let rp = lift_smooth(|t: f64| vec![t.sin(), t.cos()], &grid, 8).unwrap();
        let y = ControlledPath::from_driver(&rp);
        let alpha = ControlledPath::new(
            grid.clone(),
            vec![vec![1.0, 0.0, 0.0, 1.0]; grid.len()],
            vec![Mat::zeros(4, 2); grid.len()],
        )
        .unwrap();
        let z = rough_integrate(&alpha, &y, &rp).unwrap();
        let (x, _) = rp.increment(0, 16);
        assert!(linalg::dist(z.last(), &x) < 1e-15);
    }

    #[test]
    fn integral_of_t_dt() {
        let n = 256;
        let grid = uniform_grid(0.0, 1.0, n);
        let rp = lift_smooth(|t: f64| vec![t], &grid, 4).unwrap();
        let y = ControlledPath::from_driver(&rp);
        let alpha = ControlledPath::new(grid.clone(), rp.values().to_vec(), vec![Mat::identity(1); n + 1]).unwrap();
        let z = rough_integrate(&alpha, &y, &rp).unwrap();
        // oracle: composite trapezoid of t on a uniform grid is exact
        let oracle: f64 = (0..n).map(|i| 0.5 * (grid[i] + grid[i + 1]) * (grid[i + 1] - grid[i])).sum();
        assert!((z.last()[0] - oracle).abs() < 1e-10);
        assert!((z.last()[0] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn pure_area_with_constant_integrand_vanishes() {
        let grid = uniform_grid(0.0, 1.0, 8);
        let rp = pure_area_driver(1.0, &grid).unwrap();
        let y = ControlledPath::from_driver(&rp);
        let alpha = ControlledPath::new(grid.clone(), vec![vec![1.0, 2.0, 3.0, 4.0]; 9], vec![Mat::zeros(4, 2); 9]).unwrap();
        let z = rough_integrate(&alpha, &y, &rp).unwrap();
        assert_eq!(z.last(), &[0.0, 0.0]);
    }

    #[test]
    fn shape_errors_are_reported() {
        let grid = uniform_grid(0.0, 1.0, 4);
        let rp = lift_smooth(|t: f64| vec![t, t], &grid, 4).unwrap();
        let y = ControlledPath::from_driver(&rp);
        let alpha = ControlledPath::new(grid.clone(), vec![vec![1.0, 0.0, 0.0]; 5], vec![Mat::zeros(3, 2); 5]).unwrap();
        assert!(matches!(rough_integrate(&alpha, &y, &rp), Err(Error::ShapeError(_))));
        let other = lift_smooth(|t: f64| vec![t, t], &uniform_grid(0.0, 2.0, 4), 4).unwrap();
        assert!(matches!(rough_integrate(&alpha, &y, &other), Err(Error::GridMismatch(_))));
    }
}
