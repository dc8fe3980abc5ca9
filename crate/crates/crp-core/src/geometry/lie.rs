//! `SO(2)` and `SO(3)` helpers in vector coordinates of the Lie algebra.

use crate::linalg::{self, Mat64};

/// Dimension of `so(n)` for `n ∈ {2, 3}`.
pub fn algebra_dim(n: usize) -> usize {
    n * (n - 1) / 2
}

pub fn hat(n: usize, w: &[f64]) -> Mat64 {
    match n {
        2 => Mat64::from_rows(&[vec![0.0, -w[0]], vec![w[0], 0.0]]),
        3 => linalg::hat3(w),
        _ => panic!("so({n}) is not supported"),
    }
}

/// Coordinates of the skew part of `a`.
pub fn vee(n: usize, a: &Mat64) -> Vec<f64> {
    match n {
        2 => vec![0.5 * (a[(1, 0)] - a[(0, 1)])],
        3 => linalg::vee3(a),
        _ => panic!("so({n}) is not supported"),
    }
}

pub fn exp(n: usize, w: &[f64]) -> Mat64 {
    match n {
        2 => {
            let (s, c) = w[0].sin_cos();
            Mat64::from_rows(&[vec![c, -s], vec![s, c]])
        }
        3 => linalg::so3_exp(w),
        _ => panic!("SO({n}) is not supported"),
    }
}

pub fn log(n: usize, r: &Mat64) -> Vec<f64> {
    match n {
        2 => vec![r[(1, 0)].atan2(r[(0, 0)])],
        3 => linalg::so3_log(r),
        _ => panic!("SO({n}) is not supported"),
    }
}

pub fn right_jacobian(n: usize, w: &[f64]) -> Mat64 {
    match n {
        2 => Mat64::identity(1),
        _ => linalg::so3_right_jacobian(w),
    }
}

pub fn right_jacobian_inv(n: usize, w: &[f64]) -> Mat64 {
    match n {
        2 => Mat64::identity(1),
        _ => linalg::so3_right_jacobian_inv(w),
    }
}

/// Rotation angle `|w|`.
pub fn angle(w: &[f64]) -> f64 {
    linalg::norm(w)
}

/// `n × n` matrix stored row-major in a slice.
pub fn mat(n: usize, flat: &[f64]) -> Mat64 {
    Mat64::from_row_slice(n, n, flat)
}

pub fn skew(a: &Mat64) -> Mat64 {
    a.antisym()
}

pub fn bracket(a: &Mat64, b: &Mat64) -> Mat64 {
    a.matmul(b).sub(&b.matmul(a))
}

/// Matrix of `Z ↦ L Z R` on row-major flattened `n × n` matrices.
pub fn sandwich(l: &Mat64, r: &Mat64) -> Mat64 {
    let n = l.rows();
    Mat64::from_fn(n * n, n * n, |row, col| {
        let (a, b) = (row / n, row % n);
        let (c, d) = (col / n, col % n);
        l[(a, c)] * r[(d, b)]
    })
}

/// Rotation by `angle` about coordinate axis `axis`.
pub fn axis_rotation(axis: usize, angle: f64) -> Mat64 {
    let mut w = [0.0; 3];
    w[axis] = angle;
    linalg::so3_exp(&w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn so2_roundtrip() {
        let r = exp(2, &[2.5]);
        assert!((log(2, &r)[0] - 2.5).abs() < 1e-14);
    }

    #[test]
    fn sandwich_matches_product() {
        let l = linalg::so3_exp(&[0.1, 0.2, 0.3]);
        let r = linalg::so3_exp(&[-0.4, 0.0, 0.7]);
        let z = Mat64::from_fn(3, 3, |i, j| (i * 3 + j) as f64 - 2.0);
        let direct = l.matmul(&z).matmul(&r).into_vec();
        let via = sandwich(&l, &r).mul_vec(z.as_slice());
        assert!(linalg::dist(&direct, &via) < 1e-14);
    }
}
