use crate::geometry::{lie, Chart, ChartRef};
use crate::linalg::{self, Mat64};

/// Coordinate radius of the stereographic charts.
pub const STEREO_RADIUS: f64 = 2.0;

/// Coordinate radius (rotation angle) of the exponential charts on `SO(n)`.
pub const SON_RADIUS: f64 = 2.8;

/// `φ = id` on `R^d`.
pub struct IdentityChart {
    dim: usize,
}

impl IdentityChart {
    pub fn new(dim: usize) -> Self {
        IdentityChart { dim }
    }
}

impl Chart for IdentityChart {
    fn name(&self) -> String {
        format!("id{}", self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn forward(&self, m: &[f64]) -> Vec<f64> {
        m.to_vec()
    }

    fn inverse(&self, u: &[f64]) -> Vec<f64> {
        u.to_vec()
    }

    fn differential(&self, _m: &[f64]) -> Mat64 {
        Mat64::identity(self.dim)
    }

    fn inverse_differential(&self, _u: &[f64]) -> Mat64 {
        Mat64::identity(self.dim)
    }

    fn coord_margin(&self, _u: &[f64]) -> f64 {
        1.0
    }
}

/// `φ(x) = x³ + x` on `R`.
pub struct CubicChart;

impl Chart for CubicChart {
    fn name(&self) -> String {
        "cubic".into()
    }

    fn dim(&self) -> usize {
        1
    }

    fn forward(&self, m: &[f64]) -> Vec<f64> {
        vec![m[0] * m[0] * m[0] + m[0]]
    }

    fn inverse(&self, u: &[f64]) -> Vec<f64> {
        let q = 0.5 * u[0];
        let r = (q * q + 1.0 / 27.0).sqrt();
        let mut x = (q + r).cbrt() + (q - r).cbrt();
        for _ in 0..3 {
            x -= (x * x * x + x - u[0]) / (3.0 * x * x + 1.0);
        }
        vec![x]
    }

    fn differential(&self, m: &[f64]) -> Mat64 {
        Mat64::from_rows(&[vec![3.0 * m[0] * m[0] + 1.0]])
    }

    fn inverse_differential(&self, u: &[f64]) -> Mat64 {
        let x = self.inverse(u)[0];
        Mat64::from_rows(&[vec![1.0 / (3.0 * x * x + 1.0)]])
    }

    fn coord_margin(&self, _u: &[f64]) -> f64 {
        1.0
    }
}

/// Stereographic projection of `S²` from the north (or south) pole.
pub struct Stereographic {
    north: bool,
    radius: f64,
}

impl Stereographic {
    pub fn north() -> Self {
        Stereographic { north: true, radius: STEREO_RADIUS }
    }

    pub fn south() -> Self {
        Stereographic { north: false, radius: STEREO_RADIUS }
    }

    fn sign(&self) -> f64 {
        if self.north {
            1.0
        } else {
            -1.0
        }
    }
}

impl Chart for Stereographic {
    fn name(&self) -> String {
        if self.north { "stereo-north" } else { "stereo-south" }.into()
    }

    fn dim(&self) -> usize {
        2
    }

    fn forward(&self, m: &[f64]) -> Vec<f64> {
        let den = 1.0 - self.sign() * m[2];
        vec![m[0] / den, m[1] / den]
    }

    fn inverse(&self, u: &[f64]) -> Vec<f64> {
        let r2 = u[0] * u[0] + u[1] * u[1];
        let s = r2 + 1.0;
        vec![2.0 * u[0] / s, 2.0 * u[1] / s, self.sign() * (r2 - 1.0) / s]
    }

    fn differential(&self, m: &[f64]) -> Mat64 {
        let sg = self.sign();
        let den = 1.0 - sg * m[2];
        let j = Mat64::from_rows(&[
            vec![1.0 / den, 0.0, sg * m[0] / (den * den)],
            vec![0.0, 1.0 / den, sg * m[1] / (den * den)],
        ]);
        let u = linalg::scale(m, 1.0 / linalg::norm(m));
        j.matmul(&Mat64::identity(3).sub(&Mat64::outer(&u, &u)))
    }

    fn inverse_differential(&self, u: &[f64]) -> Mat64 {
        let s = u[0] * u[0] + u[1] * u[1] + 1.0;
        let s2 = s * s;
        let sg = self.sign();
        Mat64::from_fn(3, 2, |a, b| {
            if a < 2 {
                let d = if a == b { 2.0 / s } else { 0.0 };
                d - 4.0 * u[a] * u[b] / s2
            } else {
                sg * 4.0 * u[b] / s2
            }
        })
    }

    fn coord_margin(&self, u: &[f64]) -> f64 {
        1.0 - linalg::norm(u) / self.radius
    }
}

/// Exponential chart `φ(g) = vee(log(cᵀg))` on `SO(n)` centred at `c`.
pub struct SonChart {
    n: usize,
    center: Mat64,
    index: usize,
    radius: f64,
}

impl SonChart {
    pub fn new(center: Mat64, index: usize) -> Self {
        SonChart { n: center.rows(), center, index, radius: SON_RADIUS }
    }
}

impl Chart for SonChart {
    fn name(&self) -> String {
        format!("so{}-exp-{}", self.n, self.index)
    }

    fn dim(&self) -> usize {
        lie::algebra_dim(self.n)
    }

    fn forward(&self, m: &[f64]) -> Vec<f64> {
        let g = lie::mat(self.n, m);
        lie::log(self.n, &self.center.transpose().matmul(&g))
    }

    fn inverse(&self, u: &[f64]) -> Vec<f64> {
        self.center.matmul(&lie::exp(self.n, u)).into_vec()
    }

    fn differential(&self, m: &[f64]) -> Mat64 {
        let n = self.n;
        let g = lie::mat(n, m);
        let u = self.forward(m);
        let jinv = lie::right_jacobian_inv(n, &u);
        let cols: Vec<Vec<f64>> = (0..n * n)
            .map(|k| {
                let z = Mat64::from_fn(n, n, |a, b| if a * n + b == k { 1.0 } else { 0.0 });
                jinv.mul_vec(&lie::vee(n, &g.transpose().matmul(&z).antisym()))
            })
            .collect();
        Mat64::from_cols(&cols)
    }

    fn inverse_differential(&self, u: &[f64]) -> Mat64 {
        let n = self.n;
        let g = self.center.matmul(&lie::exp(n, u));
        let jr = lie::right_jacobian(n, u);
        let d = self.dim();
        let cols: Vec<Vec<f64>> = (0..d).map(|i| g.matmul(&lie::hat(n, &jr.col(i))).into_vec()).collect();
        Mat64::from_cols(&cols)
    }

    fn coord_margin(&self, u: &[f64]) -> f64 {
        1.0 - linalg::norm(u) / self.radius
    }
}

/// `φ₁ × φ₂` on a product manifold.
pub struct ProductChart {
    a: ChartRef,
    b: ChartRef,
    split: usize,
}

impl ProductChart {
    /// `split` is the ambient dimension of the first factor.
    pub fn new(a: ChartRef, b: ChartRef, split: usize) -> Self {
        ProductChart { a, b, split }
    }
}

impl Chart for ProductChart {
    fn name(&self) -> String {
        format!("{}*{}", self.a.name(), self.b.name())
    }

    fn dim(&self) -> usize {
        self.a.dim() + self.b.dim()
    }

    fn forward(&self, m: &[f64]) -> Vec<f64> {
        let (x, y) = m.split_at(self.split);
        let mut out = self.a.forward(x);
        out.extend(self.b.forward(y));
        out
    }

    fn inverse(&self, u: &[f64]) -> Vec<f64> {
        let (x, y) = u.split_at(self.a.dim());
        let mut out = self.a.inverse(x);
        out.extend(self.b.inverse(y));
        out
    }

    fn differential(&self, m: &[f64]) -> Mat64 {
        let (x, y) = m.split_at(self.split);
        self.a.differential(x).block_diag(&self.b.differential(y))
    }

    fn inverse_differential(&self, u: &[f64]) -> Mat64 {
        let (x, y) = u.split_at(self.a.dim());
        self.a.inverse_differential(x).block_diag(&self.b.inverse_differential(y))
    }

    fn coord_margin(&self, u: &[f64]) -> f64 {
        let (x, y) = u.split_at(self.a.dim());
        self.a.coord_margin(x).min(self.b.coord_margin(y))
    }

    fn margin(&self, m: &[f64]) -> f64 {
        let (x, y) = m.split_at(self.split);
        self.a.margin(x).min(self.b.margin(y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fd;
    use crate::geometry::manifolds::{SpecialOrthogonal, Sphere};
    use crate::geometry::Manifold;

    fn check_chart(man: &dyn Manifold, chart: &dyn Chart, m: &[f64]) {
        let u = chart.forward(m);
        assert!(linalg::dist(&chart.inverse(&u), m) < 1e-10);
        let d = chart.differential(m);
        let fdj = fd::tangent_jacobian(man, m, fd::FD_STEP, |x| chart.forward(x));
        assert!(d.sub(&fdj).max_abs() <= 1e-6 * (1.0 + d.max_abs()), "{}", chart.name());
        let di = chart.inverse_differential(&u);
        let fdi = Mat64::from_cols(
            &(0..chart.dim()).map(|i| fd::richardson(|e| chart.inverse(&linalg::axpy(&u, e, &linalg::unit(chart.dim(), i))), 1e-5)).collect::<Vec<_>>(),
        );
        assert!(di.sub(&fdi).max_abs() <= 1e-6 * (1.0 + di.max_abs()));
        assert!(d.matmul(&di).sub(&Mat64::identity(chart.dim())).max_abs() < 1e-10);
    }

    #[test]
    fn stereographic_charts_are_consistent() {
        let s = Sphere::new();
        let m = linalg::scale(&[0.3, -0.5, 0.2], 1.0 / linalg::norm(&[0.3, -0.5, 0.2]));
        check_chart(&s, &Stereographic::north(), &m);
        check_chart(&s, &Stereographic::south(), &m);
    }

    #[test]
    fn son_charts_are_consistent() {
        let so3 = SpecialOrthogonal::so3();
        let g = linalg::so3_exp(&[0.4, 1.0, -0.3]);
        for c in so3.atlas() {
            if c.contains(g.as_slice()) {
                check_chart(&so3, c.as_ref(), g.as_slice());
            }
        }
        let so2 = SpecialOrthogonal::so2();
        check_chart(&so2, so2.atlas()[0].as_ref(), lie::exp(2, &[1.2]).as_slice());
    }

    #[test]
    fn cubic_inverse() {
        for u in [-5.0, -0.3, 0.0, 0.7, 12.0] {
            let x = CubicChart.inverse(&[u])[0];
            assert!((x * x * x + x - u).abs() < 1e-12);
        }
    }
}
