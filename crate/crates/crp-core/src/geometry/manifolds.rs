use std::sync::Arc;

use crate::geometry::charts::{IdentityChart, ProductChart, SonChart, Stereographic};
use crate::geometry::lie;
use crate::geometry::{ChartRef, Manifold, ManifoldRef};
use crate::linalg::{self, Mat64};

/// `R^d`, optionally with the origin removed.
pub struct Euclidean {
    dim: usize,
    punctured: bool,
    atlas: Vec<ChartRef>,
}

impl Euclidean {
    pub fn new(dim: usize) -> Self {
        Euclidean { dim, punctured: false, atlas: vec![Arc::new(IdentityChart::new(dim))] }
    }

    /// `R^d \ {0}`.
    pub fn punctured(dim: usize) -> Self {
        Euclidean { punctured: true, ..Euclidean::new(dim) }
    }

    /// `R^d` carrying a custom atlas.
    pub fn with_atlas(dim: usize, atlas: Vec<ChartRef>) -> Self {
        Euclidean { dim, punctured: false, atlas }
    }
}

impl Manifold for Euclidean {
    fn name(&self) -> String {
        if self.punctured {
            format!("R{}\\0", self.dim)
        } else {
            format!("R{}", self.dim)
        }
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn ambient_dim(&self) -> usize {
        self.dim
    }

    fn projector(&self, _m: &[f64]) -> Mat64 {
        Mat64::identity(self.dim)
    }

    fn project_tangent(&self, _m: &[f64], v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }

    fn retract(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn tangent_basis(&self, _m: &[f64]) -> Mat64 {
        Mat64::identity(self.dim)
    }

    fn atlas(&self) -> &[ChartRef] {
        &self.atlas
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        !self.punctured || linalg::norm(x) > 1e-8
    }
}

/// Unit sphere `S² ⊂ R³` with the two stereographic charts.
pub struct Sphere {
    atlas: Vec<ChartRef>,
}

impl Sphere {
    pub fn new() -> Self {
        Sphere { atlas: vec![Arc::new(Stereographic::north()), Arc::new(Stereographic::south())] }
    }
}

impl Default for Sphere {
    fn default() -> Self {
        Sphere::new()
    }
}

impl Manifold for Sphere {
    fn name(&self) -> String {
        "S2".into()
    }

    fn dim(&self) -> usize {
        2
    }

    fn ambient_dim(&self) -> usize {
        3
    }

    fn projector(&self, m: &[f64]) -> Mat64 {
        let u = linalg::scale(m, 1.0 / linalg::norm(m));
        Mat64::identity(3).sub(&Mat64::outer(&u, &u))
    }

    fn project_tangent(&self, m: &[f64], v: &[f64]) -> Vec<f64> {
        let u = linalg::scale(m, 1.0 / linalg::norm(m));
        linalg::axpy(v, -linalg::dot(&u, v), &u)
    }

    fn retract(&self, x: &[f64]) -> Vec<f64> {
        linalg::scale(x, 1.0 / linalg::norm(x))
    }

    fn tangent_basis(&self, m: &[f64]) -> Mat64 {
        let u = linalg::scale(m, 1.0 / linalg::norm(m));
        let mut axis = 0;
        for i in 1..3 {
            if u[i].abs() < u[axis].abs() {
                axis = i;
            }
        }
        let e = linalg::unit(3, axis);
        let b1 = linalg::axpy(&e, -u[axis], &u);
        let b1 = linalg::scale(&b1, 1.0 / linalg::norm(&b1));
        let b2 = linalg::cross(&u, &b1);
        Mat64::from_cols(&[b1, b2])
    }

    fn atlas(&self) -> &[ChartRef] {
        &self.atlas
    }

    fn distance_to(&self, x: &[f64]) -> f64 {
        (linalg::norm(x) - 1.0).abs()
    }
}

/// `SO(n) ⊂ R^{n²}` (row-major), `n ∈ {2, 3}`.
pub struct SpecialOrthogonal {
    n: usize,
    atlas: Vec<ChartRef>,
}

impl SpecialOrthogonal {
    pub fn new(n: usize) -> Self {
        assert!(n == 2 || n == 3, "SO({n}) is not supported");
        let centers: Vec<Mat64> = if n == 3 {
            vec![
                Mat64::identity(3),
                lie::axis_rotation(0, std::f64::consts::PI),
                lie::axis_rotation(1, std::f64::consts::PI),
                lie::axis_rotation(2, std::f64::consts::PI),
            ]
        } else {
            vec![Mat64::identity(2), lie::exp(2, &[std::f64::consts::PI])]
        };
        let atlas = centers.into_iter().enumerate().map(|(i, c)| Arc::new(SonChart::new(c, i)) as ChartRef).collect();
        SpecialOrthogonal { n, atlas }
    }

    pub fn so3() -> Self {
        SpecialOrthogonal::new(3)
    }

    pub fn so2() -> Self {
        SpecialOrthogonal::new(2)
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

impl Manifold for SpecialOrthogonal {
    fn name(&self) -> String {
        format!("SO{}", self.n)
    }

    fn dim(&self) -> usize {
        lie::algebra_dim(self.n)
    }

    fn ambient_dim(&self) -> usize {
        self.n * self.n
    }

    fn projector(&self, m: &[f64]) -> Mat64 {
        let g = lie::mat(self.n, m);
        // Z ↦ g skew(gᵀ Z)
        let gt = g.transpose();
        let n2 = self.n * self.n;
        let cols: Vec<Vec<f64>> = (0..n2)
            .map(|k| {
                let z = Mat64::from_fn(self.n, self.n, |a, b| if a * self.n + b == k { 1.0 } else { 0.0 });
                g.matmul(&gt.matmul(&z).antisym()).into_vec()
            })
            .collect();
        Mat64::from_cols(&cols)
    }

    fn project_tangent(&self, m: &[f64], v: &[f64]) -> Vec<f64> {
        let g = lie::mat(self.n, m);
        let z = lie::mat(self.n, v);
        g.matmul(&g.transpose().matmul(&z).antisym()).into_vec()
    }

    fn retract(&self, x: &[f64]) -> Vec<f64> {
        linalg::polar_orthogonal(&lie::mat(self.n, x)).into_vec()
    }

    fn tangent_basis(&self, m: &[f64]) -> Mat64 {
        let g = lie::mat(self.n, m);
        let d = lie::algebra_dim(self.n);
        let cols: Vec<Vec<f64>> = (0..d)
            .map(|k| {
                let e = linalg::unit(d, k);
                g.matmul(&lie::hat(self.n, &e)).scale(std::f64::consts::FRAC_1_SQRT_2).into_vec()
            })
            .collect();
        Mat64::from_cols(&cols)
    }

    fn atlas(&self) -> &[ChartRef] {
        &self.atlas
    }
}

/// `M₁ × M₂` with concatenated ambient coordinates.
pub struct ProductManifold {
    a: ManifoldRef,
    b: ManifoldRef,
    atlas: Vec<ChartRef>,
}

impl ProductManifold {
    pub fn new(a: ManifoldRef, b: ManifoldRef) -> Self {
        let mut atlas: Vec<ChartRef> = Vec::new();
        for ca in a.atlas() {
            for cb in b.atlas() {
                atlas.push(Arc::new(ProductChart::new(ca.clone(), cb.clone(), a.ambient_dim())));
            }
        }
        ProductManifold { a, b, atlas }
    }

    pub fn first(&self) -> &ManifoldRef {
        &self.a
    }

    pub fn second(&self) -> &ManifoldRef {
        &self.b
    }

    /// Splits an ambient point or vector into its two factors.
    pub fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        x.split_at(self.a.ambient_dim())
    }
}

impl Manifold for ProductManifold {
    fn name(&self) -> String {
        format!("{}x{}", self.a.name(), self.b.name())
    }

    fn dim(&self) -> usize {
        self.a.dim() + self.b.dim()
    }

    fn ambient_dim(&self) -> usize {
        self.a.ambient_dim() + self.b.ambient_dim()
    }

    fn projector(&self, m: &[f64]) -> Mat64 {
        let (x, y) = self.split(m);
        self.a.projector(x).block_diag(&self.b.projector(y))
    }

    fn project_tangent(&self, m: &[f64], v: &[f64]) -> Vec<f64> {
        let (x, y) = self.split(m);
        let (vx, vy) = self.split(v);
        let mut out = self.a.project_tangent(x, vx);
        out.extend(self.b.project_tangent(y, vy));
        out
    }

    fn retract(&self, p: &[f64]) -> Vec<f64> {
        let (x, y) = self.split(p);
        let mut out = self.a.retract(x);
        out.extend(self.b.retract(y));
        out
    }

    fn tangent_basis(&self, m: &[f64]) -> Mat64 {
        let (x, y) = self.split(m);
        self.a.tangent_basis(x).block_diag(&self.b.tangent_basis(y))
    }

    fn atlas(&self) -> &[ChartRef] {
        &self.atlas
    }

    fn in_domain(&self, p: &[f64]) -> bool {
        let (x, y) = self.split(p);
        self.a.in_domain(x) && self.b.in_domain(y)
    }

    fn distance_to(&self, p: &[f64]) -> f64 {
        let (x, y) = self.split(p);
        self.a.distance_to(x).hypot(self.b.distance_to(y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_projector(man: &dyn Manifold, m: &[f64]) {
        let p = man.projector(m);
        assert!(p.matmul(&p).sub(&p).max_abs() < 1e-12);
        assert!(p.sub(&p.transpose()).max_abs() < 1e-12);
        let b = man.tangent_basis(m);
        assert_eq!(b.cols(), man.dim());
        assert!(b.transpose().matmul(&b).sub(&Mat64::identity(man.dim())).max_abs() < 1e-12);
        assert!(p.matmul(&b).sub(&b).max_abs() < 1e-12);
    }

    #[test]
    fn projectors_are_orthogonal() {
        let s = Sphere::new();
        check_projector(&s, &[0.6, 0.0, 0.8]);
        let so3 = SpecialOrthogonal::so3();
        check_projector(&so3, linalg::so3_exp(&[0.3, -0.2, 1.1]).as_slice());
        let so2 = SpecialOrthogonal::so2();
        check_projector(&so2, lie::exp(2, &[0.4]).as_slice());
        let prod = ProductManifold::new(Arc::new(Sphere::new()), Arc::new(SpecialOrthogonal::so2()));
        let mut m = vec![0.0, 0.6, 0.8];
        m.extend(lie::exp(2, &[1.0]).into_vec());
        check_projector(&prod, &m);
    }

    #[test]
    fn retraction_lands_on_manifold() {
        let so3 = SpecialOrthogonal::so3();
        let g = linalg::so3_exp(&[0.3, -0.2, 1.1]);
        let x = linalg::axpy(g.as_slice(), 1e-3, &[1.0, 2.0, 0.0, 0.0, 1.0, 0.0, 3.0, 0.0, 1.0]);
        let r = lie::mat(3, &so3.retract(&x));
        assert!(r.transpose().matmul(&r).sub(&Mat64::identity(3)).max_abs() < 1e-13);
        assert!((r.det() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn atlases_cover_sample_points() {
        let s = Sphere::new();
        for m in [[0.0, 0.0, 1.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]] {
            let (_, margin) = crate::geometry::best_chart(&s, &m).unwrap();
            assert!(margin >= 0.5 - 1e-12);
        }
        let so3 = SpecialOrthogonal::so3();
        let g = linalg::so3_exp(&[0.0, 2.0, 1.0]);
        let (_, margin) = crate::geometry::best_chart(&so3, g.as_slice()).unwrap();
        assert!(margin > 0.2);
    }
}
