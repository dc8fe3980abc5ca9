//! Parallelisms and gauges.
//!
//! A parallelism is a family of linear maps `U(n, m): T_m M → T_n M` with
//! `U(m, m) = I`. A gauge is a local logarithm `ψ(x, y) ∈ T_x M`, with
//! `ψ(x, y) ≈ y − x`, together with a parallelism.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::connections::Connection;
use crate::geometry::fd;
use crate::geometry::manifolds::ProductManifold;
use crate::geometry::tensor::Bilinear;
use crate::geometry::{Chart, ChartRef, ManifoldRef};
use crate::linalg::{self, Mat64};

pub trait Parallelism: Send + Sync {
    fn manifold(&self) -> ManifoldRef;

    /// `U(n, m)` as an ambient `N × N` matrix vanishing on the normal space at `m`.
    fn transport(&self, n: &[f64], m: &[f64]) -> Result<Mat64>;

    /// Identifier used to check that integrands and integrators agree.
    fn parallelism_id(&self) -> String;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Chart,
    SphereClosedForm,
    LieGroup,
    Connection,
    Product,
    Custom,
}

pub trait Gauge: Parallelism {
    fn name(&self) -> String;

    fn psi(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>>;

    /// Whether `(x, y)` lies in the domain of `ψ`.
    fn in_domain(&self, x: &[f64], y: &[f64]) -> bool;

    fn provenance(&self) -> Provenance;

    /// The gauge tensor at `m` when known in closed form.
    fn sg(&self, _m: &[f64]) -> Option<Bilinear> {
        None
    }
}

/// `U^ψ(n, m) = ψ(n, ·)_{*m}` by finite differences.
pub struct LogParallelism<'a> {
    gauge: &'a dyn Gauge,
    step: f64,
}

impl<'a> LogParallelism<'a> {
    pub fn new(gauge: &'a dyn Gauge) -> Self {
        LogParallelism { gauge, step: fd::FD_STEP }
    }

    pub fn with_step(gauge: &'a dyn Gauge, step: f64) -> Self {
        LogParallelism { gauge, step }
    }
}

/// Differential of `y ↦ ψ(n, y)` at `m`.
pub fn log_differential(gauge: &dyn Gauge, n: &[f64], m: &[f64], step: f64) -> Result<Mat64> {
    let man = gauge.manifold();
    let out_dim = man.ambient_dim();
    let j = fd::tangent_jacobian(man.as_ref(), m, step, |y| gauge.psi(n, y).unwrap_or_else(|_| vec![f64::NAN; out_dim]));
    if !j.is_finite() {
        return Err(Error::DomainError(format!("{}: ψ(n, ·) undefined near m", gauge.name())));
    }
    Ok(j)
}

impl Parallelism for LogParallelism<'_> {
    fn manifold(&self) -> ManifoldRef {
        self.gauge.manifold()
    }

    fn transport(&self, n: &[f64], m: &[f64]) -> Result<Mat64> {
        log_differential(self.gauge, n, m, self.step)
    }

    fn parallelism_id(&self) -> String {
        format!("log:{}", self.gauge.name())
    }
}

// ---- chart gauges --------------------------------------------------------------

/// `ψ(x, y) = dφ⁻¹_{φ(x)} (φ(y) − φ(x))`, `U(n, m) = dφ⁻¹_{φ(n)} dφ_m`.
pub struct ChartGauge {
    man: ManifoldRef,
    chart: ChartRef,
}

impl ChartGauge {
    pub fn new(man: ManifoldRef, chart: ChartRef) -> Self {
        ChartGauge { man, chart }
    }

    /// Gauge of the `i`-th chart of the manifold's atlas.
    pub fn from_atlas(man: ManifoldRef, i: usize) -> Self {
        let chart = man.atlas()[i].clone();
        ChartGauge { man, chart }
    }

    pub fn chart(&self) -> &dyn Chart {
        self.chart.as_ref()
    }
}

impl Parallelism for ChartGauge {
    fn manifold(&self) -> ManifoldRef {
        self.man.clone()
    }

    fn transport(&self, n: &[f64], m: &[f64]) -> Result<Mat64> {
        if !self.chart.contains(n) || !self.chart.contains(m) {
            return Err(Error::DomainError(format!("{}: point outside the chart", self.chart.name())));
        }
        Ok(self.chart.inverse_differential(&self.chart.forward(n)).matmul(&self.chart.differential(m)))
    }

    fn parallelism_id(&self) -> String {
        format!("chart:{}", self.chart.name())
    }
}

impl Gauge for ChartGauge {
    fn name(&self) -> String {
        format!("chart:{}", self.chart.name())
    }

    fn psi(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        if !self.chart.contains(x) || !self.chart.contains(y) {
            return Err(Error::DomainError(format!("{}: point outside the chart", self.chart.name())));
        }
        let ux = self.chart.forward(x);
        let uy = self.chart.forward(y);
        Ok(self.chart.inverse_differential(&ux).mul_vec(&linalg::sub(&uy, &ux)))
    }

    fn in_domain(&self, x: &[f64], y: &[f64]) -> bool {
        self.chart.contains(x) && self.chart.contains(y)
    }

    fn provenance(&self) -> Provenance {
        Provenance::Chart
    }

    fn sg(&self, m: &[f64]) -> Option<Bilinear> {
        Some(Bilinear::zero(self.man.tangent_basis(m)))
    }
}

// ---- connection gauges ---------------------------------------------------------

/// `ψ = log` and `U` = parallel transport of a connection.
pub struct ConnectionGauge {
    conn: Arc<dyn Connection>,
}

impl ConnectionGauge {
    pub fn new(conn: Arc<dyn Connection>) -> Self {
        ConnectionGauge { conn }
    }

    pub fn connection(&self) -> &Arc<dyn Connection> {
        &self.conn
    }
}

impl Parallelism for ConnectionGauge {
    fn manifold(&self) -> ManifoldRef {
        self.conn.manifold()
    }

    fn transport(&self, n: &[f64], m: &[f64]) -> Result<Mat64> {
        self.conn.transport(n, m)
    }

    fn parallelism_id(&self) -> String {
        format!("conn:{}", self.conn.name())
    }
}

impl Gauge for ConnectionGauge {
    fn name(&self) -> String {
        format!("conn:{}", self.conn.name())
    }

    fn psi(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.conn.log(x, y)
    }

    fn in_domain(&self, x: &[f64], y: &[f64]) -> bool {
        let man = self.conn.manifold();
        man.in_domain(x) && man.in_domain(y) && self.conn.distance(x, y) < self.conn.radius() - 1e-6
    }

    fn provenance(&self) -> Provenance {
        self.conn.provenance()
    }

    fn sg(&self, m: &[f64]) -> Option<Bilinear> {
        self.conn.half_torsion(m)
    }
}

// ---- products ------------------------------------------------------------------

pub struct ProductGauge {
    man: Arc<ProductManifold>,
    a: Arc<dyn Gauge>,
    b: Arc<dyn Gauge>,
}

impl ProductGauge {
    pub fn new(a: Arc<dyn Gauge>, b: Arc<dyn Gauge>) -> Self {
        let man = Arc::new(ProductManifold::new(a.manifold(), b.manifold()));
        ProductGauge { man, a, b }
    }

    pub fn product_manifold(&self) -> &Arc<ProductManifold> {
        &self.man
    }
}

impl Parallelism for ProductGauge {
    fn manifold(&self) -> ManifoldRef {
        self.man.clone()
    }

    fn transport(&self, n: &[f64], m: &[f64]) -> Result<Mat64> {
        let (n1, n2) = self.man.split(n);
        let (m1, m2) = self.man.split(m);
        Ok(self.a.transport(n1, m1)?.block_diag(&self.b.transport(n2, m2)?))
    }

    fn parallelism_id(&self) -> String {
        format!("({})x({})", self.a.parallelism_id(), self.b.parallelism_id())
    }
}

impl Gauge for ProductGauge {
    fn name(&self) -> String {
        format!("({})x({})", self.a.name(), self.b.name())
    }

    fn psi(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let (x1, x2) = self.man.split(x);
        let (y1, y2) = self.man.split(y);
        let mut out = self.a.psi(x1, y1)?;
        out.extend(self.b.psi(x2, y2)?);
        Ok(out)
    }

    fn in_domain(&self, x: &[f64], y: &[f64]) -> bool {
        let (x1, x2) = self.man.split(x);
        let (y1, y2) = self.man.split(y);
        self.a.in_domain(x1, y1) && self.b.in_domain(x2, y2)
    }

    fn provenance(&self) -> Provenance {
        Provenance::Product
    }

    fn sg(&self, m: &[f64]) -> Option<Bilinear> {
        let (m1, m2) = self.man.split(m);
        Some(Bilinear::block_diag(&self.a.sg(m1)?, &self.b.sg(m2)?))
    }
}

// ---- closures ------------------------------------------------------------------

type PsiFn = dyn Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync;
type TransportFn = dyn Fn(&[f64], &[f64]) -> Result<Mat64> + Send + Sync;
type DomainFn = dyn Fn(&[f64], &[f64]) -> bool + Send + Sync;
type SgFn = dyn Fn(&[f64]) -> Bilinear + Send + Sync;

/// Gauge given by closures. Without an explicit parallelism `U = U^ψ`.
pub struct CustomGauge {
    name: String,
    man: ManifoldRef,
    psi: Arc<PsiFn>,
    transport: Option<Arc<TransportFn>>,
    domain: Option<Arc<DomainFn>>,
    sg: Option<Arc<SgFn>>,
}

impl CustomGauge {
    pub fn new(
        name: &str,
        man: ManifoldRef,
        psi: impl Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        CustomGauge { name: name.into(), man, psi: Arc::new(psi), transport: None, domain: None, sg: None }
    }

    pub fn with_transport(mut self, u: impl Fn(&[f64], &[f64]) -> Result<Mat64> + Send + Sync + 'static) -> Self {
        self.transport = Some(Arc::new(u));
        self
    }

    pub fn with_domain(mut self, d: impl Fn(&[f64], &[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.domain = Some(Arc::new(d));
        self
    }

    pub fn with_sg(mut self, sg: impl Fn(&[f64]) -> Bilinear + Send + Sync + 'static) -> Self {
        self.sg = Some(Arc::new(sg));
        self
    }
}

impl Parallelism for CustomGauge {
    fn manifold(&self) -> ManifoldRef {
        self.man.clone()
    }

    fn transport(&self, n: &[f64], m: &[f64]) -> Result<Mat64> {
        match &self.transport {
            Some(u) => u(n, m),
            None => log_differential(self, n, m, fd::FD_STEP),
        }
    }

    fn parallelism_id(&self) -> String {
        match self.transport {
            Some(_) => format!("custom:{}", self.name),
            None => format!("log:{}", self.name),
        }
    }
}

impl Gauge for CustomGauge {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn psi(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        (self.psi)(x, y)
    }

    fn in_domain(&self, x: &[f64], y: &[f64]) -> bool {
        match &self.domain {
            Some(d) => d(x, y),
            None => self.man.in_domain(x) && self.man.in_domain(y),
        }
    }

    fn provenance(&self) -> Provenance {
        Provenance::Custom
    }

    fn sg(&self, m: &[f64]) -> Option<Bilinear> {
        self.sg.as_ref().map(|f| f(m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::connections::SphereLeviCivita;
    use crate::geometry::manifolds::Sphere;
    use crate::geometry::Manifold;

    #[test]
    fn chart_gauge_psi_is_first_order_displacement() {
        let man: ManifoldRef = Arc::new(Sphere::new());
        let g = ChartGauge::from_atlas(man.clone(), 1);
        let m = vec![0.0, 0.6, 0.8];
        assert!(linalg::norm(&g.psi(&m, &m).unwrap()) == 0.0);
        let n = man.retract(&[0.01, 0.6, 0.79]);
        let p = g.psi(&m, &n).unwrap();
        assert!(linalg::dist(&p, &man.project_tangent(&m, &linalg::sub(&n, &m))) < 1e-3);
    }

    #[test]
    fn log_parallelism_of_chart_gauge_is_its_transport() {
        let man: ManifoldRef = Arc::new(Sphere::new());
        let g = ChartGauge::from_atlas(man.clone(), 1);
        let m = man.retract(&[0.2, 0.1, 0.9]);
        let n = man.retract(&[-0.3, 0.2, 0.8]);
        let lp = LogParallelism::new(&g);
        let diff = lp.transport(&n, &m).unwrap().sub(&g.transport(&n, &m).unwrap()).max_abs();
        assert!(diff < 1e-9, "{diff}");
    }

    #[test]
    fn connection_gauge_identity_at_diagonal() {
        let g = ConnectionGauge::new(Arc::new(SphereLeviCivita::new()));
        let m = [0.0, 0.0, 1.0];
        let u = g.transport(&m, &m).unwrap();
        assert!(u.sub(&Sphere::new().projector(&m)).max_abs() < 1e-15);
        let lp = LogParallelism::new(&g);
        assert!(lp.transport(&m, &m).unwrap().sub(&u).max_abs() < 1e-9);
        assert!(!g.in_domain(&m, &[0.0, 0.0, -1.0]));
    }
}
