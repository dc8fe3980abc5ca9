//! Embedded manifolds, charts, connections, gauges and compatibility tensors.
//!
//! Points and tangent vectors are stored in ambient coordinates. A tangent
//! vector is always passed next to its base point; maps between tangent
//! spaces are ambient `N × N` matrices that annihilate the normal space of
//! their source point.

use std::sync::Arc;

use crate::error::Result;
use crate::linalg::{self, Mat64};

pub mod charts;
pub mod connections;
pub mod fd;
pub mod gauge;
pub mod lie;
pub mod manifolds;
pub mod tensor;

pub use charts::{CubicChart, IdentityChart, ProductChart, SonChart, Stereographic};
pub use connections::{ChristoffelConnection, Connection, SonConnection, SonConnectionKind, SphereLeviCivita};
pub use gauge::{ChartGauge, ConnectionGauge, CustomGauge, Gauge, LogParallelism, Parallelism, ProductGauge, Provenance};
pub use manifolds::{Euclidean, ProductManifold, SpecialOrthogonal, Sphere};
pub use tensor::{
    compatibility_tensor, compatibility_tensor_second_slot, gauge_tensor, gauge_tensor_fd, manifold_taylor_check,
    torsion_check, Bilinear, TaylorReport, TorsionReport,
};

pub type ManifoldRef = Arc<dyn Manifold>;
pub type ChartRef = Arc<dyn Chart>;

/// A smooth submanifold of `R^N`.
pub trait Manifold: Send + Sync {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    fn ambient_dim(&self) -> usize;

    /// Orthogonal projection onto `T_m M`.
    fn projector(&self, m: &[f64]) -> Mat64;

    /// Nearest point of `M` to an ambient point close to it.
    fn retract(&self, x: &[f64]) -> Vec<f64>;

    fn atlas(&self) -> &[ChartRef];

    fn project_tangent(&self, m: &[f64], v: &[f64]) -> Vec<f64> {
        self.projector(m).mul_vec(v)
    }

    /// Orthonormal basis of `T_m M` as the columns of an `N × d` matrix.
    fn tangent_basis(&self, m: &[f64]) -> Mat64 {
        linalg::gram_schmidt(&self.projector(m), 1e-8)
    }

    fn distance_to(&self, x: &[f64]) -> f64 {
        linalg::dist(x, &self.retract(x))
    }

    /// Ambient-side domain restriction (for open subsets of `R^d`).
    fn in_domain(&self, _x: &[f64]) -> bool {
        true
    }
}

/// A coordinate chart `φ: D(φ) ⊂ M → R^d`.
pub trait Chart: Send + Sync {
    fn name(&self) -> String;
    fn dim(&self) -> usize;

    fn forward(&self, m: &[f64]) -> Vec<f64>;
    fn inverse(&self, u: &[f64]) -> Vec<f64>;

    /// `dφ_m ∘ P(m)` as a `d × N` matrix.
    fn differential(&self, m: &[f64]) -> Mat64;

    /// `d(φ⁻¹)_u` as an `N × d` matrix.
    fn inverse_differential(&self, u: &[f64]) -> Mat64;

    /// Relative distance to the chart boundary in coordinates: `1` deep
    /// inside, `0` on the boundary, negative outside.
    fn coord_margin(&self, u: &[f64]) -> f64;

    fn margin(&self, m: &[f64]) -> f64 {
        let u = self.forward(m);
        if u.iter().any(|x| !x.is_finite()) {
            return f64::NEG_INFINITY;
        }
        self.coord_margin(&u)
    }

    fn contains(&self, m: &[f64]) -> bool {
        self.margin(m) > 0.0
    }
}

/// Chart of the atlas with the largest margin at `m`.
pub fn best_chart(man: &dyn Manifold, m: &[f64]) -> Option<(usize, f64)> {
    man.atlas()
        .iter()
        .enumerate()
        .map(|(i, c)| (i, c.margin(m)))
        .filter(|(_, g)| *g > 0.0)
        .fold(None, |best: Option<(usize, f64)>, (i, g)| match best {
            Some((_, bg)) if bg >= g => best,
            _ => Some((i, g)),
        })
}

/// Inverse of `A: T_m M → T_n M` as an ambient map `T_n M → T_m M`.
pub fn tangent_inverse(man: &dyn Manifold, a: &Mat64, m: &[f64], n: &[f64]) -> Result<Mat64> {
    let bm = man.tangent_basis(m);
    let bn = man.tangent_basis(n);
    let core = bn.transpose().matmul(a).matmul(&bm);
    let inv = core.inverse()?;
    Ok(bm.matmul(&inv).matmul(&bn.transpose()))
}
