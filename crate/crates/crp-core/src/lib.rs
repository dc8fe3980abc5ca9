//! Controlled rough paths on manifolds: flat rough path algebra, gauges,
//! rough integration of one-forms, rough differential equations on
//! manifolds and rough parallel transport.

pub mod error;
pub mod geometry;
pub mod linalg;
pub mod mcrp;
pub mod mintegrate;
pub mod mrde;
pub mod order;
pub mod roughcore;
pub mod scalar;
pub mod transport;

pub use error::{Error, Result};
pub use linalg::{Mat, Mat64};
pub use scalar::Scalar;

pub type RoughPath64 = roughcore::RoughPath<f64>;
pub type RoughPath32 = roughcore::RoughPath<f32>;
pub type ControlledPath64 = roughcore::ControlledPath<f64>;
pub type ControlledPath32 = roughcore::ControlledPath<f32>;
pub type Control64 = roughcore::Control<f64>;
