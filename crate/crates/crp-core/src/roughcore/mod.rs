//! Flat rough path layer over `W = R^k`.

pub mod control;
pub mod controlled;
pub mod integrate;
pub mod quadrature;
pub mod rde;
pub mod rough_path;

pub use control::{Control, ControlCheck, ControlKind};
pub use controlled::{verify_crp, verify_crp_within, ControlledPath, CrpReport, LevelConstants};
pub use integrate::{almost_additivity_defects, local_term, rough_integrate};
pub use rde::{rde_solve_flat, DrivingField, FnField, LinearField, RdeOptions, Scheme};
pub use rough_path::{lift_smooth, lift_smooth_with, pure_area_driver, uniform_grid, LiftOptions, RoughPath};
