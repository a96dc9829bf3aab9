//! Rolling of pseudo-Riemannian hyperquadrics over their affine tangent
//! spaces without slipping or twisting.

pub mod control;
pub mod diff;
pub mod distribution;
pub mod error;
pub mod expr;
pub mod hyperquadric;
pub mod kinematics;
pub mod reachability;
pub mod indefinite;
pub mod intrinsic;

pub use error::{Error, Result};
