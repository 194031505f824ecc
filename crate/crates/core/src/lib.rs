//! Optimal relaxed harvesting of one-dimensional diffusions.
//!
//! The value of the problem is obtained in closed form from the increasing
//! fundamental solution ψ of `(A − r)ψ = 0` and checked against a reflected
//! SDE simulation and an occupation-measure linear program.

pub mod error;
pub mod model;
pub mod montecarlo;
pub mod oclp;
pub mod pipeline;
pub mod ode;
pub mod psi;
pub mod quad;
pub mod threshold;
pub mod value;

pub use error::{HarvestError, Result};
