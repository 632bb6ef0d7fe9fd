//! Riemannian game dynamics on the probability simplex.
//!
//! The crate builds evolutionary dynamics from a population game and a
//! metric on the simplex, integrates them, and audits their long-run
//! behaviour against equilibrium and stability predictions.

pub mod analysis;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod games;
pub mod hessian;
pub mod integrator;
pub mod metrics;
pub mod numerics;
pub mod projection;
pub mod rl_bridge;
pub mod simplex;

pub use error::{Error, Result};
