//! Pricing library for a family of solvable mean-reverting CEV
//! stochastic-volatility models: closed-form transition densities,
//! moment/variance/volatility swap strikes, options on realized
//! moments, and the Monte Carlo / PDE machinery used to verify them.

pub mod cli;
pub mod density;
pub mod error;
pub mod model;
pub mod pricing;
pub mod quad;
pub mod specialfn;
pub mod verify;

pub use error::{Result, VolCevError};
pub use model::{Branch, CoefficientFn, ModelSpec, Violation};
