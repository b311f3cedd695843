//! Numerical laboratory for diffusive KPP equations with free boundaries under
//! time almost-periodic forcing.

pub mod asymptotics;
pub mod coefficients;
pub mod config;
pub mod dichotomy;
pub mod error;
pub mod lyapunov;
pub mod output;
pub mod parabolic;
pub mod runner;
pub mod stefan;
pub mod tridiag;

pub use error::{Error, Result};
