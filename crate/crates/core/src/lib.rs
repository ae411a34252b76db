//! Numerics for the one-dimensional Edwards model of self-repellent
//! Brownian motion: critical constants, the rate function and moment
//! generating function, the Airy spectral machinery behind the overshoot
//! kernels, and Monte Carlo cross-checks for all of them.

pub mod airy;
pub mod besselsim;
pub mod cli;
pub mod constants;
pub mod edwardsmc;
mod error;
pub mod mc;
pub mod numerics;
pub mod rate;
pub mod spectral;
pub mod sturm;

pub use error::Error;
