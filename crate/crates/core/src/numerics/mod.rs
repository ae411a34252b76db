//! Small numerical kernels shared by the analytic modules.

pub mod quad;
pub mod roots;
pub mod stats;
pub mod tridiag;

pub use quad::{integrate, trapezoid, trapezoid_weights, QuadConfig, QuadError};
pub use roots::{brent, golden_max, newton_bisect, RootError};
