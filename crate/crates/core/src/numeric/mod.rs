//! Numerical building blocks shared by the simulation and theory modules.

pub mod exact;
pub mod ext_f64;
pub mod linalg;
pub mod quadrature;

pub use exact::{ExactSum, TieredPowerSum};
pub use quadrature::{gauss_hermite, normal_expectation};
