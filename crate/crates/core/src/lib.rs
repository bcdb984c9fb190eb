//! Simulation and analysis of conditional Gaussian systems
//! `dX = -B(u)X dt + Σ dW`, `du = h(u) dt + dB`, whose stochastic damping
//! produces polynomial, exponential, intermediate or Gaussian tails in `X`.

// `!(a < b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod integrate;
pub mod io;
pub mod model;
pub mod numeric;
pub mod theory;
