//! Numerical laboratory for constant-step stochastic gradient descent.
//!
//! The crate simulates the SGD chain, its modified diffusion, and the
//! truncated weak expansion `u0 + eta * u1` obtained from the transport
//! equations along gradient-flow characteristics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod expansion;
pub mod export;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod sde;
pub mod sgd;

pub use error::{Error, Result};
