//! Numerical toolkit for the damped (α,β)-Szegő equation on the circle.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod fit;
pub mod hankel;
pub mod integrator;
pub mod ode;
pub mod rank_one;
pub mod spectral;

pub use error::{Result, SzegoError};
pub use spectral::{beta_term, cubic_term, rhs_full, ModeVector, Params};
