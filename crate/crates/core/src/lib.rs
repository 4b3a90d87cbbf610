//! Nonlinear principal components of stationary diffusions.
//!
//! The crate builds reversible diffusions from a stationary density and a
//! diffusion matrix, simulates them, extracts principal components from a
//! sieve generalized eigenproblem, and checks the results.

pub mod criteria;
pub mod error;
pub mod expr;
pub mod extract;
pub mod function;
pub mod linalg;
pub mod model;
pub mod numdiff;
pub mod quadrature;
pub mod sieve;
pub mod spectral;
pub mod simulate;
pub mod stats;
pub mod validate;

pub use error::{NpcError, Result};
pub use expr::Expr;
pub use function::{Analytic, Constant, Coordinate, FnScalar, ScalarFunction};
