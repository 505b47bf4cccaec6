//! Berry–Esseen type bounds for sums of m-dependent triangular arrays,
//! with Monte Carlo and exact verification tools.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod charfn;
pub mod distances;
pub mod error;
pub mod functionals;
pub mod gaussian;
pub mod generators;
pub mod internals;
pub mod marginal;
pub mod model;
pub mod quadrature;
pub mod seed;

pub use error::{Error, Result};
pub use marginal::MarginalModel;
pub use model::*;
