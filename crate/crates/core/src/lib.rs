//! Consensus feature attributions over sets of near-optimal models.
//!
//! Instead of explaining a single trained model, this crate explains every
//! model whose empirical loss stays under a user-chosen bound, and only keeps
//! the attribution statements that all of those models agree on: the sign of
//! the prediction gap, the sign of each feature's attribution, and a partial
//! order of relative feature importance. Three model families are supported,
//! each with exact range queries over the whole set:
//!
//! * [`additive`] - least-squares additive models over linear/spline bases,
//!   where the admissible set is an ellipsoid in weight space;
//! * [`kernel`] - kernel ridge regression, with attributions computed along
//!   straight integration paths;
//! * [`forest`] - averages of sufficiently many trees from a fixed pool, with
//!   exact per-group attribution ranges by sorting per-tree values.
//!
//! The [`consensus`] module turns range queries into statements, partial
//! orders (with Hasse diagram rendering) and a scalar utility describing how
//! much consensus survives as the loss bound grows.

pub mod additive;
pub mod consensus;
pub mod error;
pub mod exec;
pub mod forest;
pub mod kernel;
pub mod linalg;
pub mod matrix;

pub use error::{Error, Result};
pub use matrix::Matrix;
