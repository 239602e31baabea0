//! Graph signal reconstruction with node-adaptive Tikhonov regularisation.
//!
//! The regulariser `xᵀS(ω)x` with `S(ω) = diag(ω)·L·diag(ω)` lets each node
//! weigh local smoothness differently; a single weight `ω0` recovers the
//! classical Laplacian penalty `ω0·xᵀLx`.

pub mod analysis;
pub mod design;
pub mod error;
pub mod estimators;
pub mod graph;
pub mod signal;

pub use error::{GsrError, Result};
