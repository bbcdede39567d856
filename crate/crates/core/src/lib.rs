//! Finsler geometry of the cone of positive-definite matrices under the
//! trace p-norms `||x||_p = tau(|x|^p)^{1/p}`, `tau = tr / n`.
//!
//! * [`matcore`]: Hermitian and positive-definite types, spectral calculus, norms.
//! * [`geometry`]: geodesics, distances, exponential and log maps, curve lengths.
//! * [`convexity`]: Lie triple systems and convex exponential sets `exp(H)`.
//! * [`projection`]: Birkhoff orthogonality and nearest-point projections.
//! * [`oracle`]: seeded numerical checks of the metric inequalities.
//! * [`cli`]: the `pdcone` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod convexity;
pub mod error;
pub mod geometry;
pub mod io;
pub mod matcore;
pub mod oracle;
pub mod projection;
pub mod sampling;

pub use error::{Error, Result};
pub use matcore::{HermMatrix, PParams, PosDefMatrix};
