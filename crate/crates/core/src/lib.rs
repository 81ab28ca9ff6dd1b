//! Linear processes `X_k = Σ_j a_{k+j} ξ_j` driven by functionals of
//! reversible Markov chains, with exact covariance oracles and Monte Carlo
//! checks of their limit behaviour.
//!
//! * [`innovations`]: stationary samplers for the Metropolis–Hastings,
//!   Gaussian–Hermite and cyclic-group chains.
//! * [`coefficients`]: coefficient families and certified `b_{n,j}` windows.
//! * [`linproc`]: partial sums `S_n = Σ_j b_{n,j} ξ_j` and path values.
//! * [`oracle`]: closed-form covariances, spectral constants and conditions.
//! * [`mc`]: Monte Carlo experiments and reports.

pub mod coefficients;
pub mod error;
pub mod innovations;
pub mod linproc;
pub mod mc;
pub mod oracle;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
