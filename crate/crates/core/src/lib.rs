//! Entropy-production large deviations for diffusions
//! `dX = (−∇V + b) dt + sqrt(2ε) dW`.
//!
//! Three independent routes to the cumulant-generating function `e(α)` of
//! the entropy production:
//!
//! * [`riccati`]: vanishing-noise limit from algebraic Riccati equations at
//!   the critical points of `V`, assembled into a rate function by
//!   [`ratefn`];
//! * [`spectral`]: leading eigenvalue of a finite-difference discretization
//!   of the tilted generator at fixed `ε`, plus Feynman–Kac propagation;
//! * [`montecarlo`]: Euler–Maruyama ensembles with the entropy production
//!   accumulated along each path.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod csv;
pub mod model;
pub mod montecarlo;
pub mod ratefn;
pub mod riccati;
pub mod spectral;

pub use model::{Builtin, CriticalKind, CriticalPoint, DriftModel};

pub type LocalLinearization = riccati::LocalLinearization<f64>;
pub type AreCoefficients = riccati::AreCoefficients<f64>;
pub type AreSolution = riccati::AreSolution<f64>;

/// Any error raised by the numerical routes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Riccati(#[from] riccati::RiccatiError),
    #[error(transparent)]
    Rate(#[from] ratefn::RateError),
    #[error(transparent)]
    Spectral(#[from] spectral::SpectralError),
    #[error(transparent)]
    MonteCarlo(#[from] montecarlo::McError),
}
