//! Grid route: finite-difference discretization of the conjugated tilted
//! generator `A = εΔ + ⟨F, ∇⟩ − ε⁻¹W₀ − W₁`, its leading eigenpair, and
//! Feynman–Kac propagation of the finite-time MGF.

pub mod eigen;
pub mod fk;
pub mod grid;
pub mod operator;

use thiserror::Error;

pub use eigen::{e_eps_sweep, leading_eigpair, EigOptions, SpectralResult, Sweep, SweepRow};
pub use fk::{fk_propagate, fk_trajectory, BoundaryTerm, FkResult, InitialMeasure};
pub use grid::{GridPolicy, GridSpec};
pub use operator::{assemble, assemble_unchecked, DeformedOperator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("grid spacing {spacing} exceeds width/6 (smallest ground-state width {width})")]
    GridTooCoarse { spacing: f64, width: f64 },
    #[error("box margin {margin} around a critical point is below {required} (4 widths)")]
    BoxTooSmall { margin: f64, required: f64 },
    #[error("invalid grid or input: {0}")]
    InvalidGrid(String),
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
    #[error("no convergence after {iterations} iterations (lambda {lambda}, imag {imag}, residual {residual:e})")]
    NoConvergence { iterations: usize, lambda: f64, imag: f64, residual: f64 },
    #[error("eigenvector changes sign (min entry {min_entry:e}, lambda {lambda}); enlarge the box or refine the grid")]
    SignFlip { min_entry: f64, lambda: f64 },
    #[error("evolved field lost positivity at t = {time} (min {min:e}, max {max:e}); reduce dt")]
    PositivityLoss { time: f64, min: f64, max: f64 },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Riccati(#[from] crate::riccati::RiccatiError),
}
