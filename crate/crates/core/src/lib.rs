//! Space-time Trefftz discontinuous Galerkin method for the one-dimensional
//! first-order acoustic wave system
//!
//! ```text
//! ∂_x v + ∂_t σ = 0,   ∂_x σ + c⁻² ∂_t v = 0   in (a, b) × (0, T)
//! ```
//!
//! with Dirichlet, Neumann and impedance (Robin) boundary conditions.
//!
//! The pipeline is: build a [`mesh::Mesh`] (time slabs or tent pitching),
//! assemble with [`assembly::assemble_global`], solve with
//! [`solver::solve_global`] or the element-by-element [`solver::solve_causal`],
//! and measure the result with the functions in [`analysis`].

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod assembly;
pub mod basis;
pub mod mesh;
pub mod problem;
pub mod quadrature;
pub mod solver;
pub mod verify;

use thiserror::Error;

pub use analysis::AnalysisError;
pub use assembly::AssemblyError;
pub use mesh::MeshError;
pub use quadrature::QuadratureError;
pub use solver::SolverError;

/// Any error raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}
