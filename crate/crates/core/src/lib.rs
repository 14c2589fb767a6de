//! Inexact inverse iteration for the two-dimensional Monge-Ampère eigenvalue
//! problem `det D²u = λ|u|²` in Ω, `u = 0` on ∂Ω, discretized with P1 finite
//! elements on force-relaxed triangular meshes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigensolver;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod geometry;
pub mod mesh;
pub mod oracle;
pub mod recovery;

pub use eigensolver::{solve_eigenproblem, solve_on_mesh, EigenSolution, SolveMode, SolverConfig};
pub use error::{MaeError, Result};
pub use geometry::{DomainKind, DomainSpec};
pub use mesh::TriMesh;
