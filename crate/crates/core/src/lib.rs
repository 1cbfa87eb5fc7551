//! Finite-difference laboratory for the singular convective Dirichlet problem
//!
//! ```text
//! -Δu + K(x) g(u) + |∇u|^a = λ f(x, u)  in Ω,   u > 0 in Ω,   u = 0 on ∂Ω
//! ```
//!
//! on an interval or a rectangle. The crate builds the explicit sub- and
//! super-solutions of the existence theory, solves the ε-regularized problem
//! with continuation ε → 0, checks the comparison principle on discrete
//! fields and brackets the existence threshold λ* by bisection.

pub mod bifurcation;
pub mod comparison;
pub mod config;
pub mod constructions;
pub mod error;
pub mod grid;
pub mod hprofile;
pub mod linalg;
pub mod model;
pub mod quad;
pub mod solver;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{DomainKind, Field, Grid, Point};
pub use model::{make_problem, Potential, ProblemSpec, ReactionTerm, SignRegime, SingularTerm};
