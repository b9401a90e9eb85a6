//! Adaptive local discontinuous Galerkin solver for the scalar Tresca
//! friction problem
//!
//! ```text
//! −Δu + u = f in Ω,   u = 0 on Γ1,   ∂u/∂n = −gλ, |λ| ≤ 1, λu = |u| on Γ2,
//! ```
//!
//! with residual a posteriori error estimators, Dörfler-marked adaptive
//! refinement and numerical checks of the estimator's reliability and
//! efficiency.

pub mod adaptivity;
pub mod assembly;
pub mod cli_io;
pub mod dg_space;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod mesh;
pub mod verification;
pub mod vi_solver;

pub use error::{Error, Result};
