//! Mixed finite element discretization of the second-order linear wave equation
//!
//! ```text
//!     u_tt - div(A grad u) = f   in Ω × (0, T],   u = 0 on ∂Ω,
//! ```
//!
//! written in velocity-stress form with `σ = -A grad u`, discretized by
//! Raviart-Thomas (stress) / discontinuous P_ℓ (displacement) pairs in space and a
//! backward-difference scheme in time, together with computable a posteriori
//! error estimators in `L∞(L²)` built on a C¹ time reconstruction and mixed
//! elliptic reconstructions.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! anything else touching the operating system live in the `mixedwave` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod assembly;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod problem;
pub mod quadrature;
pub mod reconstruction;
pub mod solver;
pub mod spaces;
pub mod verification;

pub use error::{Error, Result};
pub use geometry::{Mat2, Point};
pub use mesh::{Mesh, RefinementResult};
pub use problem::{ForcingMode, Problem};
pub use solver::{State, TimeGrid, Trajectory};
pub use spaces::{DispField, MixedSpace, RtIndex, StressField};
