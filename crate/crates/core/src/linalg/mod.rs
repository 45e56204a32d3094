//! Sparse and dense linear algebra used by the discretization.
//!
//! Everything here is self-contained so the crate stays `no_std`.

#[allow(unused_imports)]
use num_traits::Float;

mod dense;
mod ordering;
mod skyline;
mod sparse;

pub use dense::{dense_lu_solve, dense_rank, DenseMatrix};
pub use ordering::{reverse_cuthill_mckee, saddle_ordering};
pub use skyline::{LdlFactor, SymmetricSolver};
pub use sparse::{SparseOperator, TripletBuffer};

/// Euclidean norm.
pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
