//! Problem data: coefficient, forcing, initial data and optional exact solution.

use crate::geometry::{self, Mat2, Point};

/// Symmetric uniformly positive definite diffusion coefficient `A(x)`.
pub trait Coefficient: Sync {
    fn a(&self, x: Point) -> Mat2;

    /// `α = A⁻¹`
    fn alpha(&self, x: Point) -> Mat2 {
        geometry::inverse(&self.a(x))
    }

    /// `true` when `A` does not depend on `x`.
    fn is_constant(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantCoefficient(pub Mat2);

impl Coefficient for ConstantCoefficient {
    fn a(&self, _x: Point) -> Mat2 {
        self.0
    }

    fn is_constant(&self) -> bool {
        true
    }
}

impl<F: Fn(Point) -> Mat2 + Sync> Coefficient for F {
    fn a(&self, x: Point) -> Mat2 {
        self(x)
    }
}

/// Closed-form exact solution fields.
pub trait ExactSolution: Sync {
    fn u(&self, x: Point, t: f64) -> f64;
    fn u_t(&self, x: Point, t: f64) -> f64;
    /// `σ = -A ∇u`
    fn sigma(&self, x: Point, t: f64) -> [f64; 2];
}

/// Initial-boundary value problem `u_tt - div(A ∇u) = f`, `u = 0` on the boundary.
pub trait Problem: Sync {
    fn coefficient(&self) -> &dyn Coefficient;
    fn f(&self, x: Point, t: f64) -> f64;
    fn u0(&self, x: Point) -> f64;
    fn u1(&self, x: Point) -> f64;

    /// `σ(0) = -A ∇u₀`, used for the initial stress error. The default takes
    /// central differences of `u₀`.
    fn sigma0(&self, x: Point) -> [f64; 2] {
        let h = 1e-6;
        let gx = (self.u0([x[0] + h, x[1]]) - self.u0([x[0] - h, x[1]])) / (2.0 * h);
        let gy = (self.u0([x[0], x[1] + h]) - self.u0([x[0], x[1] - h])) / (2.0 * h);
        let a = self.coefficient().a(x);
        let g = geometry::mat_vec(&a, [gx, gy]);
        [-g[0], -g[1]]
    }

    fn exact(&self) -> Option<&dyn ExactSolution> {
        None
    }

    /// `true` when `f` does not depend on `t`.
    fn forcing_is_time_independent(&self) -> bool {
        false
    }
}

/// How the load `f̄ⁿ` of a step is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ForcingMode {
    /// `f̄ⁿ = f(t_n)`
    Pointwise,
    /// `f̄ⁿ = k_n⁻¹ ∫_{I_n} f(s) ds`
    IntervalAverage,
}
