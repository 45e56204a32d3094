use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::assembly::alpha_stress_at;
use crate::geometry::{self, Point};
use crate::problem::{Coefficient, ExactSolution, Problem};
use crate::solver::Trajectory;
use crate::spaces::{DispField, MixedSpace, StressField};

/// Per-node true errors of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueErrors {
    /// `‖Uⁿ - u(t_n)‖`
    pub u: Vec<f64>,
    /// `‖Σⁿ - σ(t_n)‖_{A⁻¹}`
    pub sigma: Vec<f64>,
    /// `‖∂Uⁿ - u_t(t_n)‖`
    pub u_t: Vec<f64>,
}

impl TrueErrors {
    pub fn max_u(&self) -> f64 {
        self.u.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_sigma(&self) -> f64 {
        self.sigma.iter().copied().fold(0.0, f64::max)
    }
}

/// `‖U - g‖` with the data rule.
pub fn disp_error(space: &MixedSpace, u: &DispField, g: impl Fn(Point) -> f64) -> f64 {
    let rule = space.data_rule();
    let mut total = 0.0;
    for c in 0..space.num_cells() {
        let det = space.jacobian_det(c);
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let d = space.disp_at(u, c, *p) - g(space.to_physical(c, *p));
            total += w * det * d * d;
        }
    }
    total.sqrt()
}

/// `‖Σ - s‖_{A⁻¹}` with the data rule.
pub fn stress_error(space: &MixedSpace, coef: &dyn Coefficient, sigma: &StressField, s: impl Fn(Point) -> [f64; 2]) -> f64 {
    let rule = space.data_rule();
    let mut total = 0.0;
    for c in 0..space.num_cells() {
        let det = space.jacobian_det(c);
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let x = space.to_physical(c, *p);
            let v = space.stress_at(sigma, c, *p).0;
            let e = geometry::sub(v, s(x));
            let ae = geometry::mat_vec(&coef.alpha(x), e);
            total += w * det * geometry::dot(ae, e);
        }
    }
    total.sqrt()
}

/// Errors at every node against a registered exact solution.
pub fn true_error(traj: &Trajectory, problem: &dyn Problem, exact: &dyn ExactSolution) -> TrueErrors {
    let space = &*traj.space;
    let coef = problem.coefficient();
    let mut out = TrueErrors {
        u: Vec::new(),
        sigma: Vec::new(),
        u_t: Vec::new(),
    };
    for (n, s) in traj.states.iter().enumerate() {
        let t = traj.grid.t(n);
        out.u.push(disp_error(space, &s.u, |x| exact.u(x, t)));
        out.sigma.push(stress_error(space, coef, &s.sigma, |x| exact.sigma(x, t)));
        out.u_t.push(disp_error(space, &s.dt_u, |x| exact.u_t(x, t)));
    }
    out
}

/// `‖α σ‖` of a discrete field, a helper for scale-aware tolerances.
pub fn alpha_stress_norm(space: &MixedSpace, coef: &dyn Coefficient, sigma: &StressField) -> f64 {
    let rule = space.cell_rule();
    let mut total = 0.0;
    for c in 0..space.num_cells() {
        let det = space.jacobian_det(c);
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let v = alpha_stress_at(space, coef, sigma, c, *p);
            total += w * det * geometry::dot(v, v);
        }
    }
    total.sqrt()
}
