//! Backward-difference time stepping of the mixed scheme
//!
//! ```text
//!     (∂²Uⁿ, w) + (div Σⁿ, w) = (f̄ⁿ, w)      ∀ w ∈ W_h
//!     (α Σⁿ, v) - (Uⁿ, div v) = 0             ∀ v ∈ V_h
//! ```
//!
//! with `∂Uⁿ = (Uⁿ - Uⁿ⁻¹)/k_n`, `∂²Uⁿ = (∂Uⁿ - ∂Uⁿ⁻¹)/k_n`, `U⁰ = P_h u₀` and
//! `∂U⁰ = P_h u₁`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::assembly::{self, SaddleSystem};
use crate::geometry::Point;
use crate::linalg::{norm2, SparseOperator, SymmetricSolver};
use crate::problem::{Coefficient, ForcingMode, Problem};
use crate::quadrature::time_rule;
use crate::spaces::{DispField, MixedSpace, StressField};
use crate::{Error, Result};

/// Time nodes `0 = t_0 < t_1 < … < t_N = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(end: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(end > 0.0) || !end.is_finite() {
            return Err(Error::InvalidGrid(format!("need N ≥ 1 and T > 0, got N = {steps}, T = {end}")));
        }
        let k = end / steps as f64;
        let mut nodes: Vec<f64> = (0..=steps).map(|n| n as f64 * k).collect();
        nodes[steps] = end;
        Ok(TimeGrid { nodes })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidGrid("at least two nodes are required".into()));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidGrid(format!("first node must be 0, got {}", nodes[0])));
        }
        for w in nodes.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::InvalidGrid(format!("nodes not strictly increasing at {} → {}", w[0], w[1])));
            }
        }
        Ok(TimeGrid { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn num_steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn t(&self, n: usize) -> f64 {
        self.nodes[n]
    }

    /// Step `k_n = t_n - t_{n-1}` for `n ≥ 1`.
    pub fn k(&self, n: usize) -> f64 {
        self.nodes[n] - self.nodes[n - 1]
    }

    pub fn end(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn max_step(&self) -> f64 {
        (1..self.nodes.len()).map(|n| self.k(n)).fold(0.0, f64::max)
    }

    /// Index `n` with `t ∈ I_n = (t_{n-1}, t_n]`.
    pub fn interval_of(&self, t: f64) -> Result<usize> {
        if !(t > self.nodes[0] && t <= self.end()) {
            return Err(Error::OutOfDomain {
                t,
                start: self.nodes[0],
                end: self.end(),
            });
        }
        Ok(self.nodes.partition_point(|&s| s < t).max(1))
    }
}

/// Discrete state at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: DispField,
    pub sigma: StressField,
    /// `∂Uⁿ`
    pub dt_u: DispField,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub space: Arc<MixedSpace>,
    pub grid: TimeGrid,
    pub states: Vec<State>,
    pub forcing_mode: ForcingMode,
    /// Load vectors `(f̄ⁿ, w_i)`; entry 0 holds `(f(0), w_i)`.
    pub f_bar: Vec<Vec<f64>>,
    /// Relative algebraic residual of each step's linear solve (0 at `n = 0`).
    pub solve_residuals: Vec<f64>,
}

impl Trajectory {
    pub fn num_nodes(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, n: usize) -> &State {
        &self.states[n]
    }

    /// `∂²Uⁿ = (∂Uⁿ - ∂Uⁿ⁻¹)/k_n` for `n ≥ 1`.
    pub fn dt2_u(&self, n: usize) -> DispField {
        let k = self.grid.k(n);
        self.states[n].dt_u.combine(1.0 / k, &self.states[n - 1].dt_u, -1.0 / k)
    }
}

/// Pointwise value of `f̄ⁿ` at `x`.
pub fn forcing_value(problem: &dyn Problem, grid: &TimeGrid, mode: ForcingMode, n: usize, x: Point) -> f64 {
    if n == 0 || mode == ForcingMode::Pointwise {
        return problem.f(x, grid.t(n));
    }
    let (a, k) = (grid.t(n - 1), grid.k(n));
    let rule = time_rule();
    rule.points.iter().zip(&rule.weights).map(|(&s, &w)| w * problem.f(x, a + s * k)).sum()
}

/// Assembles the scheme's operators once and caches one factorization per
/// distinct step size.
pub struct Solver {
    space: Arc<MixedSpace>,
    system: SaddleSystem,
    mass_solver: SymmetricSolver,
    step_solvers: BTreeMap<u64, SymmetricSolver>,
    tolerance: f64,
}

impl Solver {
    pub fn new(space: Arc<MixedSpace>, coef: &dyn Coefficient) -> Result<Self> {
        let system = assembly::assemble_system(&space, coef)?;
        let n = space.n_stress();
        let mass_solver = SymmetricSolver::new(system.m_sigma.clone(), n)?;
        Ok(Solver {
            space,
            system,
            mass_solver,
            step_solvers: BTreeMap::new(),
            tolerance: 1e-10,
        })
    }

    pub fn space(&self) -> &Arc<MixedSpace> {
        &self.space
    }

    pub fn system(&self) -> &SaddleSystem {
        &self.system
    }

    /// `M_σ⁻¹ y`
    pub fn stress_mass_solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(self.mass_solver.solve(y)?.0)
    }

    /// The stress `Σ` with `(αΣ, v) = (U, div v)` for all `v`.
    pub fn stress_from_disp(&self, u: &DispField) -> Result<StressField> {
        Ok(StressField::new(self.stress_mass_solve(&self.system.b.mul_transpose_vec(&u.coeffs))?))
    }

    pub fn initial_state(&self, problem: &dyn Problem) -> Result<State> {
        let u = self.space.l2_project_scalar(|x| problem.u0(x));
        let dt_u = self.space.l2_project_scalar(|x| problem.u1(x));
        let sigma = self.stress_from_disp(&u)?;
        Ok(State { u, sigma, dt_u })
    }

    pub fn load(&self, problem: &dyn Problem, grid: &TimeGrid, mode: ForcingMode, n: usize) -> Vec<f64> {
        self.space.disp_moments(|x| forcing_value(problem, grid, mode, n, x))
    }

    // Unknowns are scaled as (Σ, V) with U = k V, which keeps both blocks of
    // the quasi-definite matrix [M_σ, -k Bᵀ; -k B, -M_u] of comparable size.
    fn step_solver(&mut self, k: f64) -> Result<&SymmetricSolver> {
        let key = k.to_bits();
        if !self.step_solvers.contains_key(&key) {
            let ns = self.space.n_stress();
            let nd = self.space.n_disp();
            let bt = self.system.b.transpose();
            let matrix = SparseOperator::from_blocks(
                ns + nd,
                ns + nd,
                &[
                    (0, 0, &self.system.m_sigma, 1.0),
                    (0, ns, &bt, -k),
                    (ns, 0, &self.system.b, -k),
                    (ns, ns, &self.system.m_u, -1.0),
                ],
                true,
            );
            let solver = SymmetricSolver::new(matrix, ns)?.with_tolerance(self.tolerance);
            self.step_solvers.insert(key, solver);
        }
        Ok(&self.step_solvers[&key])
    }

    /// Advance one step of size `k` with load vector `(f̄ⁿ, w_i)`. Returns the
    /// new state and the relative residual of the linear solve.
    pub fn step(&mut self, prev: &State, k: f64, load: &[f64]) -> Result<(State, f64)> {
        if !(k > 0.0) {
            return Err(Error::InvalidGrid(format!("step size must be positive, got {k}")));
        }
        let ns = self.space.n_stress();
        let nd = self.space.n_disp();
        let pred: Vec<f64> = prev.u.coeffs.iter().zip(&prev.dt_u.coeffs).map(|(u, v)| u + k * v).collect();
        let mu_pred = self.system.m_u.mul_vec(&pred);
        let mut rhs = alloc::vec![0.0; ns + nd];
        for i in 0..nd {
            rhs[ns + i] = -(k * load[i] + mu_pred[i] / k);
        }
        let solver = self.step_solver(k)?;
        let (x, residual) = solver.solve(&rhs)?;
        let sigma = StressField::new(x[..ns].to_vec());
        let u = DispField::new(x[ns..].iter().map(|v| k * v).collect());
        let dt_u = u.combine(1.0 / k, &prev.u, -1.0 / k);
        Ok((State { u, sigma, dt_u }, residual))
    }

    pub fn run(&mut self, problem: &dyn Problem, grid: &TimeGrid, mode: ForcingMode) -> Result<Trajectory> {
        let mut states = Vec::with_capacity(grid.num_steps() + 1);
        let mut f_bar = Vec::with_capacity(grid.num_steps() + 1);
        let mut solve_residuals = Vec::with_capacity(grid.num_steps() + 1);
        states.push(self.initial_state(problem)?);
        f_bar.push(self.load(problem, grid, mode, 0));
        solve_residuals.push(0.0);
        let steady = problem.forcing_is_time_independent();
        for n in 1..=grid.num_steps() {
            let load = if steady { f_bar[0].clone() } else { self.load(problem, grid, mode, n) };
            let (state, res) = self.step(&states[n - 1], grid.k(n), &load)?;
            states.push(state);
            f_bar.push(load);
            solve_residuals.push(res);
        }
        Ok(Trajectory {
            space: self.space.clone(),
            grid: grid.clone(),
            states,
            forcing_mode: mode,
            f_bar,
            solve_residuals,
        })
    }

    /// Discrete energy `‖∂Uⁿ‖² + ‖Σⁿ‖²_{A⁻¹}`.
    pub fn energy(&self, state: &State) -> f64 {
        self.system.m_u.bilinear(&state.dt_u.coeffs, &state.dt_u.coeffs)
            + self.system.m_sigma.bilinear(&state.sigma.coeffs, &state.sigma.coeffs)
    }

    /// Largest `|r₁ⁿ(v_i)|` over stress basis functions and `|r₂ⁿ(w_i)|` over
    /// displacement basis functions for node `n ≥ 1` of a trajectory.
    pub fn discrete_residuals(&self, traj: &Trajectory, n: usize) -> (f64, f64) {
        let s = &traj.states[n];
        let r1: Vec<f64> = self
            .system
            .m_sigma
            .mul_vec(&s.sigma.coeffs)
            .iter()
            .zip(self.system.b.mul_transpose_vec(&s.u.coeffs))
            .map(|(a, b)| a - b)
            .collect();
        let r1_max = r1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if n == 0 {
            return (r1_max, 0.0);
        }
        let acc = self.system.m_u.mul_vec(&traj.dt2_u(n).coeffs);
        let div = self.system.b.mul_vec(&s.sigma.coeffs);
        let r2_max = acc
            .iter()
            .zip(&div)
            .zip(&traj.f_bar[n])
            .map(|((a, d), f)| (a + d - f).abs())
            .fold(0.0, f64::max);
        (r1_max, r2_max)
    }
}

/// Run the scheme for a problem on a space.
pub fn run(problem: &dyn Problem, space: Arc<MixedSpace>, grid: &TimeGrid, mode: ForcingMode) -> Result<Trajectory> {
    Solver::new(space, problem.coefficient())?.run(problem, grid, mode)
}

/// Uniform tiny-step run standing in for the semidiscrete (continuous in time) scheme.
pub fn semidiscrete_reference(problem: &dyn Problem, space: Arc<MixedSpace>, end: f64, kappa: f64) -> Result<Trajectory> {
    let steps = (end / kappa).round().max(1.0) as usize;
    let grid = TimeGrid::uniform(end, steps)?;
    run(problem, space, &grid, ForcingMode::Pointwise)
}

/// Relative difference helper used by callers comparing coefficient vectors.
pub fn relative_difference(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2(&d) / norm2(b).max(norm2(a)).max(f64::MIN_POSITIVE)
}
