//! C¹ time reconstruction of node sequences and mixed elliptic reconstructions.
//!
//! On `I_n = (t_{n-1}, t_n]` the time reconstruction of a sequence `Vⁿ` is
//!
//! ```text
//!     V(t) = Vⁿ + (t - t_n) ∂Vⁿ - ((t - t_{n-1})(t_n - t)² / k_n) ∂²Vⁿ,
//! ```
//!
//! which interpolates values and backward-difference rates at the nodes and has
//! `V_tt = (1 + μⁿ) ∂²Vⁿ` with `μⁿ(t) = -6 k_n⁻¹ (t - t_{n-1/2})`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::assembly::{self, SaddleSystem};
use crate::geometry::{self, Point};
use crate::linalg::{SparseOperator, SymmetricSolver};
use crate::mesh::Mesh;
use crate::problem::{Coefficient, Problem};
use crate::solver::{forcing_value, Solver, TimeGrid, Trajectory};
use crate::spaces::{disp_basis, DispField, MixedSpace, StressField};
use crate::{Error, Result};

/// `μⁿ(t) = -6 k_n⁻¹ (t - t_{n-1/2})`.
pub fn mu(grid: &TimeGrid, n: usize, t: f64) -> f64 {
    let mid = 0.5 * (grid.t(n - 1) + grid.t(n));
    -6.0 * (t - mid) / grid.k(n)
}

/// `∫_{t_{n-1}}^{s} μⁿ = -3 k_n⁻¹ [(s - t_{n-1/2})² - k_n²/4]`.
pub fn mu_antiderivative(grid: &TimeGrid, n: usize, s: f64) -> f64 {
    let k = grid.k(n);
    let mid = 0.5 * (grid.t(n - 1) + grid.t(n));
    -3.0 / k * ((s - mid) * (s - mid) - 0.25 * k * k)
}

/// Piecewise-cubic C¹ reconstruction of a sequence of coefficient vectors.
#[derive(Debug, Clone)]
pub struct C1Interpolant {
    grid: TimeGrid,
    values: Vec<Vec<f64>>,
    rates: Vec<Vec<f64>>,
    /// `second[n]` is `∂²Vⁿ` for `n ≥ 1`; entry 0 is unused.
    second: Vec<Vec<f64>>,
}

impl C1Interpolant {
    /// Builds `∂Vⁿ = (Vⁿ - Vⁿ⁻¹)/k_n` and `∂²Vⁿ = (∂Vⁿ - ∂Vⁿ⁻¹)/k_n` with `∂V⁰`
    /// given.
    pub fn build(grid: &TimeGrid, values: Vec<Vec<f64>>, initial_rate: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_steps() + 1 {
            return Err(Error::GridMismatch(alloc::format!(
                "{} node values for a grid with {} nodes",
                values.len(),
                grid.num_steps() + 1
            )));
        }
        let dim = initial_rate.len();
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::GridMismatch("node values differ in length from the initial rate".into()));
        }
        let mut rates = Vec::with_capacity(values.len());
        let mut second = Vec::with_capacity(values.len());
        rates.push(initial_rate);
        second.push(Vec::new());
        for n in 1..values.len() {
            let k = grid.k(n);
            let r: Vec<f64> = values[n].iter().zip(&values[n - 1]).map(|(a, b)| (a - b) / k).collect();
            let s: Vec<f64> = r.iter().zip(&rates[n - 1]).map(|(a, b)| (a - b) / k).collect();
            rates.push(r);
            second.push(s);
        }
        Ok(C1Interpolant {
            grid: grid.clone(),
            values,
            rates,
            second,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn node_value(&self, n: usize) -> &[f64] {
        &self.values[n]
    }

    pub fn node_rate(&self, n: usize) -> &[f64] {
        &self.rates[n]
    }

    /// `∂²Vⁿ`, `n ≥ 1`.
    pub fn second_difference(&self, n: usize) -> &[f64] {
        &self.second[n]
    }

    /// `(V(t), V_t(t), V_tt(t))` for `t ∈ [t_0, T]`.
    pub fn eval(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let n = if t == self.grid.t(0) { 1 } else { self.grid.interval_of(t)? };
        Ok(self.eval_on(n, t))
    }

    /// Evaluate the cubic of interval `n` at `t` (no domain check).
    pub fn eval_on(&self, n: usize, t: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let k = self.grid.k(n);
        let tn = self.grid.t(n);
        let tau = t - self.grid.t(n - 1);
        let r = tn - t;
        let g = tau * r * r / k;
        let dg = (r * r - 2.0 * tau * r) / k;
        let ddg = (2.0 * tau - 4.0 * r) / k;
        let (v, vt, s) = (&self.values[n], &self.rates[n], &self.second[n]);
        let value = v.iter().zip(vt).zip(s).map(|((a, b), c)| a + (t - tn) * b - g * c).collect();
        let rate = vt.iter().zip(s).map(|(b, c)| b - dg * c).collect();
        let acc = s.iter().map(|c| -ddg * c).collect();
        (value, rate, acc)
    }
}

/// A discrete space obtained by uniform refinement of a base space, with the
/// map from fine cells to the base cells containing them.
#[derive(Debug, Clone)]
pub struct Enrichment {
    pub levels: usize,
    pub space: Arc<MixedSpace>,
    pub parent: Vec<usize>,
}

impl Enrichment {
    /// `levels` uniform refinements at the same Raviart-Thomas index; 0 gives
    /// the base space itself.
    pub fn refine(base: &MixedSpace, levels: usize) -> Self {
        let mut mesh: Mesh = base.mesh().clone();
        let mut parent: Vec<usize> = (0..mesh.num_cells()).collect();
        for _ in 0..levels {
            let r = mesh.refine_uniform();
            parent = r.parent_of_cell.iter().map(|&p| parent[p]).collect();
            mesh = r.child_mesh;
        }
        let space = Arc::new(
            MixedSpace::with_quadrature(Arc::new(mesh), base.rt_index(), base.quadrature())
                .expect("base quadrature is admissible"),
        );
        Enrichment { levels, space, parent }
    }
}

/// Fields at one node.
#[derive(Debug, Clone)]
pub struct ReconstructedPair {
    pub u: DispField,
    pub sigma: StressField,
}

/// Solves the enriched mixed problem
///
/// ```text
///     (α σ̃, v) - (ũ, div v) = 0,      (div σ̃, w) = (g, w)
/// ```
///
/// for all enriched `(v, w)`, with `g = f̄ⁿ - P_h ∂²Uⁿ` given as a discrete part
/// on the base space plus closed-form data.
pub struct EllipticReconstructor {
    base: Arc<MixedSpace>,
    enrichment: Enrichment,
    system: SaddleSystem,
    solver: SymmetricSolver,
}

impl EllipticReconstructor {
    pub fn new(base: Arc<MixedSpace>, coef: &dyn Coefficient, levels: usize) -> Result<Self> {
        let enrichment = Enrichment::refine(&base, levels);
        let space = &enrichment.space;
        let system = assembly::assemble_system(space, coef)?;
        let (ns, nd) = (space.n_stress(), space.n_disp());
        let bt = system.b.transpose();
        let matrix = SparseOperator::from_blocks(
            ns + nd,
            ns + nd,
            &[(0, 0, &system.m_sigma, 1.0), (0, ns, &bt, -1.0), (ns, 0, &system.b, -1.0)],
            true,
        );
        let solver = SymmetricSolver::new(matrix, ns)?;
        Ok(EllipticReconstructor {
            base,
            enrichment,
            system,
            solver,
        })
    }

    pub fn base(&self) -> &Arc<MixedSpace> {
        &self.base
    }

    pub fn enrichment(&self) -> &Enrichment {
        &self.enrichment
    }

    pub fn fine_space(&self) -> &Arc<MixedSpace> {
        &self.enrichment.space
    }

    pub fn system(&self) -> &SaddleSystem {
        &self.system
    }

    /// Value at a fine-cell reference point of a base displacement field.
    pub fn base_disp_at(&self, u: &DispField, fine_cell: usize, xh: Point) -> f64 {
        let x = self.fine_space().to_physical(fine_cell, xh);
        let p = self.enrichment.parent[fine_cell];
        self.base.disp_at(u, p, self.base.to_reference(p, x))
    }

    /// Value and divergence at a fine-cell reference point of a base stress field.
    pub fn base_stress_at(&self, s: &StressField, fine_cell: usize, xh: Point) -> ([f64; 2], f64) {
        let x = self.fine_space().to_physical(fine_cell, xh);
        let p = self.enrichment.parent[fine_cell];
        self.base.stress_at(s, p, self.base.to_reference(p, x))
    }

    /// `(ũ, σ̃)` for `g = data - discrete`, where `discrete` is `P_h ∂²Uⁿ` on
    /// the base space and `data` is `f̄ⁿ`.
    pub fn reconstruct(&self, discrete: &DispField, data: impl Fn(Point) -> f64) -> Result<ReconstructedPair> {
        let space = self.fine_space();
        let rule = space.data_rule();
        let rt = space.rt_index();
        let nd_local = space.n_local_disp();
        let (ns, nd) = (space.n_stress(), space.n_disp());
        let mut rhs = vec![0.0; ns + nd];
        let mut phi = [0.0; 3];
        for c in 0..space.num_cells() {
            let det = space.jacobian_det(c);
            let r = space.disp_dofs(c);
            for (p, &w) in rule.points.iter().zip(&rule.weights) {
                let x = space.to_physical(c, *p);
                let g = data(x) - self.base_disp_at(discrete, c, *p);
                disp_basis(rt, *p, &mut phi);
                for i in 0..nd_local {
                    rhs[ns + r.start + i] -= w * det * g * phi[i];
                }
            }
        }
        let (x, _) = self.solver.solve(&rhs)?;
        Ok(ReconstructedPair {
            sigma: StressField::new(x[..ns].to_vec()),
            u: DispField::new(x[ns..].to_vec()),
        })
    }

    /// Largest Galerkin-orthogonality defects against the base spaces,
    ///
    /// ```text
    ///     (α(σ̃ - Σ), v_h) - (ũ - U, div v_h)   and   (div(σ̃ - Σ), w_h),
    /// ```
    ///
    /// over all base basis functions, integrated on the enriched cells.
    pub fn orthogonality_defect(
        &self,
        coef: &dyn Coefficient,
        pair: &ReconstructedPair,
        u: &DispField,
        sigma: &StressField,
    ) -> (f64, f64) {
        let base = &*self.base;
        let fine = self.fine_space();
        let rule = fine.cell_rule();
        let mut r1 = vec![0.0; base.n_stress()];
        let mut r2 = vec![0.0; base.n_disp()];
        let mut val = [[0.0; 2]; 8];
        let mut div = [0.0; 8];
        let mut phi = [0.0; 3];
        for c in 0..fine.num_cells() {
            let det = fine.jacobian_det(c);
            let parent = self.enrichment.parent[c];
            for (p, &w) in rule.points.iter().zip(&rule.weights) {
                let x = fine.to_physical(c, *p);
                let xb = base.to_reference(parent, x);
                let (st, dt) = fine.stress_at(&pair.sigma, c, *p);
                let ut = fine.disp_at(&pair.u, c, *p);
                let (sb, db) = base.stress_at(sigma, parent, xb);
                let ub = base.disp_at(u, parent, xb);
                let e = geometry::mat_vec(&coef.alpha(x), geometry::sub(st, sb));
                let eu = ut - ub;
                let ed = dt - db;
                base.stress_basis(parent, xb, &mut val, &mut div);
                for (m, &g) in base.stress_dofs(parent).iter().enumerate() {
                    r1[g] += w * det * (geometry::dot(e, val[m]) - eu * div[m]);
                }
                disp_basis(base.rt_index(), xb, &mut phi);
                for (i, g) in base.disp_dofs(parent).enumerate() {
                    r2[g] += w * det * ed * phi[i];
                }
            }
        }
        let m1 = r1.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let m2 = r2.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        (m1, m2)
    }

    /// Largest `|(α σ̃, v) - (ũ, div v)|` over enriched basis functions, the weak
    /// form of `α σ̃ = -∇ũ`.
    pub fn constitutive_defect(&self, pair: &ReconstructedPair) -> f64 {
        let a = self.system.m_sigma.mul_vec(&pair.sigma.coeffs);
        let b = self.system.b.mul_transpose_vec(&pair.u.coeffs);
        a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    }
}

/// Elliptic reconstructions at every node of a trajectory together with their
/// C¹ time reconstructions.
pub struct EllipticReconstruction {
    pub levels: usize,
    pub nodes: Vec<ReconstructedPair>,
    pub c1_u: C1Interpolant,
    pub c1_sigma: C1Interpolant,
}

/// Time reconstructions of the discrete solution and, optionally, of its
/// elliptic reconstructions.
pub struct ReconstructionBundle {
    pub c1_u: C1Interpolant,
    pub c1_sigma: C1Interpolant,
    pub elliptic: Option<EllipticReconstruction>,
}

/// `P_h ∂²Uⁿ` as used by the reconstruction at node `n`. At `n = 0` the
/// acceleration is taken from the equation itself, `P_h f(0) - div Σ⁰`.
pub fn discrete_acceleration(traj: &Trajectory, n: usize) -> DispField {
    if n > 0 {
        return traj.dt2_u(n);
    }
    let space = &traj.space;
    let b = assembly::assemble_divergence(space);
    let div = space.disp_mass_solve(&b.mul_vec(&traj.states[0].sigma.coeffs));
    space.disp_mass_solve(&traj.f_bar[0]).combine(1.0, &div, -1.0)
}

impl EllipticReconstruction {
    /// Reconstruct every node of `traj` on `levels` uniform refinements. The
    /// initial rate of the time reconstruction is the forward difference
    /// `(ũ¹ - ũ⁰)/k₁`.
    pub fn build(traj: &Trajectory, problem: &dyn Problem, levels: usize) -> Result<Self> {
        let rec = EllipticReconstructor::new(traj.space.clone(), problem.coefficient(), levels)?;
        let nodes = (0..traj.num_nodes())
            .map(|n| {
                let acc = discrete_acceleration(traj, n);
                rec.reconstruct(&acc, |x| forcing_value(problem, &traj.grid, traj.forcing_mode, n, x))
            })
            .collect::<Result<Vec<_>>>()?;
        let k1 = traj.grid.k(1);
        let rate_u = nodes[1].u.combine(1.0 / k1, &nodes[0].u, -1.0 / k1);
        let rate_s = nodes[1].sigma.combine(1.0 / k1, &nodes[0].sigma, -1.0 / k1);
        let c1_u = C1Interpolant::build(&traj.grid, nodes.iter().map(|p| p.u.coeffs.clone()).collect(), rate_u.coeffs)?;
        let c1_sigma = C1Interpolant::build(&traj.grid, nodes.iter().map(|p| p.sigma.coeffs.clone()).collect(), rate_s.coeffs)?;
        Ok(EllipticReconstruction {
            levels,
            nodes,
            c1_u,
            c1_sigma,
        })
    }
}

impl ReconstructionBundle {
    /// Time reconstructions of `U` and `Σ` with `∂Σ⁰ = M_σ⁻¹ Bᵀ ∂U⁰`, plus the
    /// elliptic reconstructions when `levels` is given.
    pub fn build(traj: &Trajectory, problem: &dyn Problem, levels: Option<usize>) -> Result<Self> {
        let solver = Solver::new(traj.space.clone(), problem.coefficient())?;
        let s0 = &traj.states[0];
        let c1_u = C1Interpolant::build(&traj.grid, traj.states.iter().map(|s| s.u.coeffs.clone()).collect(), s0.dt_u.coeffs.clone())?;
        let c1_sigma = C1Interpolant::build(
            &traj.grid,
            traj.states.iter().map(|s| s.sigma.coeffs.clone()).collect(),
            solver.stress_from_disp(&s0.dt_u)?.coeffs,
        )?;
        let elliptic = levels.map(|l| EllipticReconstruction::build(traj, problem, l)).transpose()?;
        Ok(ReconstructionBundle { c1_u, c1_sigma, elliptic })
    }
}
