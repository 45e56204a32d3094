//! A posteriori estimators for the fully discrete scheme.
//!
//! Spatial terms measure how far a discrete pair is from being the mixed
//! elliptic projection of its reconstruction; temporal terms measure the time
//! discretization through the C¹ reconstruction. The composite bounds add both
//! with user-supplied constants.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::assembly::{self, SaddleSystem};
use crate::geometry::{self, Mat2, Point};
use crate::linalg::{SparseOperator, SymmetricSolver, TripletBuffer};
use crate::problem::{Coefficient, Problem};
use crate::quadrature::time_rule;
use crate::reconstruction::mu;
use crate::solver::{forcing_value, TimeGrid, Trajectory};
use crate::spaces::{disp_basis, DispField, MixedSpace, StressField};
use crate::verification::{disp_error, stress_error, TrueErrors};
use crate::{Error, Result};

/// How `min_{w_h} ‖h(ασ_h - ∇w_h)‖` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum RecoveryMode {
    /// Minimum over the broken displacement space: `‖h ασ_h‖` at `ℓ = 0`,
    /// cellwise mean removed at `ℓ = 1`.
    Literal,
    /// Minimum over continuous piecewise linears vanishing on the boundary.
    #[default]
    CgRecovery,
}

impl RecoveryMode {
    pub fn name(self) -> &'static str {
        match self {
            RecoveryMode::Literal => "literal",
            RecoveryMode::CgRecovery => "cg-recovery",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "literal" => Some(RecoveryMode::Literal),
            "cg-recovery" => Some(RecoveryMode::CgRecovery),
            _ => None,
        }
    }

    pub fn other(self) -> Self {
        match self {
            RecoveryMode::Literal => RecoveryMode::CgRecovery,
            RecoveryMode::CgRecovery => RecoveryMode::Literal,
        }
    }
}

fn rss(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Per-cell ingredients of the spatial estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialEstimate {
    /// `‖h^{ℓ+1} r₂‖_K`
    pub residual_u: Vec<f64>,
    /// `‖h r₂‖_K`
    pub residual_sigma: Vec<f64>,
    /// `‖h(ασ_h - ∇w_h)‖_K`
    pub recovery: Vec<f64>,
    /// `(Σ_E ½ h_E ‖J(ασ_h·t)‖²_E)^{1/2}` over the interior edges of `K`
    pub jump: Vec<f64>,
    /// `‖h curl_h(ασ_h)‖_K`
    pub curl: Vec<f64>,
}

impl SpatialEstimate {
    pub fn zeros(cells: usize) -> Self {
        SpatialEstimate {
            residual_u: vec![0.0; cells],
            residual_sigma: vec![0.0; cells],
            recovery: vec![0.0; cells],
            jump: vec![0.0; cells],
            curl: vec![0.0; cells],
        }
    }

    pub fn num_cells(&self) -> usize {
        self.residual_u.len()
    }

    pub fn residual_u_total(&self) -> f64 {
        rss(&self.residual_u)
    }

    pub fn residual_sigma_total(&self) -> f64 {
        rss(&self.residual_sigma)
    }

    pub fn recovery_total(&self) -> f64 {
        rss(&self.recovery)
    }

    pub fn jump_total(&self) -> f64 {
        rss(&self.jump)
    }

    pub fn curl_total(&self) -> f64 {
        rss(&self.curl)
    }

    /// The displacement estimator `‖h^{ℓ+1} r₂‖ + ‖h(ασ_h - ∇w_h)‖`.
    pub fn total_u(&self) -> f64 {
        self.residual_u_total() + self.recovery_total()
    }

    /// The stress estimator `‖h r₂‖ + ‖h^{1/2} J(ασ_h·t)‖ + ‖h curl_h(ασ_h)‖`.
    pub fn total_sigma(&self) -> f64 {
        self.residual_sigma_total() + self.jump_total() + self.curl_total()
    }

    fn parts(&self) -> [&Vec<f64>; 5] {
        [&self.residual_u, &self.residual_sigma, &self.recovery, &self.jump, &self.curl]
    }

    pub fn is_nonnegative(&self) -> bool {
        self.parts().iter().all(|p| p.iter().all(|v| *v >= 0.0))
    }
}

/// Conforming P1 space with zero boundary values used by the recovery term.
struct CgRecovery {
    index: Vec<Option<usize>>,
    /// Barycentric gradients per cell.
    grads: Vec<[[f64; 2]; 3]>,
    solver: Option<SymmetricSolver>,
}

impl CgRecovery {
    fn new(space: &MixedSpace) -> Result<Self> {
        let mesh = space.mesh();
        let boundary = mesh.boundary_vertices();
        let mut index = vec![None; mesh.num_vertices()];
        let mut count = 0;
        for (v, slot) in index.iter_mut().enumerate() {
            if !boundary[v] {
                *slot = Some(count);
                count += 1;
            }
        }
        let mut grads = Vec::with_capacity(mesh.num_cells());
        let mut triplets = TripletBuffer::with_capacity(9 * mesh.num_cells());
        for c in 0..mesh.num_cells() {
            let [p0, p1, p2] = mesh.cell_vertices(c);
            let jac: Mat2 = [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]];
            let inv = geometry::inverse(&jac);
            let g1 = inv[0];
            let g2 = inv[1];
            let g = [[-g1[0] - g2[0], -g1[1] - g2[1]], g1, g2];
            let h = mesh.h_per_cell()[c];
            let weight = h * h * mesh.area(c);
            let verts = mesh.cells()[c];
            for i in 0..3 {
                for j in 0..3 {
                    if let (Some(a), Some(b)) = (index[verts[i]], index[verts[j]]) {
                        triplets.push(a, b, weight * geometry::dot(g[i], g[j]));
                    }
                }
            }
            grads.push(g);
        }
        let solver = if count > 0 {
            let k = SparseOperator::from_triplets(count, count, triplets, true);
            Some(SymmetricSolver::new(k, count)?)
        } else {
            None
        };
        Ok(CgRecovery { index, grads, solver })
    }
}

/// Precomputed quadrature data for evaluating the spatial estimators on one
/// space.
pub struct SpatialEstimator<'a> {
    space: Arc<MixedSpace>,
    coef: &'a dyn Coefficient,
    mode: RecoveryMode,
    divergence: SparseOperator,
    data_points: Vec<Point>,
    data_weights: Vec<f64>,
    data_phi: Vec<[f64; 3]>,
    cell_weights: Vec<f64>,
    cell_alpha: Vec<Mat2>,
    cg: CgRecovery,
}

impl<'a> SpatialEstimator<'a> {
    pub fn new(space: Arc<MixedSpace>, coef: &'a dyn Coefficient, mode: RecoveryMode) -> Result<Self> {
        let data = space.data_rule();
        let cell = space.cell_rule();
        let cells = space.num_cells();
        let mut data_points = Vec::with_capacity(cells * data.len());
        let mut data_weights = Vec::with_capacity(cells * data.len());
        let mut cell_weights = Vec::with_capacity(cells * cell.len());
        let mut cell_alpha = Vec::with_capacity(cells * cell.len());
        for c in 0..cells {
            let det = space.jacobian_det(c);
            for (p, &w) in data.points.iter().zip(&data.weights) {
                data_points.push(space.to_physical(c, *p));
                data_weights.push(w * det);
            }
            for (p, &w) in cell.points.iter().zip(&cell.weights) {
                let x = space.to_physical(c, *p);
                cell_weights.push(w * det);
                cell_alpha.push(assembly::checked_alpha(coef, x)?);
            }
        }
        let data_phi = data
            .points
            .iter()
            .map(|p| {
                let mut phi = [0.0; 3];
                disp_basis(space.rt_index(), *p, &mut phi);
                phi
            })
            .collect();
        let divergence = assembly::assemble_divergence(&space);
        let cg = CgRecovery::new(&space)?;
        Ok(SpatialEstimator {
            space,
            coef,
            mode,
            divergence,
            data_points,
            data_weights,
            data_phi,
            cell_weights,
            cell_alpha,
            cg,
        })
    }

    pub fn space(&self) -> &Arc<MixedSpace> {
        &self.space
    }

    pub fn mode(&self) -> RecoveryMode {
        self.mode
    }

    pub fn coefficient(&self) -> &'a dyn Coefficient {
        self.coef
    }

    /// Physical data-rule points, cell by cell.
    pub fn data_points(&self) -> &[Point] {
        &self.data_points
    }

    pub fn data_values(&self, mut f: impl FnMut(Point) -> f64) -> Vec<f64> {
        self.data_points.iter().map(|x| f(*x)).collect()
    }

    /// Values of a displacement field at the data points.
    pub fn disp_values(&self, u: &DispField) -> Vec<f64> {
        let nq = self.data_phi.len();
        let nl = self.space.n_local_disp();
        let mut out = Vec::with_capacity(self.data_points.len());
        for c in 0..self.space.num_cells() {
            let coeffs = &u.coeffs[self.space.disp_dofs(c)];
            for q in 0..nq {
                out.push((0..nl).map(|i| coeffs[i] * self.data_phi[q][i]).sum());
            }
        }
        out
    }

    /// `div σ` as a displacement field (exact, since `div V_h = W_h`).
    pub fn div_field(&self, sigma: &StressField) -> DispField {
        self.space.disp_mass_solve(&self.divergence.mul_vec(&sigma.coeffs))
    }

    /// `L²` norm of values at the data points.
    pub fn data_norm(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.data_weights).map(|(v, w)| w * v * v).sum::<f64>().sqrt()
    }

    fn cell_data_norms(&self, values: &[f64]) -> Vec<f64> {
        let nq = self.data_phi.len();
        values
            .chunks(nq)
            .zip(self.data_weights.chunks(nq))
            .map(|(v, w)| v.iter().zip(w).map(|(a, b)| b * a * a).sum::<f64>().sqrt())
            .collect()
    }

    /// `ασ - ∇w` at the cell-rule points for the minimizing `w` of the given
    /// mode. Linear in `σ`.
    pub fn recovery_values(&self, sigma: &StressField, mode: RecoveryMode) -> Vec<[f64; 2]> {
        let rule = self.space.cell_rule();
        let nq = rule.len();
        let mut vals = Vec::with_capacity(self.cell_weights.len());
        for c in 0..self.space.num_cells() {
            for (q, p) in rule.points.iter().enumerate() {
                let s = self.space.stress_at(sigma, c, *p).0;
                vals.push(geometry::mat_vec(&self.cell_alpha[c * nq + q], s));
            }
        }
        match mode {
            RecoveryMode::Literal => {
                if self.space.ell() == 1 {
                    for (v, w) in vals.chunks_mut(nq).zip(self.cell_weights.chunks(nq)) {
                        let area: f64 = w.iter().sum();
                        let mut mean = [0.0; 2];
                        for (x, wq) in v.iter().zip(w) {
                            mean[0] += wq * x[0] / area;
                            mean[1] += wq * x[1] / area;
                        }
                        for x in v.iter_mut() {
                            *x = geometry::sub(*x, mean);
                        }
                    }
                }
            }
            RecoveryMode::CgRecovery => {
                let Some(solver) = &self.cg.solver else {
                    return vals;
                };
                let mesh = self.space.mesh();
                let mut rhs = vec![0.0; solver.matrix().n_rows()];
                for c in 0..mesh.num_cells() {
                    let h = mesh.h_per_cell()[c];
                    let mut moment = [0.0; 2];
                    for q in 0..nq {
                        let w = self.cell_weights[c * nq + q];
                        moment[0] += w * vals[c * nq + q][0];
                        moment[1] += w * vals[c * nq + q][1];
                    }
                    for (i, &v) in mesh.cells()[c].iter().enumerate() {
                        if let Some(g) = self.cg.index[v] {
                            rhs[g] += h * h * geometry::dot(moment, self.cg.grads[c][i]);
                        }
                    }
                }
                // The stiffness matrix is SPD, so the factorization is exact up
                // to rounding and the refinement tolerance is always met.
                let w = solver.solve(&rhs).map(|r| r.0).unwrap_or_else(|_| solver.factor().solve(&rhs));
                for c in 0..mesh.num_cells() {
                    let mut grad = [0.0; 2];
                    for (i, &v) in mesh.cells()[c].iter().enumerate() {
                        if let Some(g) = self.cg.index[v] {
                            grad[0] += w[g] * self.cg.grads[c][i][0];
                            grad[1] += w[g] * self.cg.grads[c][i][1];
                        }
                    }
                    for x in &mut vals[c * nq..(c + 1) * nq] {
                        *x = geometry::sub(*x, grad);
                    }
                }
            }
        }
        vals
    }

    fn cell_recovery_norms(&self, rec: &[[f64; 2]]) -> Vec<f64> {
        let nq = self.space.cell_rule().len();
        let h = self.space.mesh().h_per_cell();
        rec.chunks(nq)
            .zip(self.cell_weights.chunks(nq))
            .enumerate()
            .map(|(c, (v, w))| h[c] * v.iter().zip(w).map(|(x, wq)| wq * geometry::dot(*x, *x)).sum::<f64>().sqrt())
            .collect()
    }

    /// `‖h(ασ - ∇w)‖` under an explicit mode.
    pub fn recovery_total(&self, sigma: &StressField, mode: RecoveryMode) -> f64 {
        rss(&self.cell_recovery_norms(&self.recovery_values(sigma, mode)))
    }

    /// Assemble a spatial estimate from residual values at the data points,
    /// recovery values at the cell points and, when given, the stress field
    /// whose jumps and curls enter the stress estimator.
    pub fn estimate(&self, r2: &[f64], rec: &[[f64; 2]], jumps_of: Option<&StressField>) -> SpatialEstimate {
        let mesh = self.space.mesh();
        let h = mesh.h_per_cell();
        let norms = self.cell_data_norms(r2);
        let ell = self.space.ell() as i32;
        let mut out = SpatialEstimate::zeros(mesh.num_cells());
        for c in 0..mesh.num_cells() {
            out.residual_u[c] = h[c].powi(ell + 1) * norms[c];
            out.residual_sigma[c] = h[c] * norms[c];
        }
        out.recovery = self.cell_recovery_norms(rec);
        if let Some(sigma) = jumps_of {
            let edges = assembly::edge_tangential_jump(&self.space, sigma, self.coef);
            let mut sq = vec![0.0; mesh.num_cells()];
            for (e, j2) in edges.iter().enumerate() {
                if let [Some(a), Some(b)] = mesh.edge_cells(e) {
                    let share = 0.5 * mesh.h_per_edge()[e] * j2;
                    sq[a] += share;
                    sq[b] += share;
                }
            }
            out.jump = sq.iter().map(|v| v.sqrt()).collect();
            let curl = assembly::curl_elementwise(&self.space, sigma, self.coef);
            out.curl = curl.iter().zip(h).map(|(v, hk)| hk * v.sqrt()).collect();
        }
        out
    }

    /// The estimators of a discrete pair with residual `r₂ = discrete - data`,
    /// where `discrete` is `P_h ∂²U + div Σ`.
    pub fn estimate_state(&self, sigma: &StressField, discrete: &DispField, data: impl FnMut(Point) -> f64) -> SpatialEstimate {
        let d = self.disp_values(discrete);
        let r2: Vec<f64> = d.iter().zip(self.data_values(data)).map(|(a, b)| a - b).collect();
        let rec = self.recovery_values(sigma, self.mode);
        self.estimate(&r2, &rec, Some(sigma))
    }
}

/// Projections `P_h^j` onto the displacement space at node `j`.
pub trait ProjectionSequence {
    fn project(&self, j: usize, v: &DispField) -> DispField;
}

/// The same space at every node: every projection is the identity on `W_h`.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixedMesh;

impl ProjectionSequence for FixedMesh {
    fn project(&self, _j: usize, v: &DispField) -> DispField {
        v.clone()
    }
}

/// The discrete part `P_h^n ∂²Uⁿ + div Σⁿ` of `r₂ⁿ`; at `n = 0`, `P_h f̄⁰`.
fn discrete_part(est: &SpatialEstimator, traj: &Trajectory, proj: &dyn ProjectionSequence, n: usize) -> DispField {
    if n == 0 {
        return traj.space.disp_mass_solve(&traj.f_bar[0]);
    }
    let acc = proj.project(n, &traj.dt2_u(n));
    acc.combine(1.0, &est.div_field(&traj.states[n].sigma), 1.0)
}

fn residual_values(est: &SpatialEstimator, traj: &Trajectory, problem: &dyn Problem, n: usize) -> Vec<f64> {
    let d = est.disp_values(&discrete_part(est, traj, &FixedMesh, n));
    let f = est.data_values(|x| forcing_value(problem, &traj.grid, traj.forcing_mode, n, x));
    d.iter().zip(&f).map(|(a, b)| a - b).collect()
}

fn difference<T: Copy>(a: &[T], b: &[T], k: f64, sub: impl Fn(T, T) -> T, scale: impl Fn(T, f64) -> T) -> Vec<T> {
    a.iter().zip(b).map(|(x, y)| scale(sub(*x, *y), 1.0 / k)).collect()
}

fn diff_scalar(a: &[f64], b: &[f64], k: f64) -> Vec<f64> {
    difference(a, b, k, |x, y| x - y, |x, s| x * s)
}

fn diff_vector(a: &[[f64; 2]], b: &[[f64; 2]], k: f64) -> Vec<[f64; 2]> {
    difference(a, b, k, geometry::sub, |x, s| [x[0] * s, x[1] * s])
}

/// The displacement estimator applied to `∂ʲ(r₂ⁿ, Σⁿ)`, `j ∈ {1, 2}`, realized
/// by backward differences of node data. Needs `n ≥ j`.
pub fn spatial_estimate_rate(
    est: &SpatialEstimator,
    traj: &Trajectory,
    problem: &dyn Problem,
    n: usize,
    order: usize,
) -> Result<SpatialEstimate> {
    if !(1..=2).contains(&order) {
        return Err(Error::UnsupportedIndex(order));
    }
    if n < order || n >= traj.num_nodes() {
        return Err(Error::InsufficientHistory { order, node: n });
    }
    let mode = est.mode();
    let r: Vec<Vec<f64>> = (n - order..=n).map(|m| residual_values(est, traj, problem, m)).collect();
    let rec: Vec<Vec<[f64; 2]>> =
        (n - order..=n).map(|m| est.recovery_values(&traj.states[m].sigma, mode)).collect();
    let k = traj.grid.k(n);
    let (dr, drec) = if order == 1 {
        (diff_scalar(&r[1], &r[0], k), diff_vector(&rec[1], &rec[0], k))
    } else {
        let k0 = traj.grid.k(n - 1);
        let (a, b) = (diff_scalar(&r[2], &r[1], k), diff_scalar(&r[1], &r[0], k0));
        let (c, d) = (diff_vector(&rec[2], &rec[1], k), diff_vector(&rec[1], &rec[0], k0));
        (diff_scalar(&a, &b, k), diff_vector(&c, &d, k))
    };
    Ok(est.estimate(&dr, &drec, None))
}

/// Cumulative temporal estimator terms at every node (index 0 holds zeros).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TemporalEstimate {
    /// `Σ ∫ ‖(1+μ)(I - P_h^j) ∂²U^j‖`
    pub e11: Vec<f64>,
    /// `Σ ∫ ‖μ ∂²U^j‖`
    pub e12: Vec<f64>,
    /// `Σ k²/2 ‖∂q^j‖ + k³/12 ‖∂²q^j‖` with `q = r₂ - div Σ`
    pub e13: Vec<f64>,
    /// `Σ ∫ ‖f̄^j - f‖`
    pub e14: Vec<f64>,
    /// Projection-change terms of the displacement bound.
    pub e21: Vec<f64>,
    /// `Σ k² ‖∂²U^j‖`
    pub e22: Vec<f64>,
    /// `Σ_j k_j Σ_{l<j} (k_l²/2 ‖∂q^l‖ + k_l³/12 ‖∂²q^l‖)`
    pub e23: Vec<f64>,
    /// `Σ k_j ∫ ‖f̄^j - f‖`
    pub e24: Vec<f64>,
    /// The sharper bound `M₁ + M₂` of the same term evaluated at the node.
    pub e23_full: Vec<f64>,
}

impl TemporalEstimate {
    fn with_nodes(n: usize) -> Self {
        let z = vec![0.0; n];
        TemporalEstimate {
            e11: z.clone(),
            e12: z.clone(),
            e13: z.clone(),
            e14: z.clone(),
            e21: z.clone(),
            e22: z.clone(),
            e23: z.clone(),
            e24: z.clone(),
            e23_full: z,
        }
    }

    pub fn stress_terms(&self, m: usize) -> [f64; 4] {
        [self.e11[m], self.e12[m], self.e13[m], self.e14[m]]
    }

    pub fn disp_terms(&self, m: usize) -> [f64; 4] {
        [self.e21[m], self.e22[m], self.e23[m], self.e24[m]]
    }

    pub fn series(&self) -> [(&'static str, &Vec<f64>); 9] {
        [
            ("e11", &self.e11),
            ("e12", &self.e12),
            ("e13", &self.e13),
            ("e14", &self.e14),
            ("e21", &self.e21),
            ("e22", &self.e22),
            ("e23", &self.e23),
            ("e24", &self.e24),
            ("e23_full", &self.e23_full),
        ]
    }
}

/// Options of [`estimate_trajectory`].
pub struct EstimatorOptions<'p> {
    pub recovery: RecoveryMode,
    /// Use `∂²U^j - f̄^j` in place of `r₂^j - div Σ^j`.
    pub unprojected_acceleration: bool,
    pub projections: &'p dyn ProjectionSequence,
    /// Nodes at which per-cell estimates are kept.
    pub cell_maps_at: Vec<usize>,
}

impl Default for EstimatorOptions<'static> {
    fn default() -> Self {
        EstimatorOptions {
            recovery: RecoveryMode::default(),
            unprojected_acceleration: false,
            projections: &FixedMesh,
            cell_maps_at: Vec::new(),
        }
    }
}

/// Totals of the spatial estimate of `(r₂ⁿ, Σⁿ)` at one node.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpatialTotals {
    pub residual_u: f64,
    pub residual_sigma: f64,
    pub recovery: f64,
    pub jump: f64,
    pub curl: f64,
    /// Recovery term under the other recovery mode.
    pub recovery_other: f64,
}

/// All estimator components along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSeries {
    pub grid: TimeGrid,
    pub recovery: RecoveryMode,
    /// `‖U⁰ - u₀‖`
    pub init_err_u: f64,
    /// `‖∂U⁰ - u₁‖`
    pub init_err_ut: f64,
    /// `‖Σ⁰ - σ(0)‖_{A⁻¹}`
    pub init_err_sigma: f64,
    /// `‖h(αΣ⁰ - ∇w)‖`
    pub e1_0: f64,
    /// `‖h(α∂Σ⁰ - ∇w)‖`
    pub e4_0: f64,
    /// `‖h^{1/2} J(αΣ⁰·t)‖ + ‖h curl_h(αΣ⁰)‖`
    pub e5_0: f64,
    /// Displacement estimator of `(r₂ⁿ, Σⁿ)`.
    pub e2: Vec<f64>,
    /// Displacement estimator of `(∂r₂ⁿ, ∂Σⁿ)`; also the seventh term.
    pub e3: Vec<f64>,
    /// Stress estimator of `(r₂ⁿ, Σⁿ)`.
    pub e6: Vec<f64>,
    /// Displacement estimator of `(∂²r₂ⁿ, ∂²Σⁿ)`.
    pub e8: Vec<f64>,
    /// `Σ_{n ≤ m} k_n e3ⁿ`
    pub sum_k_e3: Vec<f64>,
    /// `Σ_{n ≤ m} k_n e8ⁿ`
    pub sum_k_e8: Vec<f64>,
    pub totals: Vec<SpatialTotals>,
    pub temporal: TemporalEstimate,
    pub cell_maps: Vec<(usize, SpatialEstimate)>,
}

impl EstimatorSeries {
    pub fn num_nodes(&self) -> usize {
        self.grid.num_steps() + 1
    }

    pub fn e7(&self) -> &[f64] {
        &self.e3
    }

    fn is_complete(&self) -> bool {
        let n = self.num_nodes();
        let lens = [
            self.e2.len(),
            self.e3.len(),
            self.e6.len(),
            self.e8.len(),
            self.sum_k_e3.len(),
            self.sum_k_e8.len(),
            self.totals.len(),
        ];
        lens.iter().all(|l| *l == n) && self.temporal.series().iter().all(|(_, v)| v.len() == n)
    }
}

/// `∫_{I_n} |a + μⁿ|` for the linear weight, split at its root.
fn abs_linear_integral(grid: &TimeGrid, n: usize, a: f64) -> f64 {
    let (lo, hi) = (grid.t(n - 1), grid.t(n));
    // a + μ = 0 at t = t_{n-1/2} + a k / 6
    let root = 0.5 * (lo + hi) + a * grid.k(n) / 6.0;
    time_rule().integrate_split(lo, hi, &[root], |t| (a + mu(grid, n, t)).abs())
}

/// Streams over the nodes of a trajectory computing every estimator component.
///
/// At `n = 0` the conventions are `r₂⁰ = P_h f̄⁰ - f̄⁰`, `∂Σ⁰ = M_σ⁻¹ Bᵀ ∂U⁰`,
/// and the first differences of `r₂` and `r₂ - div Σ` are continued backwards
/// from `n = 1`.
pub fn estimate_trajectory(traj: &Trajectory, problem: &dyn Problem, options: &EstimatorOptions) -> Result<EstimatorSeries> {
    let space = traj.space.clone();
    let coef = problem.coefficient();
    let est = SpatialEstimator::new(space.clone(), coef, options.recovery)?;
    let SaddleSystem { m_sigma, m_u, b, .. } = assembly::assemble_system(&space, coef)?;
    let mass = SymmetricSolver::new(m_sigma, space.n_stress())?;
    let grid = &traj.grid;
    let proj = options.projections;
    let nodes = traj.num_nodes();
    let steps = nodes - 1;
    let mode = options.recovery;
    let norm = |v: &DispField| m_u.bilinear(&v.coeffs, &v.coeffs).max(0.0).sqrt();
    let steady = problem.forcing_is_time_independent();
    let mut fbar_cache: Option<Vec<f64>> = None;
    let mut fbar_values = |n: usize| -> Vec<f64> {
        if steady {
            if let Some(v) = &fbar_cache {
                return v.clone();
            }
        }
        let v = est.data_values(|x| forcing_value(problem, grid, traj.forcing_mode, n, x));
        if steady {
            fbar_cache = Some(v.clone());
        }
        v
    };

    let mut series = EstimatorSeries {
        grid: grid.clone(),
        recovery: mode,
        init_err_u: 0.0,
        init_err_ut: 0.0,
        init_err_sigma: 0.0,
        e1_0: 0.0,
        e4_0: 0.0,
        e5_0: 0.0,
        e2: vec![0.0; nodes],
        e3: vec![0.0; nodes],
        e6: vec![0.0; nodes],
        e8: vec![0.0; nodes],
        sum_k_e3: vec![0.0; nodes],
        sum_k_e8: vec![0.0; nodes],
        totals: vec![SpatialTotals::default(); nodes],
        temporal: TemporalEstimate::with_nodes(nodes),
        cell_maps: Vec::new(),
    };

    let s0 = &traj.states[0];
    series.init_err_u = disp_error(&space, &s0.u, |x| problem.u0(x));
    series.init_err_ut = disp_error(&space, &s0.dt_u, |x| problem.u1(x));
    series.init_err_sigma = stress_error(&space, coef, &s0.sigma, |x| problem.sigma0(x));

    let record = |series: &mut EstimatorSeries, n: usize, sp: &SpatialEstimate, sigma: &StressField| {
        series.e2[n] = sp.total_u();
        series.e6[n] = sp.total_sigma();
        series.totals[n] = SpatialTotals {
            residual_u: sp.residual_u_total(),
            residual_sigma: sp.residual_sigma_total(),
            recovery: sp.recovery_total(),
            jump: sp.jump_total(),
            curl: sp.curl_total(),
            recovery_other: est.recovery_total(sigma, mode.other()),
        };
        if options.cell_maps_at.contains(&n) {
            series.cell_maps.push((n, sp.clone()));
        }
    };

    // node 0
    let fb0 = fbar_values(0);
    let d0 = discrete_part(&est, traj, proj, 0);
    let mut r_prev: Vec<f64> = est.disp_values(&d0).iter().zip(&fb0).map(|(a, b)| a - b).collect();
    let q0_field = d0.combine(1.0, &est.div_field(&s0.sigma), -1.0);
    let mut q_prev: Vec<f64> = est.disp_values(&q0_field).iter().zip(&fb0).map(|(a, b)| a - b).collect();
    let mut rec_prev = est.recovery_values(&s0.sigma, mode);
    let sp0 = est.estimate(&r_prev, &rec_prev, Some(&s0.sigma));
    series.e1_0 = sp0.recovery_total();
    series.e5_0 = sp0.jump_total() + sp0.curl_total();
    record(&mut series, 0, &sp0, &s0.sigma);
    let (ds0, _) = mass.solve(&b.mul_transpose_vec(&s0.dt_u.coeffs))?;
    let mut drec_prev = est.recovery_values(&StressField::new(ds0), mode);
    series.e4_0 = est.estimate(&vec![0.0; r_prev.len()], &drec_prev, None).recovery_total();

    let mut dr_prev: Option<Vec<f64>> = None;
    let mut dq_prev: Option<Vec<f64>> = None;
    let init_proj_defect = {
        let v = &s0.dt_u;
        norm(&v.combine(1.0, &proj.project(0, v), -1.0))
    };
    // running sums for the temporal terms
    let mut change_sum = 0.0;
    let (mut a_sum, mut b_sum, mut a3_sum, mut b4_sum, mut p1, mut p2) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let time = time_rule();

    for n in 1..=steps {
        let k = grid.k(n);
        let state = &traj.states[n];
        let acc = traj.dt2_u(n);
        let pacc = proj.project(n, &acc);
        let fb = fbar_values(n);
        let div = est.div_field(&state.sigma);
        let d = pacc.combine(1.0, &div, 1.0);
        let r: Vec<f64> = est.disp_values(&d).iter().zip(&fb).map(|(a, b)| a - b).collect();
        let q_src = if options.unprojected_acceleration { &acc } else { &pacc };
        let q: Vec<f64> = est.disp_values(q_src).iter().zip(&fb).map(|(a, b)| a - b).collect();
        let rec = est.recovery_values(&state.sigma, mode);

        let dr = diff_scalar(&r, &r_prev, k);
        let dq = diff_scalar(&q, &q_prev, k);
        let drec = diff_vector(&rec, &rec_prev, k);
        let d2r = match &dr_prev {
            Some(prev) => diff_scalar(&dr, prev, k),
            None => vec![0.0; dr.len()],
        };
        let d2q = match &dq_prev {
            Some(prev) => diff_scalar(&dq, prev, k),
            None => vec![0.0; dq.len()],
        };
        let d2rec = diff_vector(&drec, &drec_prev, k);

        let sp = est.estimate(&r, &rec, Some(&state.sigma));
        record(&mut series, n, &sp, &state.sigma);
        series.e3[n] = est.estimate(&dr, &drec, None).total_u();
        series.e8[n] = est.estimate(&d2r, &d2rec, None).total_u();
        series.sum_k_e3[n] = series.sum_k_e3[n - 1] + k * series.e3[n];
        series.sum_k_e8[n] = series.sum_k_e8[n - 1] + k * series.e8[n];

        let tm = &mut series.temporal;
        let acc_norm = norm(&acc);
        let acc_defect = norm(&acc.combine(1.0, &pacc, -1.0));
        tm.e11[n] = tm.e11[n - 1] + abs_linear_integral(grid, n, 1.0) * acc_defect;
        tm.e12[n] = tm.e12[n - 1] + abs_linear_integral(grid, n, 0.0) * acc_norm;
        let a = est.data_norm(&dq);
        let b = est.data_norm(&d2q);
        tm.e13[n] = tm.e13[n - 1] + 0.5 * k * k * a + k * k * k / 12.0 * b;
        let forcing_defect = if steady {
            0.0
        } else {
            let (lo, hi) = (grid.t(n - 1), grid.t(n));
            time.integrate(lo, hi, |t| {
                let diff: Vec<f64> = est.data_points().iter().zip(&fb).map(|(x, f)| f - problem.f(*x, t)).collect();
                est.data_norm(&diff)
            })
        };
        tm.e14[n] = tm.e14[n - 1] + forcing_defect;
        tm.e22[n] = tm.e22[n - 1] + k * k * acc_norm;
        tm.e23[n] = tm.e23[n - 1] + k * tm.e13[n - 1];
        tm.e24[n] = tm.e24[n - 1] + k * forcing_defect;

        // M₁ + M₂ at t = t_n
        let m1 = p1 + k * a_sum + a3_sum + k.powi(4) / 3.0 * a;
        let m2 = p2 + k * b_sum + b4_sum + k.powi(5) / 20.0 * b;
        tm.e23_full[n] = m1 + m2;
        p1 += k * a_sum;
        p2 += k * b_sum;
        a_sum += 0.5 * k * k * a;
        b_sum += k.powi(3) / 12.0 * b;
        a3_sum += k.powi(3) / 3.0 * a;
        b4_sum += k.powi(4) / 20.0 * b;

        let prev_rate = &traj.states[n - 1].dt_u;
        let change = proj.project(n, prev_rate).combine(1.0, &proj.project(n - 1, prev_rate), -1.0);
        change_sum += norm(&change);
        let va = state.dt_u.combine(1.0, &proj.project(n, &state.dt_u), -1.0);
        let vb = acc.combine(1.0, &pacc, -1.0);
        let (aa, ab, bb) = (
            m_u.bilinear(&va.coeffs, &va.coeffs),
            m_u.bilinear(&va.coeffs, &vb.coeffs),
            m_u.bilinear(&vb.coeffs, &vb.coeffs),
        );
        let (lo, hi) = (grid.t(n - 1), grid.t(n));
        let rate_defect = time.integrate(lo, hi, |t| {
            let (tau, rem) = (t - lo, hi - t);
            let dg = (rem * rem - 2.0 * tau * rem) / k;
            (aa - 2.0 * dg * ab + dg * dg * bb).max(0.0).sqrt()
        });
        tm.e21[n] = tm.e21[n - 1] + k * change_sum + rate_defect + k * init_proj_defect;

        r_prev = r;
        q_prev = q;
        rec_prev = rec;
        dr_prev = Some(dr);
        dq_prev = Some(dq);
        drec_prev = drec;
    }
    Ok(series)
}

/// Constants of the composite bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    /// `C₁ … C₈`
    pub big: [f64; 8],
    /// `c₁ … c₄` of the displacement bound.
    pub small_u: [f64; 4],
    /// `c₁ … c₄` of the stress bound.
    pub small_sigma: [f64; 4],
}

impl Constants {
    pub fn unit() -> Self {
        Constants {
            big: [1.0; 8],
            small_u: [1.0; 4],
            small_sigma: [1.0; 4],
        }
    }

    /// Multiply the displacement constants by `su` and the stress constants by
    /// `ss`.
    pub fn scaled(&self, su: f64, ss: f64) -> Self {
        let mut out = *self;
        for c in &mut out.big[..3] {
            *c *= su;
        }
        for c in &mut out.big[3..] {
            *c *= ss;
        }
        for c in &mut out.small_u {
            *c *= su;
        }
        for c in &mut out.small_sigma {
            *c *= ss;
        }
        out
    }
}

/// How the constants of the composite bounds are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstantsPolicy {
    Unit,
    /// Scale the unit constants so a reference run has effectivity 2.
    Calibrated,
    Fixed(Constants),
}

impl ConstantsPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            ConstantsPolicy::Unit => "unit",
            ConstantsPolicy::Calibrated => "calibrated",
            ConstantsPolicy::Fixed(_) => "fixed",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "unit" => Some(ConstantsPolicy::Unit),
            "calibrated" => Some(ConstantsPolicy::Calibrated),
            _ => None,
        }
    }
}

/// Initial-error part and the estimator terms of both bounds at node `m`, in
/// the order the constants apply to them.
pub fn bound_terms(series: &EstimatorSeries, m: usize) -> (f64, [f64; 7], f64, [f64; 9]) {
    let tm = &series.temporal;
    let u = [
        series.e1_0,
        series.e2[m],
        series.sum_k_e3[m],
        tm.e21[m],
        tm.e22[m],
        tm.e23[m],
        tm.e24[m],
    ];
    let s = [
        series.e4_0,
        series.e5_0,
        series.e6[m],
        series.e3[m],
        series.sum_k_e8[m],
        tm.e11[m],
        tm.e12[m],
        tm.e13[m],
        tm.e14[m],
    ];
    (series.init_err_u, u, series.init_err_ut + series.init_err_sigma, s)
}

fn weights(c: &Constants) -> ([f64; 7], [f64; 9]) {
    let b = c.big;
    let (su, ss) = (c.small_u, c.small_sigma);
    (
        [b[0], b[1], b[2], su[0], su[1], su[2], su[3]],
        [b[3], b[4], b[5], b[6], b[7], ss[0], ss[1], ss[2], ss[3]],
    )
}

fn dot_n<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Composite bounds `(displacement, stress)` at node `m`.
pub fn composite_bounds(series: &EstimatorSeries, constants: &Constants, m: usize) -> (f64, f64) {
    let (bu, tu, bs, ts) = bound_terms(series, m);
    let (wu, ws) = weights(constants);
    (bu + dot_n(&wu, &tu), bs + dot_n(&ws, &ts))
}

/// Unit constants scaled so that `max bound = 2 max error` on the given run;
/// each scale is clamped at zero.
pub fn calibrate(series: &EstimatorSeries, errors: &TrueErrors) -> Constants {
    let unit = Constants::unit();
    let (wu, ws) = weights(&unit);
    let mut rest_u = 0.0f64;
    let mut rest_s = 0.0f64;
    let (mut base_u, mut base_s) = (0.0, 0.0);
    for m in 0..series.num_nodes() {
        let (bu, tu, bs, ts) = bound_terms(series, m);
        base_u = bu;
        base_s = bs;
        rest_u = rest_u.max(dot_n(&wu, &tu));
        rest_s = rest_s.max(dot_n(&ws, &ts));
    }
    let scale = |target: f64, base: f64, rest: f64| {
        if rest > 0.0 {
            ((target - base) / rest).max(0.0)
        } else {
            0.0
        }
    };
    unit.scaled(
        scale(2.0 * errors.max_u(), base_u, rest_u),
        scale(2.0 * errors.max_sigma(), base_s, rest_s),
    )
}

/// Composite bounds, true errors and effectivities of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorReport {
    pub series: EstimatorSeries,
    pub constants: Constants,
    pub bound_u: Vec<f64>,
    pub bound_sigma: Vec<f64>,
    pub errors: Option<TrueErrors>,
}

impl EstimatorReport {
    pub fn max_bound_u(&self) -> f64 {
        self.bound_u.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_bound_sigma(&self) -> f64 {
        self.bound_sigma.iter().copied().fold(0.0, f64::max)
    }

    /// `max_m bound_u / max_m ‖Uᵐ - u(t_m)‖`
    pub fn effectivity_u(&self) -> Option<f64> {
        let e = self.errors.as_ref()?.max_u();
        (e > 0.0).then(|| self.max_bound_u() / e)
    }

    /// `max_m bound_σ / max_m ‖Σᵐ - σ(t_m)‖_{A⁻¹}`
    pub fn effectivity_sigma(&self) -> Option<f64> {
        let e = self.errors.as_ref()?.max_sigma();
        (e > 0.0).then(|| self.max_bound_sigma() / e)
    }

    /// Smallest nodewise ratio of bound to error over nodes with nonzero error.
    pub fn min_node_ratio(&self) -> Option<(f64, f64)> {
        let errors = self.errors.as_ref()?;
        let ratio = |b: &[f64], e: &[f64]| {
            b.iter()
                .zip(e)
                .filter(|(_, e)| **e > 0.0)
                .map(|(b, e)| b / e)
                .fold(f64::INFINITY, f64::min)
        };
        Some((ratio(&self.bound_u, &errors.u), ratio(&self.bound_sigma, &errors.sigma)))
    }
}

/// Assemble the composite bounds from a complete series.
pub fn compose_report(series: EstimatorSeries, constants: Constants, errors: Option<TrueErrors>) -> Result<EstimatorReport> {
    if !series.is_complete() {
        return Err(Error::MissingSeries("estimator components do not cover every node".into()));
    }
    if let Some(e) = &errors {
        if e.u.len() != series.num_nodes() || e.sigma.len() != series.num_nodes() {
            return Err(Error::MissingSeries("true errors do not cover every node".into()));
        }
    }
    let (bound_u, bound_sigma) = (0..series.num_nodes()).map(|m| composite_bounds(&series, &constants, m)).unzip();
    Ok(EstimatorReport {
        series,
        constants,
        bound_u,
        bound_sigma,
        errors,
    })
}

/// Resolve a constants policy for one run; `Calibrated` fits on this run.
pub fn resolve_constants(policy: ConstantsPolicy, series: &EstimatorSeries, errors: Option<&TrueErrors>) -> Constants {
    match (policy, errors) {
        (ConstantsPolicy::Fixed(c), _) => c,
        (ConstantsPolicy::Calibrated, Some(e)) => calibrate(series, e),
        _ => Constants::unit(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use crate::problem::ForcingMode;
    use crate::solver::{self, State};
    use crate::spaces::RtIndex;
    use crate::verification::{ManufacturedKind, ManufacturedProblem};

    fn space(n: usize, rt: RtIndex) -> Arc<MixedSpace> {
        Arc::new(MixedSpace::new(Arc::new(Mesh::unit_square(n)), rt))
    }

    fn synthetic(space: &Arc<MixedSpace>, grid: &TimeGrid, states: Vec<State>) -> Trajectory {
        let nodes = states.len();
        Trajectory {
            space: space.clone(),
            grid: grid.clone(),
            states,
            forcing_mode: ForcingMode::Pointwise,
            f_bar: vec![vec![0.0; space.n_disp()]; nodes],
            solve_residuals: vec![0.0; nodes],
        }
    }

    #[test]
    fn zero_state_gives_zero_estimates() {
        let s = space(4, RtIndex::Zero);
        let coef = ManufacturedProblem::standing_wave();
        for mode in [RecoveryMode::Literal, RecoveryMode::CgRecovery] {
            let est = SpatialEstimator::new(s.clone(), coef.coefficient(), mode).unwrap();
            let zero = s.zero_stress();
            let r2 = vec![0.0; est.data_points().len()];
            let e = est.estimate(&r2, &est.recovery_values(&zero, mode), Some(&zero));
            assert_eq!((e.total_u(), e.total_sigma()), (0.0, 0.0));
        }
    }

    #[test]
    fn single_edge_jump_matches_hand_value() {
        let s = space(1, RtIndex::Zero);
        let mesh = s.mesh();
        let e = (0..mesh.num_edges()).find(|&e| !mesh.is_boundary_edge(e)).unwrap();
        let [Some(a), Some(_)] = mesh.edge_cells(e) else { unreachable!() };
        let t = mesh.edge_tangent(e);
        let p0 = mesh.vertices()[mesh.edges()[e][0]];
        let side = |x: Point| geometry::cross(t, geometry::sub(x, p0)).signum();
        let side_a = side(mesh.centroid(a));
        let base = [0.3, -0.7];
        let c = 1.25;
        let sigma = s.fortin_interpolate(|x| {
            if side(x) == side_a {
                base
            } else {
                [base[0] + c * t[0], base[1] + c * t[1]]
            }
        });
        let problem = ManufacturedProblem::standing_wave();
        let est = SpatialEstimator::new(s.clone(), problem.coefficient(), RecoveryMode::Literal).unwrap();
        let r2 = vec![0.0; est.data_points().len()];
        let out = est.estimate(&r2, &est.recovery_values(&sigma, RecoveryMode::Literal), Some(&sigma));
        let len = mesh.h_per_edge()[e];
        // √h_E · |Δ(ασ·t)| · √|E|
        let hand = len.sqrt() * c * len.sqrt();
        assert!((out.jump_total() - hand).abs() < 1e-12, "{} vs {hand}", out.jump_total());
        assert!((out.jump[0] - out.jump[1]).abs() < 1e-14);
        assert!(out.curl_total() < 1e-14);
    }

    #[test]
    fn stress_estimator_halves_under_refinement() {
        let p = ManufacturedProblem::standing_wave();
        let total = |n: usize| {
            let s = space(n, RtIndex::Zero);
            let traj = solver::run(&p, s.clone(), &TimeGrid::uniform(0.1, 1).unwrap(), ForcingMode::Pointwise).unwrap();
            let est = SpatialEstimator::new(s.clone(), p.coefficient(), RecoveryMode::CgRecovery).unwrap();
            let d = discrete_part(&est, &traj, &FixedMesh, 1);
            est.estimate_state(&traj.states[1].sigma, &d, |x| p.f(x, 0.1)).total_sigma()
        };
        let (a, b, c) = (total(8), total(16), total(32));
        for ratio in [a / b, b / c] {
            assert!((1.6..=2.4).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn totals_are_root_sum_squares() {
        let p = ManufacturedProblem::new(ManufacturedKind::DiagonalVariable).unwrap();
        let s = space(4, RtIndex::One);
        let traj = solver::run(&p, s.clone(), &TimeGrid::uniform(0.2, 2).unwrap(), ForcingMode::Pointwise).unwrap();
        let est = SpatialEstimator::new(s.clone(), p.coefficient(), RecoveryMode::CgRecovery).unwrap();
        let d = discrete_part(&est, &traj, &FixedMesh, 2);
        let e = est.estimate_state(&traj.states[2].sigma, &d, |x| p.f(x, 0.2));
        assert!(e.is_nonnegative());
        let manual: f64 = e.jump.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((manual - e.jump_total()).abs() <= 1e-12 * manual);
        assert!(e.curl_total() > 0.0 && e.recovery_total() > 0.0);
    }

    #[test]
    fn stationary_and_linear_trajectories() {
        let s = space(4, RtIndex::Zero);
        let zero = ManufacturedProblem::new(ManufacturedKind::Zero).unwrap();
        let grid = TimeGrid::uniform(1.0, 5).unwrap();
        let u = s.l2_project_scalar(|x| x[0] * x[1]);
        let flat = s.fortin_interpolate(|_| [0.4, -1.1]);
        let states = (0..6)
            .map(|_| State {
                u: u.clone(),
                sigma: flat.clone(),
                dt_u: s.zero_disp(),
            })
            .collect();
        let traj = synthetic(&s, &grid, states);
        let est = SpatialEstimator::new(s.clone(), zero.coefficient(), RecoveryMode::CgRecovery).unwrap();
        for n in 1..=5 {
            assert!(spatial_estimate_rate(&est, &traj, &zero, n, 1).unwrap().total_u() <= 1e-12);
            if n >= 2 {
                assert!(spatial_estimate_rate(&est, &traj, &zero, n, 2).unwrap().total_u() <= 1e-12);
            }
        }
        assert!(matches!(spatial_estimate_rate(&est, &traj, &zero, 1, 2), Err(Error::InsufficientHistory { .. })));

        let slope = s.fortin_interpolate(|x| [x[1] * x[1], (3.0 * x[0]).sin()]);
        let states = (0..6)
            .map(|n| State {
                u: u.clone(),
                sigma: flat.combine(1.0, &slope, grid.t(n)),
                dt_u: s.zero_disp(),
            })
            .collect();
        let traj = synthetic(&s, &grid, states);
        let first: Vec<f64> = (2..=5).map(|n| spatial_estimate_rate(&est, &traj, &zero, n, 1).unwrap().total_u()).collect();
        assert!(first[0] > 0.0);
        for v in &first {
            assert!((v - first[0]).abs() <= 1e-10 * first[0]);
        }
        for n in 3..=5 {
            assert!(spatial_estimate_rate(&est, &traj, &zero, n, 2).unwrap().total_u() <= 1e-10 * first[0]);
        }
    }

    #[test]
    fn mu_weight_integral_on_one_interval() {
        let s = space(2, RtIndex::Zero);
        let zero = ManufacturedProblem::new(ManufacturedKind::Zero).unwrap();
        let k = 0.1;
        let grid = TimeGrid::uniform(k, 1).unwrap();
        let w = s.l2_project_scalar(|_| 1.0);
        let u1 = w.scaled(k * k);
        let states = vec![
            State {
                u: s.zero_disp(),
                sigma: s.zero_stress(),
                dt_u: s.zero_disp(),
            },
            State {
                dt_u: u1.scaled(1.0 / k),
                u: u1,
                sigma: s.zero_stress(),
            },
        ];
        let traj = synthetic(&s, &grid, states);
        let series = estimate_trajectory(&traj, &zero, &EstimatorOptions::default()).unwrap();
        assert!((series.temporal.e12[1] - 0.15).abs() < 1e-12, "{}", series.temporal.e12[1]);
        assert!((series.temporal.e22[1] - k * k).abs() < 1e-14);
    }

    struct Alternating;

    impl ProjectionSequence for Alternating {
        fn project(&self, j: usize, v: &DispField) -> DispField {
            let mut out = v.clone();
            if j % 2 == 1 {
                for (i, c) in out.coeffs.iter_mut().enumerate() {
                    if i % 3 != 0 {
                        *c = 0.0;
                    }
                }
            }
            out
        }
    }

    #[test]
    fn fixed_mesh_projection_terms_vanish_and_synthetic_ones_do_not() {
        let p = ManufacturedProblem::standing_wave();
        let s = space(4, RtIndex::One);
        let traj = solver::run(&p, s, &TimeGrid::uniform(0.3, 6).unwrap(), ForcingMode::Pointwise).unwrap();
        let fixed = estimate_trajectory(&traj, &p, &EstimatorOptions::default()).unwrap();
        assert!(fixed.temporal.e11.iter().all(|v| *v == 0.0));
        assert!(fixed.temporal.e21.iter().all(|v| *v == 0.0));
        assert!(fixed.temporal.e14.iter().chain(&fixed.temporal.e24).all(|v| *v == 0.0));
        let options = EstimatorOptions {
            projections: &Alternating,
            ..Default::default()
        };
        let moving = estimate_trajectory(&traj, &p, &options).unwrap();
        assert!(moving.temporal.e11[6] > 0.0 && moving.temporal.e21[6] > 0.0);
        for (_, v) in moving.temporal.series() {
            assert!(v.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn forcing_defect_depends_on_mode() {
        let p = ManufacturedProblem::new(ManufacturedKind::Forced).unwrap();
        let s = space(4, RtIndex::Zero);
        let grid = TimeGrid::uniform(0.5, 10).unwrap();
        let run = |mode| {
            let traj = solver::run(&p, s.clone(), &grid, mode).unwrap();
            estimate_trajectory(&traj, &p, &EstimatorOptions::default()).unwrap().temporal
        };
        let (pw, avg) = (run(ForcingMode::Pointwise), run(ForcingMode::IntervalAverage));
        assert!(pw.e14[10] > 0.0 && avg.e14[10] < pw.e14[10]);
        assert!(avg.e24[10] < pw.e24[10]);
    }

    #[test]
    fn compose_with_zero_components_and_unit_constants() {
        let p = ManufacturedProblem::standing_wave();
        let s = space(4, RtIndex::Zero);
        let traj = solver::run(&p, s, &TimeGrid::uniform(0.2, 4).unwrap(), ForcingMode::Pointwise).unwrap();
        let series = estimate_trajectory(&traj, &p, &EstimatorOptions::default()).unwrap();

        let mut zeroed = series.clone();
        zeroed.e1_0 = 0.0;
        zeroed.e4_0 = 0.0;
        zeroed.e5_0 = 0.0;
        for v in [&mut zeroed.e2, &mut zeroed.e3, &mut zeroed.e6, &mut zeroed.e8, &mut zeroed.sum_k_e3, &mut zeroed.sum_k_e8] {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
        zeroed.temporal = TemporalEstimate::with_nodes(5);
        let r = compose_report(zeroed, Constants::unit(), None).unwrap();
        assert!(r.bound_u.iter().all(|b| *b == series.init_err_u));
        assert!(r.bound_sigma.iter().all(|b| *b == series.init_err_ut + series.init_err_sigma));

        let r = compose_report(series.clone(), Constants::unit(), None).unwrap();
        let t = &series.temporal;
        for m in 0..5 {
            let u = series.init_err_u + series.e1_0 + series.e2[m] + series.sum_k_e3[m] + t.e21[m] + t.e22[m] + t.e23[m] + t.e24[m];
            let sg = series.init_err_ut
                + series.init_err_sigma
                + series.e4_0
                + series.e5_0
                + series.e6[m]
                + series.e3[m]
                + series.sum_k_e8[m]
                + t.e11[m]
                + t.e12[m]
                + t.e13[m]
                + t.e14[m];
            assert!((r.bound_u[m] - u).abs() <= 1e-14 * u && (r.bound_sigma[m] - sg).abs() <= 1e-14 * sg);
        }

        let mut short = series;
        short.e8.pop();
        assert!(matches!(compose_report(short, Constants::unit(), None), Err(Error::MissingSeries(_))));
    }

    #[test]
    fn calibration_targets_effectivity_two() {
        let p = ManufacturedProblem::standing_wave();
        let s = space(4, RtIndex::Zero);
        let traj = solver::run(&p, s, &TimeGrid::uniform(0.5, 8).unwrap(), ForcingMode::Pointwise).unwrap();
        let series = estimate_trajectory(&traj, &p, &EstimatorOptions::default()).unwrap();
        let errors = crate::verification::true_error(&traj, &p, &p);
        let c = calibrate(&series, &errors);
        let r = compose_report(series, c, Some(errors)).unwrap();
        assert!((r.effectivity_u().unwrap() - 2.0).abs() < 1e-12);
        assert!((r.effectivity_sigma().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn recovery_modes_differ_at_lowest_order() {
        let p = ManufacturedProblem::standing_wave();
        let s = space(8, RtIndex::Zero);
        let traj = solver::run(&p, s, &TimeGrid::uniform(0.1, 1).unwrap(), ForcingMode::Pointwise).unwrap();
        let series = estimate_trajectory(&traj, &p, &EstimatorOptions::default()).unwrap();
        let t = series.totals[0];
        assert!(t.recovery_other > 2.0 * t.recovery);
    }
}
