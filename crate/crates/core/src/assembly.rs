//! Matrices and functionals of the mixed discretization.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{self, Mat2, Point};
use crate::linalg::{SparseOperator, TripletBuffer};
use crate::problem::Coefficient;
use crate::spaces::{disp_basis, MixedSpace, StressField};
use crate::{Error, Result};

/// Operators of the mixed problem on one space.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    /// `(α φ_j, φ_i)`
    pub m_sigma: SparseOperator,
    /// `(div φ_j, w_i)`, `n_disp × n_stress`
    pub b: SparseOperator,
    /// `(w_j, w_i)`
    pub m_u: SparseOperator,
    /// Smallest and largest eigenvalue of `α` seen at quadrature points.
    pub alpha_range: (f64, f64),
}

/// `α` at a point after checking that `A` is symmetric positive definite.
pub fn checked_alpha(coef: &dyn Coefficient, x: Point) -> Result<Mat2> {
    let a = coef.a(x);
    let (lo, _) = geometry::sym_eigenvalues(&a);
    if !(lo > 0.0) || (a[0][1] - a[1][0]).abs() > 1e-12 * (a[0][0].abs() + a[1][1].abs()) {
        return Err(Error::CoefficientNotSpd { x: x[0], y: x[1] });
    }
    Ok(geometry::inverse(&a))
}

/// Stress mass matrix `(W φ_j, φ_i)` for a pointwise matrix weight.
pub fn assemble_stress_mass(space: &MixedSpace, mut weight: impl FnMut(Point) -> Result<Mat2>) -> Result<SparseOperator> {
    let nl = space.n_local_stress();
    let rule = space.cell_rule();
    let mut t = TripletBuffer::with_capacity(space.num_cells() * nl * nl);
    let mut val = [[0.0; 2]; 8];
    let mut div = [0.0; 8];
    let mut local = vec![0.0; nl * nl];
    for c in 0..space.num_cells() {
        local.iter_mut().for_each(|v| *v = 0.0);
        let det = space.jacobian_det(c);
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let x = space.to_physical(c, *p);
            let wm = weight(x)?;
            space.stress_basis(c, *p, &mut val, &mut div);
            for j in 0..nl {
                let av = geometry::mat_vec(&wm, val[j]);
                for i in 0..nl {
                    local[i * nl + j] += w * det * geometry::dot(av, val[i]);
                }
            }
        }
        let dofs = space.stress_dofs(c);
        for i in 0..nl {
            for j in 0..nl {
                t.push(dofs[i], dofs[j], local[i * nl + j]);
            }
        }
    }
    Ok(SparseOperator::from_triplets(space.n_stress(), space.n_stress(), t, true))
}

/// Divergence coupling `(div φ_j, w_i)`.
pub fn assemble_divergence(space: &MixedSpace) -> SparseOperator {
    let nl = space.n_local_stress();
    let nd = space.n_local_disp();
    let rule = space.cell_rule();
    let rt = space.rt_index();
    let mut t = TripletBuffer::with_capacity(space.num_cells() * nl * nd);
    let mut val = [[0.0; 2]; 8];
    let mut div = [0.0; 8];
    let mut phi = [0.0; 3];
    for c in 0..space.num_cells() {
        let det = space.jacobian_det(c);
        let mut local = [[0.0; 8]; 3];
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            space.stress_basis(c, *p, &mut val, &mut div);
            disp_basis(rt, *p, &mut phi);
            for i in 0..nd {
                for j in 0..nl {
                    local[i][j] += w * det * phi[i] * div[j];
                }
            }
        }
        let dofs = space.stress_dofs(c);
        for (i, row) in space.disp_dofs(c).enumerate() {
            for j in 0..nl {
                t.push(row, dofs[j], local[i][j]);
            }
        }
    }
    SparseOperator::from_triplets(space.n_disp(), space.n_stress(), t, false)
}

/// Block-diagonal displacement mass matrix.
pub fn assemble_disp_mass(space: &MixedSpace) -> SparseOperator {
    let nd = space.n_local_disp();
    let rule = space.cell_rule();
    let rt = space.rt_index();
    let mut t = TripletBuffer::with_capacity(space.num_cells() * nd * nd);
    let mut phi = [0.0; 3];
    for c in 0..space.num_cells() {
        let det = space.jacobian_det(c);
        let mut local = [[0.0; 3]; 3];
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            disp_basis(rt, *p, &mut phi);
            for i in 0..nd {
                for j in 0..nd {
                    local[i][j] += w * det * phi[i] * phi[j];
                }
            }
        }
        let r = space.disp_dofs(c);
        for i in 0..nd {
            for j in 0..nd {
                t.push(r.start + i, r.start + j, local[i][j]);
            }
        }
    }
    SparseOperator::from_triplets(space.n_disp(), space.n_disp(), t, true)
}

pub fn assemble_system(space: &MixedSpace, coef: &dyn Coefficient) -> Result<SaddleSystem> {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    let m_sigma = assemble_stress_mass(space, |x| {
        let alpha = checked_alpha(coef, x)?;
        let (a, b) = geometry::sym_eigenvalues(&alpha);
        lo = lo.min(a);
        hi = hi.max(b);
        Ok(alpha)
    })?;
    Ok(SaddleSystem {
        m_sigma,
        b: assemble_divergence(space),
        m_u: assemble_disp_mass(space),
        alpha_range: (lo, hi),
    })
}

/// Load vector `(f, w_i)`.
pub fn assemble_load(space: &MixedSpace, f: impl Fn(Point) -> f64) -> Vec<f64> {
    space.disp_moments(f)
}

/// `α σ_h` at a reference point of a cell.
pub fn alpha_stress_at(space: &MixedSpace, coef: &dyn Coefficient, s: &StressField, cell: usize, xh: Point) -> [f64; 2] {
    let x = space.to_physical(cell, xh);
    geometry::mat_vec(&coef.alpha(x), space.stress_at(s, cell, xh).0)
}

/// Per edge `∫_E |J(α σ_h · t)|² ds`; zero on boundary edges.
pub fn edge_tangential_jump(space: &MixedSpace, s: &StressField, coef: &dyn Coefficient) -> Vec<f64> {
    let mesh = space.mesh();
    let rule = space.edge_rule();
    let mut out = vec![0.0; mesh.num_edges()];
    for (e, slot) in out.iter_mut().enumerate() {
        let [Some(a), Some(b)] = mesh.edge_cells(e) else {
            continue;
        };
        let t = mesh.edge_tangent(e);
        let len = mesh.h_per_edge()[e];
        *slot = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(&q, &w)| {
                let x = mesh.edge_point(e, q);
                let va = alpha_stress_at(space, coef, s, a, space.to_reference(a, x));
                let vb = alpha_stress_at(space, coef, s, b, space.to_reference(b, x));
                let j = geometry::dot(va, t) - geometry::dot(vb, t);
                w * len * j * j
            })
            .sum();
    }
    out
}

/// `curl(α σ) = ∂₁(ασ)₂ - ∂₂(ασ)₁` at a reference point of a cell.
pub fn curl_alpha_stress_at(space: &MixedSpace, coef: &dyn Coefficient, s: &StressField, cell: usize, xh: Point) -> f64 {
    let x = space.to_physical(cell, xh);
    let sigma = space.stress_at(s, cell, xh).0;
    let g = space.stress_grad_at(s, cell, xh);
    let alpha = coef.alpha(x);
    // ∂_b (ασ)_a = Σ_k ∂_b α_ak σ_k + α_ak ∂_b σ_k
    let d = |a: usize, b: usize, dalpha: &Mat2| -> f64 {
        (0..2).map(|k| dalpha[a][k] * sigma[k] + alpha[a][k] * g[k][b]).sum()
    };
    let (dx, dy) = if coef.is_constant() {
        ([[0.0; 2]; 2], [[0.0; 2]; 2])
    } else {
        let h = 1e-6 * space.mesh().h_per_cell()[cell];
        let diff = |dir: Point| -> Mat2 {
            let p = coef.alpha([x[0] + h * dir[0], x[1] + h * dir[1]]);
            let m = coef.alpha([x[0] - h * dir[0], x[1] - h * dir[1]]);
            [
                [(p[0][0] - m[0][0]) / (2.0 * h), (p[0][1] - m[0][1]) / (2.0 * h)],
                [(p[1][0] - m[1][0]) / (2.0 * h), (p[1][1] - m[1][1]) / (2.0 * h)],
            ]
        };
        (diff([1.0, 0.0]), diff([0.0, 1.0]))
    };
    d(1, 0, &dx) - d(0, 1, &dy)
}

/// Per cell `∫_K |curl_h(α σ_h)|²`.
pub fn curl_elementwise(space: &MixedSpace, s: &StressField, coef: &dyn Coefficient) -> Vec<f64> {
    let mut out = vec![0.0; space.num_cells()];
    if coef.is_constant() && space.ell() == 0 {
        return out;
    }
    let rule = space.cell_rule();
    for (c, slot) in out.iter_mut().enumerate() {
        let det = space.jacobian_det(c);
        *slot = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(p, &w)| {
                let v = curl_alpha_stress_at(space, coef, s, c, *p);
                w * det * v * v
            })
            .sum();
    }
    out
}

/// `‖σ‖²_{A⁻¹} = (α σ, σ)` by quadrature.
pub fn energy_norm_sq(space: &MixedSpace, coef: &dyn Coefficient, s: &StressField) -> f64 {
    let rule = space.cell_rule();
    let mut total = 0.0;
    for c in 0..space.num_cells() {
        let det = space.jacobian_det(c);
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let v = space.stress_at(s, c, *p).0;
            let av = alpha_stress_at(space, coef, s, c, *p);
            total += w * det * geometry::dot(av, v);
        }
    }
    total
}
