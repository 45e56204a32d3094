use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::assembly::checked_alpha;
use crate::geometry;
use crate::linalg::{dense_lu_solve, DenseMatrix};
use crate::mesh::Mesh;
use crate::problem::{Coefficient, ForcingMode, Problem};
use crate::reconstruction::EllipticReconstructor;
use crate::solver::{self, forcing_value, TimeGrid};
use crate::spaces::{disp_basis, DispField, MixedSpace, RtIndex};
use crate::{Error, Result};

/// Dense copies of the mixed operators, assembled entry by entry.
pub struct DenseSystem {
    pub m_sigma: DenseMatrix,
    /// `(div φ_j, w_i)`, displacement rows.
    pub b: DenseMatrix,
    pub m_u: DenseMatrix,
}

pub fn assemble_dense(space: &MixedSpace, coef: &dyn Coefficient) -> Result<DenseSystem> {
    let (ns, nd) = (space.n_stress(), space.n_disp());
    let mut m_sigma = DenseMatrix::zeros(ns, ns);
    let mut b = DenseMatrix::zeros(nd, ns);
    let mut m_u = DenseMatrix::zeros(nd, nd);
    let rule = space.cell_rule();
    let mut val = [[0.0; 2]; 8];
    let mut div = [0.0; 8];
    let mut phi = [0.0; 3];
    for c in 0..space.num_cells() {
        let det = space.jacobian_det(c);
        let sd = space.stress_dofs(c);
        let dd: Vec<usize> = space.disp_dofs(c).collect();
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let alpha = checked_alpha(coef, space.to_physical(c, *p))?;
            space.stress_basis(c, *p, &mut val, &mut div);
            disp_basis(space.rt_index(), *p, &mut phi);
            for (i, &gi) in sd.iter().enumerate() {
                for (j, &gj) in sd.iter().enumerate() {
                    m_sigma.add(gi, gj, w * det * geometry::dot(geometry::mat_vec(&alpha, val[j]), val[i]));
                }
            }
            for (a, &ga) in dd.iter().enumerate() {
                for (j, &gj) in sd.iter().enumerate() {
                    b.add(ga, gj, w * det * phi[a] * div[j]);
                }
                for (e, &ge) in dd.iter().enumerate() {
                    m_u.add(ga, ge, w * det * phi[a] * phi[e]);
                }
            }
        }
    }
    Ok(DenseSystem { m_sigma, b, m_u })
}

fn dense_moments(space: &MixedSpace, f: impl Fn(geometry::Point) -> f64) -> Vec<f64> {
    let rule = space.data_rule();
    let mut out = vec![0.0; space.n_disp()];
    let mut phi = [0.0; 3];
    for c in 0..space.num_cells() {
        let det = space.jacobian_det(c);
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let v = f(space.to_physical(c, *p));
            disp_basis(space.rt_index(), *p, &mut phi);
            for (a, g) in space.disp_dofs(c).enumerate() {
                out[g] += w * det * v * phi[a];
            }
        }
    }
    out
}

fn transpose_mul(m: &DenseMatrix, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.cols];
    for i in 0..m.rows {
        for (j, o) in out.iter_mut().enumerate() {
            *o += m.get(i, j) * x[i];
        }
    }
    out
}

/// `[[A, Bᵀ·s], [C, D]]` as one dense matrix.
fn block(a: &DenseMatrix, b: &DenseMatrix, b_scale: f64, c: &DenseMatrix, c_scale: f64, d: Option<(&DenseMatrix, f64)>) -> DenseMatrix {
    let (ns, nd) = (a.rows, c.rows);
    let mut m = DenseMatrix::zeros(ns + nd, ns + nd);
    for i in 0..ns {
        for j in 0..ns {
            m.set(i, j, a.get(i, j));
        }
        for j in 0..nd {
            m.set(i, ns + j, b_scale * b.get(j, i));
        }
    }
    for i in 0..nd {
        for j in 0..ns {
            m.set(ns + i, j, c_scale * c.get(i, j));
        }
        if let Some((dm, s)) = d {
            for j in 0..nd {
                m.set(ns + i, ns + j, s * dm.get(i, j));
            }
        }
    }
    m
}

/// Dense-path nodal coefficients `(U, Σ, ∂U)` of every node.
pub fn dense_trajectory(
    problem: &dyn Problem,
    space: &MixedSpace,
    grid: &TimeGrid,
    mode: ForcingMode,
) -> Result<Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>> {
    let sys = assemble_dense(space, problem.coefficient())?;
    let ns = space.n_stress();
    let u = dense_lu_solve(&sys.m_u, &dense_moments(space, |x| problem.u0(x)))?;
    let du = dense_lu_solve(&sys.m_u, &dense_moments(space, |x| problem.u1(x)))?;
    let sigma = dense_lu_solve(&sys.m_sigma, &transpose_mul(&sys.b, &u))?;
    let mut out = vec![(u, sigma, du)];
    for n in 1..=grid.num_steps() {
        let k = grid.k(n);
        let (u_prev, _, du_prev) = out.last().expect("initial state");
        let pred: Vec<f64> = u_prev.iter().zip(du_prev).map(|(a, b)| a + k * b).collect();
        let mp = sys.m_u.mul_vec(&pred);
        let load = dense_moments(space, |x| forcing_value(problem, grid, mode, n, x));
        let matrix = block(&sys.m_sigma, &sys.b, -1.0, &sys.b, 1.0, Some((&sys.m_u, 1.0 / (k * k))));
        let mut rhs = vec![0.0; matrix.rows];
        for i in 0..space.n_disp() {
            rhs[ns + i] = load[i] + mp[i] / (k * k);
        }
        let x = dense_lu_solve(&matrix, &rhs)?;
        let sigma = x[..ns].to_vec();
        let u = x[ns..].to_vec();
        let du = u.iter().zip(u_prev).map(|(a, b)| (a - b) / k).collect();
        out.push((u, sigma, du));
    }
    Ok(out)
}

/// `max |a - b| / max |b|`, zero when both vanish.
pub fn relative_max_difference(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = b.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    if diff == 0.0 {
        0.0
    } else {
        diff / scale.max(f64::MIN_POSITIVE)
    }
}

/// Largest relative disagreements between the sparse and dense paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport {
    pub solve: f64,
    pub reconstruction: f64,
}

/// Solve a tiny instance along both paths and reconstruct at the last node
/// with one level of enrichment.
pub fn oracle_small_instance(
    problem: &dyn Problem,
    mesh: Mesh,
    rt: RtIndex,
    grid: &TimeGrid,
    mode: ForcingMode,
) -> Result<OracleReport> {
    if mesh.num_cells() > 4 || grid.num_steps() > 3 {
        return Err(Error::InvalidStudy("oracle instances have at most 4 cells and 3 steps".into()));
    }
    let space = Arc::new(MixedSpace::new(Arc::new(mesh), rt));
    let traj = solver::run(problem, space.clone(), grid, mode)?;
    let dense = dense_trajectory(problem, &space, grid, mode)?;
    let mut solve = 0.0f64;
    for (s, (u, sigma, du)) in traj.states.iter().zip(&dense) {
        solve = solve
            .max(relative_max_difference(&s.u.coeffs, u))
            .max(relative_max_difference(&s.sigma.coeffs, sigma))
            .max(relative_max_difference(&s.dt_u.coeffs, du));
    }

    let n = grid.num_steps();
    let coef = problem.coefficient();
    let rec = EllipticReconstructor::new(space.clone(), coef, 1)?;
    let data = |x: geometry::Point| forcing_value(problem, grid, mode, n, x);
    let acc = traj.dt2_u(n);
    let sparse = rec.reconstruct(&acc, data)?;

    let fine = rec.fine_space();
    let sys = assemble_dense(fine, coef)?;
    let dense_acc: Vec<f64> = dense[n].2.iter().zip(&dense[n - 1].2).map(|(a, b)| (a - b) / grid.k(n)).collect();
    let dense_acc = DispField::new(dense_acc);
    let parent = &rec.enrichment().parent;
    let rule = fine.data_rule();
    let mut g = vec![0.0; fine.n_disp()];
    let mut phi = [0.0; 3];
    let mut coarse_phi = [0.0; 3];
    for c in 0..fine.num_cells() {
        let det = fine.jacobian_det(c);
        let pc = parent[c];
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let x = fine.to_physical(c, *p);
            disp_basis(rt, space.to_reference(pc, x), &mut coarse_phi);
            let coarse: f64 = space.disp_dofs(pc).enumerate().map(|(a, gi)| dense_acc.coeffs[gi] * coarse_phi[a]).sum();
            let v = data(x) - coarse;
            disp_basis(rt, *p, &mut phi);
            for (a, gi) in fine.disp_dofs(c).enumerate() {
                g[gi] += w * det * v * phi[a];
            }
        }
    }
    let ns = fine.n_stress();
    let matrix = block(&sys.m_sigma, &sys.b, -1.0, &sys.b, 1.0, None);
    let mut rhs = vec![0.0; matrix.rows];
    rhs[ns..].copy_from_slice(&g);
    let x = dense_lu_solve(&matrix, &rhs)?;
    let reconstruction = relative_max_difference(&sparse.sigma.coeffs, &x[..ns]).max(relative_max_difference(&sparse.u.coeffs, &x[ns..]));
    Ok(OracleReport { solve, reconstruction })
}

/// Four triangles around the centre of the unit square.
pub fn four_cell_mesh() -> Mesh {
    Mesh::new(
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]],
        vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]],
    )
    .expect("valid mesh")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verification::{ManufacturedKind, ManufacturedProblem};

    #[test]
    fn two_cell_one_step_agrees() {
        let p = ManufacturedProblem::standing_wave();
        for rt in [RtIndex::Zero, RtIndex::One] {
            let grid = TimeGrid::uniform(0.1, 1).unwrap();
            let r = oracle_small_instance(&p, Mesh::unit_square(1), rt, &grid, ForcingMode::Pointwise).unwrap();
            assert!(r.solve <= 1e-11 && r.reconstruction <= 1e-11, "{rt:?}: {r:?}");
        }
    }

    #[test]
    fn zero_data_gives_zero_on_both_paths() {
        let p = ManufacturedProblem::new(ManufacturedKind::Zero).unwrap();
        let space = MixedSpace::new(Arc::new(four_cell_mesh()), RtIndex::One);
        let grid = TimeGrid::uniform(0.3, 3).unwrap();
        let dense = dense_trajectory(&p, &space, &grid, ForcingMode::Pointwise).unwrap();
        assert!(dense.iter().all(|(u, s, d)| u.iter().chain(s).chain(d).all(|v| *v == 0.0)));
        let r = oracle_small_instance(&p, four_cell_mesh(), RtIndex::One, &grid, ForcingMode::Pointwise).unwrap();
        assert_eq!((r.solve, r.reconstruction), (0.0, 0.0));
    }

    #[test]
    fn large_instances_are_refused() {
        let p = ManufacturedProblem::standing_wave();
        let grid = TimeGrid::uniform(0.1, 1).unwrap();
        assert!(oracle_small_instance(&p, Mesh::unit_square(2), RtIndex::Zero, &grid, ForcingMode::Pointwise).is_err());
    }
}
