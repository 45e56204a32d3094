//! Raviart-Thomas stress spaces `RT_ℓ` and discontinuous `P_ℓ` displacement
//! spaces, `ℓ ∈ {0, 1}`.
//!
//! Stress degrees of freedom on an edge `E` with global normal `n_E` are the
//! moments `∫_E v·n_E q ds` against `q_0 = 1` and `q_1 = √3 (2s - 1)`, where `s`
//! runs from the lower to the higher vertex of the edge. For `ℓ = 1` each cell
//! carries two more moments `∫_K v·e_c dx`. Basis functions are contravariant
//! Piola images of a prime basis on the reference triangle, combined per cell
//! so the degrees of freedom are nodal.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::{self, Mat2, Point};
use crate::mesh::Mesh;
use crate::quadrature::{LineRule, TriangleRule};
use crate::{Error, Result};

/// Raviart-Thomas index `ℓ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RtIndex {
    Zero,
    One,
}

impl RtIndex {
    pub fn new(ell: usize) -> Result<Self> {
        match ell {
            0 => Ok(RtIndex::Zero),
            1 => Ok(RtIndex::One),
            other => Err(Error::UnsupportedIndex(other)),
        }
    }

    pub fn value(self) -> usize {
        match self {
            RtIndex::Zero => 0,
            RtIndex::One => 1,
        }
    }

    /// Local stress dofs per cell.
    pub fn local_stress_dofs(self) -> usize {
        match self {
            RtIndex::Zero => 3,
            RtIndex::One => 8,
        }
    }

    /// Local displacement dofs per cell.
    pub fn local_disp_dofs(self) -> usize {
        match self {
            RtIndex::Zero => 1,
            RtIndex::One => 3,
        }
    }
}

/// Polynomial degrees of the quadrature rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureConfig {
    /// Cell rule for bilinear forms and discrete-field norms.
    pub cell_order: usize,
    /// Edge rule for jumps.
    pub edge_order: usize,
    /// Rule for integrals involving closed-form data (loads, projections, errors).
    pub data_order: usize,
}

impl QuadratureConfig {
    pub fn default_for(rt: RtIndex) -> Self {
        let l = rt.value();
        QuadratureConfig {
            cell_order: 2 * l + 8,
            edge_order: 2 * l + 3,
            data_order: 2 * l + 10,
        }
    }
}

/// Nodal coefficients of a stress field.
#[derive(Debug, Clone, PartialEq)]
pub struct StressField {
    pub coeffs: Vec<f64>,
}

/// Nodal coefficients of a displacement field.
#[derive(Debug, Clone, PartialEq)]
pub struct DispField {
    pub coeffs: Vec<f64>,
}

macro_rules! field_ops {
    ($t:ident) => {
        impl $t {
            pub fn new(coeffs: Vec<f64>) -> Self {
                $t { coeffs }
            }

            pub fn len(&self) -> usize {
                self.coeffs.len()
            }

            pub fn is_empty(&self) -> bool {
                self.coeffs.is_empty()
            }

            /// `a·self + b·other`
            pub fn combine(&self, a: f64, other: &$t, b: f64) -> $t {
                assert_eq!(self.len(), other.len());
                $t {
                    coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| a * x + b * y).collect(),
                }
            }

            pub fn scaled(&self, a: f64) -> $t {
                $t {
                    coeffs: self.coeffs.iter().map(|x| a * x).collect(),
                }
            }
        }
    };
}
field_ops!(StressField);
field_ops!(DispField);

#[derive(Debug, Clone)]
struct CellData {
    v0: Point,
    jac: Mat2,
    jac_inv: Mat2,
    det: f64,
    /// Prime-to-nodal coefficients, `x[j * nl + m]` is the weight of prime
    /// function `j` in local basis function `m`.
    x: Vec<f64>,
    stress_dofs: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct MixedSpace {
    mesh: Arc<Mesh>,
    rt: RtIndex,
    quad: QuadratureConfig,
    cells: Vec<CellData>,
    n_stress: usize,
    n_disp: usize,
    cell_rule: TriangleRule,
    data_rule: TriangleRule,
    edge_rule: LineRule,
    data_edge_rule: LineRule,
    ref_disp_mass_inv: Vec<f64>,
}

/// Prime basis `ψ̂_j` on the reference triangle, its divergence and its
/// gradient `∂ψ̂_i/∂x̂_k` stored as `[i][k]`.
fn prime_basis(rt: RtIndex, p: Point, val: &mut [[f64; 2]], div: &mut [f64], grad: &mut [Mat2]) {
    let (x, y) = (p[0], p[1]);
    match rt {
        RtIndex::Zero => {
            val[..3].copy_from_slice(&[[1.0, 0.0], [0.0, 1.0], [x, y]]);
            div[..3].copy_from_slice(&[0.0, 0.0, 2.0]);
            grad[..3].copy_from_slice(&[[[0.0; 2]; 2], [[0.0; 2]; 2], geometry::IDENTITY]);
        }
        RtIndex::One => {
            val[..8].copy_from_slice(&[
                [1.0, 0.0],
                [0.0, 1.0],
                [x, 0.0],
                [0.0, x],
                [y, 0.0],
                [0.0, y],
                [x * x, x * y],
                [x * y, y * y],
            ]);
            div[..8].copy_from_slice(&[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 3.0 * x, 3.0 * y]);
            grad[..8].copy_from_slice(&[
                [[0.0; 2]; 2],
                [[0.0; 2]; 2],
                [[1.0, 0.0], [0.0, 0.0]],
                [[0.0, 0.0], [1.0, 0.0]],
                [[0.0, 1.0], [0.0, 0.0]],
                [[0.0, 0.0], [0.0, 1.0]],
                [[2.0 * x, 0.0], [y, x]],
                [[y, x], [0.0, 2.0 * y]],
            ]);
        }
    }
}

/// Orthonormal edge test polynomial `q` at the edge parameter `s`.
#[inline]
pub fn edge_polynomial(q: usize, s: f64) -> f64 {
    match q {
        0 => 1.0,
        _ => 3f64.sqrt() * (2.0 * s - 1.0),
    }
}

/// Displacement basis on the reference triangle.
#[inline]
pub fn disp_basis(rt: RtIndex, p: Point, out: &mut [f64]) {
    out[0] = 1.0;
    if rt == RtIndex::One {
        out[1] = p[0] - 1.0 / 3.0;
        out[2] = p[1] - 1.0 / 3.0;
    }
}

fn invert_small(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i * n + k].abs().total_cmp(&m[j * n + k].abs())).unwrap();
        for j in 0..n {
            m.swap(k * n + j, p * n + j);
            inv.swap(k * n + j, p * n + j);
        }
        let piv = m[k * n + k];
        for j in 0..n {
            m[k * n + j] /= piv;
            inv[k * n + j] /= piv;
        }
        for i in 0..n {
            if i != k {
                let f = m[i * n + k];
                if f != 0.0 {
                    for j in 0..n {
                        m[i * n + j] -= f * m[k * n + j];
                        inv[i * n + j] -= f * inv[k * n + j];
                    }
                }
            }
        }
    }
    inv
}

impl MixedSpace {
    pub fn new(mesh: Arc<Mesh>, rt: RtIndex) -> Self {
        Self::with_quadrature(mesh, rt, QuadratureConfig::default_for(rt)).expect("default quadrature is admissible")
    }

    pub fn with_quadrature(mesh: Arc<Mesh>, rt: RtIndex, quad: QuadratureConfig) -> Result<Self> {
        let l = rt.value();
        let required = 2 * l + 2;
        for order in [quad.cell_order, quad.data_order] {
            if order < required {
                return Err(Error::QuadratureOrderTooLow {
                    required,
                    configured: order,
                });
            }
        }
        if quad.edge_order < required {
            return Err(Error::QuadratureOrderTooLow {
                required,
                configured: quad.edge_order,
            });
        }
        let nl = rt.local_stress_dofs();
        let ne = mesh.num_edges();
        let nt = mesh.num_cells();
        let n_stress = (l + 1) * ne + if l == 1 { 2 * nt } else { 0 };
        let n_disp = rt.local_disp_dofs() * nt;
        let exact_line = LineRule::of_degree(2 * l + 2);
        let exact_tri = TriangleRule::of_degree(l + 1);

        let mut val = [[0.0; 2]; 8];
        let mut div = [0.0; 8];
        let mut grad = [[[0.0; 2]; 2]; 8];
        let mut cells = Vec::with_capacity(nt);
        for c in 0..nt {
            let [a, b, d] = mesh.cell_vertices(c);
            let e1 = geometry::sub(b, a);
            let e2 = geometry::sub(d, a);
            let jac = [[e1[0], e2[0]], [e1[1], e2[1]]];
            let det = geometry::det(&jac);
            let jac_inv = geometry::inverse(&jac);
            let mut dmat = vec![0.0; nl * nl];
            let mut stress_dofs = Vec::with_capacity(nl);
            let mut row = 0;
            for ce in mesh.cell_edges(c) {
                let e = ce.edge;
                let n = mesh.edge_normal(e);
                let len = mesh.h_per_edge()[e];
                for q in 0..=l {
                    for (&s, &w) in exact_line.points.iter().zip(&exact_line.weights) {
                        let x = mesh.edge_point(e, s);
                        let xh = geometry::mat_vec(&jac_inv, geometry::sub(x, a));
                        prime_basis(rt, xh, &mut val, &mut div, &mut grad);
                        let qv = edge_polynomial(q, s);
                        for j in 0..nl {
                            let phys = geometry::mat_vec(&jac, val[j]);
                            dmat[row * nl + j] += w * len * qv * geometry::dot(phys, n) / det;
                        }
                    }
                    stress_dofs.push((l + 1) * e + q);
                    row += 1;
                }
            }
            if l == 1 {
                for comp in 0..2 {
                    for (p, &w) in exact_tri.points.iter().zip(&exact_tri.weights) {
                        prime_basis(rt, *p, &mut val, &mut div, &mut grad);
                        for j in 0..nl {
                            // ∫_K (J ψ̂ / det)·e_c dx = ∫_K̂ (J ψ̂)_c dx̂
                            dmat[row * nl + j] += w * geometry::mat_vec(&jac, val[j])[comp];
                        }
                    }
                    stress_dofs.push(2 * ne + 2 * c + comp);
                    row += 1;
                }
            }
            let x = invert_small(&dmat, nl);
            cells.push(CellData {
                v0: a,
                jac,
                jac_inv,
                det,
                x,
                stress_dofs,
            });
        }

        let nd = rt.local_disp_dofs();
        let ref_rule = TriangleRule::of_degree(2 * l);
        let mut ref_mass = vec![0.0; nd * nd];
        let mut phi = [0.0; 3];
        for (p, &w) in ref_rule.points.iter().zip(&ref_rule.weights) {
            disp_basis(rt, *p, &mut phi);
            for i in 0..nd {
                for j in 0..nd {
                    ref_mass[i * nd + j] += w * phi[i] * phi[j];
                }
            }
        }
        let ref_disp_mass_inv = invert_small(&ref_mass, nd);

        Ok(MixedSpace {
            mesh,
            rt,
            quad,
            cells,
            n_stress,
            n_disp,
            cell_rule: TriangleRule::of_degree(quad.cell_order),
            data_rule: TriangleRule::of_degree(quad.data_order),
            edge_rule: LineRule::of_degree(quad.edge_order),
            data_edge_rule: LineRule::of_degree(quad.data_order),
            ref_disp_mass_inv,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn rt_index(&self) -> RtIndex {
        self.rt
    }

    pub fn ell(&self) -> usize {
        self.rt.value()
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        self.quad
    }

    pub fn n_stress(&self) -> usize {
        self.n_stress
    }

    pub fn n_disp(&self) -> usize {
        self.n_disp
    }

    pub fn n_local_stress(&self) -> usize {
        self.rt.local_stress_dofs()
    }

    pub fn n_local_disp(&self) -> usize {
        self.rt.local_disp_dofs()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_rule(&self) -> &TriangleRule {
        &self.cell_rule
    }

    pub fn data_rule(&self) -> &TriangleRule {
        &self.data_rule
    }

    pub fn edge_rule(&self) -> &LineRule {
        &self.edge_rule
    }

    pub fn data_edge_rule(&self) -> &LineRule {
        &self.data_edge_rule
    }

    pub fn check_cell(&self, cell: usize) -> Result<()> {
        if cell >= self.cells.len() {
            return Err(Error::IndexOutOfRange {
                what: "cell",
                index: cell,
                limit: self.cells.len(),
            });
        }
        Ok(())
    }

    /// Global stress dofs of a cell in local order.
    pub fn stress_dofs(&self, cell: usize) -> &[usize] {
        &self.cells[cell].stress_dofs
    }

    /// Global displacement dofs of a cell in local order.
    pub fn disp_dofs(&self, cell: usize) -> core::ops::Range<usize> {
        let nd = self.n_local_disp();
        cell * nd..(cell + 1) * nd
    }

    /// Jacobian determinant `2|K|` of the reference map.
    pub fn jacobian_det(&self, cell: usize) -> f64 {
        self.cells[cell].det
    }

    pub fn jacobian(&self, cell: usize) -> &Mat2 {
        &self.cells[cell].jac
    }

    pub fn to_physical(&self, cell: usize, xh: Point) -> Point {
        let c = &self.cells[cell];
        let d = geometry::mat_vec(&c.jac, xh);
        [c.v0[0] + d[0], c.v0[1] + d[1]]
    }

    pub fn to_reference(&self, cell: usize, x: Point) -> Point {
        let c = &self.cells[cell];
        geometry::mat_vec(&c.jac_inv, geometry::sub(x, c.v0))
    }

    /// Values and divergences of the local stress basis at a reference point.
    pub fn stress_basis(&self, cell: usize, xh: Point, val: &mut [[f64; 2]], div: &mut [f64]) {
        let nl = self.n_local_stress();
        let c = &self.cells[cell];
        let mut pv = [[0.0; 2]; 8];
        let mut pd = [0.0; 8];
        let mut pg = [[[0.0; 2]; 2]; 8];
        prime_basis(self.rt, xh, &mut pv, &mut pd, &mut pg);
        for m in 0..nl {
            let mut v = [0.0; 2];
            let mut d = 0.0;
            for j in 0..nl {
                let w = c.x[j * nl + m];
                v[0] += w * pv[j][0];
                v[1] += w * pv[j][1];
                d += w * pd[j];
            }
            let phys = geometry::mat_vec(&c.jac, v);
            val[m] = [phys[0] / c.det, phys[1] / c.det];
            div[m] = d / c.det;
        }
    }

    /// Physical gradients `∂φ_i/∂x_k` (as `[i][k]`) of the local stress basis.
    pub fn stress_basis_grad(&self, cell: usize, xh: Point, grad: &mut [Mat2]) {
        let nl = self.n_local_stress();
        let c = &self.cells[cell];
        let mut pv = [[0.0; 2]; 8];
        let mut pd = [0.0; 8];
        let mut pg = [[[0.0; 2]; 2]; 8];
        prime_basis(self.rt, xh, &mut pv, &mut pd, &mut pg);
        for m in 0..nl {
            let mut g = [[0.0; 2]; 2];
            for j in 0..nl {
                let w = c.x[j * nl + m];
                for a in 0..2 {
                    for b in 0..2 {
                        g[a][b] += w * pg[j][a][b];
                    }
                }
            }
            let jg = geometry::mat_mul(&geometry::mat_mul(&c.jac, &g), &c.jac_inv);
            grad[m] = [
                [jg[0][0] / c.det, jg[0][1] / c.det],
                [jg[1][0] / c.det, jg[1][1] / c.det],
            ];
        }
    }

    /// Stress field value and divergence in a cell at a reference point.
    pub fn stress_at(&self, field: &StressField, cell: usize, xh: Point) -> ([f64; 2], f64) {
        let mut val = [[0.0; 2]; 8];
        let mut div = [0.0; 8];
        self.stress_basis(cell, xh, &mut val, &mut div);
        let mut v = [0.0; 2];
        let mut d = 0.0;
        for (m, &g) in self.stress_dofs(cell).iter().enumerate() {
            let c = field.coeffs[g];
            v[0] += c * val[m][0];
            v[1] += c * val[m][1];
            d += c * div[m];
        }
        (v, d)
    }

    /// Physical gradient of a stress field in a cell at a reference point.
    pub fn stress_grad_at(&self, field: &StressField, cell: usize, xh: Point) -> Mat2 {
        let mut grad = [[[0.0; 2]; 2]; 8];
        self.stress_basis_grad(cell, xh, &mut grad);
        let mut g = [[0.0; 2]; 2];
        for (m, &dof) in self.stress_dofs(cell).iter().enumerate() {
            let c = field.coeffs[dof];
            for a in 0..2 {
                for b in 0..2 {
                    g[a][b] += c * grad[m][a][b];
                }
            }
        }
        g
    }

    pub fn disp_at(&self, field: &DispField, cell: usize, xh: Point) -> f64 {
        let mut phi = [0.0; 3];
        disp_basis(self.rt, xh, &mut phi);
        self.disp_dofs(cell).zip(&phi).map(|(g, p)| field.coeffs[g] * p).sum()
    }

    /// Checked evaluation of a stress field.
    pub fn evaluate_stress(&self, field: &StressField, cell: usize, xh: Point) -> Result<[f64; 2]> {
        self.check_cell(cell)?;
        Ok(self.stress_at(field, cell, xh).0)
    }

    /// Checked evaluation of the divergence of a stress field.
    pub fn evaluate_div(&self, field: &StressField, cell: usize, xh: Point) -> Result<f64> {
        self.check_cell(cell)?;
        Ok(self.stress_at(field, cell, xh).1)
    }

    /// Checked evaluation of a displacement field.
    pub fn evaluate_disp(&self, field: &DispField, cell: usize, xh: Point) -> Result<f64> {
        self.check_cell(cell)?;
        Ok(self.disp_at(field, cell, xh))
    }

    pub fn zero_stress(&self) -> StressField {
        StressField::new(vec![0.0; self.n_stress])
    }

    pub fn zero_disp(&self) -> DispField {
        DispField::new(vec![0.0; self.n_disp])
    }

    /// Apply the inverse displacement mass matrix to cellwise moments `(g, w_i)`.
    pub fn disp_mass_solve(&self, moments: &[f64]) -> DispField {
        let nd = self.n_local_disp();
        let mut out = vec![0.0; self.n_disp];
        for c in 0..self.num_cells() {
            let det = self.cells[c].det;
            let r = self.disp_dofs(c);
            let local = &moments[r.clone()];
            for i in 0..nd {
                out[r.start + i] = (0..nd).map(|j| self.ref_disp_mass_inv[i * nd + j] * local[j]).sum::<f64>() / det;
            }
        }
        DispField::new(out)
    }

    /// Moments `(φ, w_i)` of a closed-form function against the displacement
    /// basis using the data rule.
    pub fn disp_moments(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        let nd = self.n_local_disp();
        let mut out = vec![0.0; self.n_disp];
        let mut phi = [0.0; 3];
        for c in 0..self.num_cells() {
            let det = self.cells[c].det;
            let r = self.disp_dofs(c);
            for (p, &w) in self.data_rule.points.iter().zip(&self.data_rule.weights) {
                let fx = f(self.to_physical(c, *p));
                disp_basis(self.rt, *p, &mut phi);
                for i in 0..nd {
                    out[r.start + i] += w * det * fx * phi[i];
                }
            }
        }
        out
    }

    /// `L²` projection `P_h φ` onto the displacement space.
    pub fn l2_project_scalar(&self, f: impl Fn(Point) -> f64) -> DispField {
        self.disp_mass_solve(&self.disp_moments(f))
    }

    /// Canonical interpolant `Π_h v` defined by the stress degrees of freedom.
    pub fn fortin_interpolate(&self, v: impl Fn(Point) -> [f64; 2]) -> StressField {
        let l = self.ell();
        let mesh = &*self.mesh;
        let mut out = vec![0.0; self.n_stress];
        for e in 0..mesh.num_edges() {
            let n = mesh.edge_normal(e);
            let len = mesh.h_per_edge()[e];
            for q in 0..=l {
                out[(l + 1) * e + q] = self.data_edge_rule.points.iter().zip(&self.data_edge_rule.weights)
                    .map(|(&s, &w)| w * len * edge_polynomial(q, s) * geometry::dot(v(mesh.edge_point(e, s)), n))
                    .sum();
            }
        }
        if l == 1 {
            let ne = mesh.num_edges();
            for c in 0..self.num_cells() {
                let det = self.cells[c].det;
                let mut m = [0.0; 2];
                for (p, &w) in self.data_rule.points.iter().zip(&self.data_rule.weights) {
                    let val = v(self.to_physical(c, *p));
                    m[0] += w * det * val[0];
                    m[1] += w * det * val[1];
                }
                out[2 * ne + 2 * c] = m[0];
                out[2 * ne + 2 * c + 1] = m[1];
            }
        }
        StressField::new(out)
    }

    /// `L²` norm of a displacement field.
    pub fn disp_norm(&self, u: &DispField) -> f64 {
        let mut total = 0.0;
        for c in 0..self.num_cells() {
            let det = self.cells[c].det;
            for (p, &w) in self.cell_rule.points.iter().zip(&self.cell_rule.weights) {
                let v = self.disp_at(u, c, *p);
                total += w * det * v * v;
            }
        }
        total.sqrt()
    }

    /// `L²` norm of the divergence of a stress field.
    pub fn div_norm(&self, s: &StressField) -> f64 {
        let mut total = 0.0;
        for c in 0..self.num_cells() {
            let det = self.cells[c].det;
            for (p, &w) in self.cell_rule.points.iter().zip(&self.cell_rule.weights) {
                let d = self.stress_at(s, c, *p).1;
                total += w * det * d * d;
            }
        }
        total.sqrt()
    }

    /// Local stress basis index on cell `cell` of global edge dof `(edge, q)`.
    pub fn local_edge_dof(&self, cell: usize, edge: usize, q: usize) -> Option<usize> {
        let l = self.ell();
        self.mesh
            .cell_edges(cell)
            .iter()
            .position(|ce| ce.edge == edge)
            .map(|i| i * (l + 1) + q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_triangle() -> Arc<Mesh> {
        Arc::new(Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap())
    }

    #[test]
    fn dof_counts() {
        let mesh = Arc::new(Mesh::unit_square(3));
        let s0 = MixedSpace::new(mesh.clone(), RtIndex::Zero);
        assert_eq!((s0.n_stress(), s0.n_disp()), (mesh.num_edges(), mesh.num_cells()));
        let s1 = MixedSpace::new(mesh.clone(), RtIndex::One);
        assert_eq!(s1.n_stress(), 2 * mesh.num_edges() + 2 * mesh.num_cells());
        assert_eq!(s1.n_disp(), 3 * mesh.num_cells());
        assert!(matches!(RtIndex::new(2), Err(Error::UnsupportedIndex(2))));
    }

    #[test]
    fn rt0_basis_normal_flux_on_own_edge() {
        let mesh = Arc::new(Mesh::new(vec![[0.2, 0.1], [1.3, 0.4], [0.5, 1.7]], vec![[0, 1, 2]]).unwrap());
        let space = MixedSpace::new(mesh.clone(), RtIndex::Zero);
        let mut val = [[0.0; 2]; 8];
        let mut div = [0.0; 8];
        for (i, ce) in mesh.cell_edges(0).iter().enumerate() {
            let mid = mesh.edge_point(ce.edge, 0.5);
            space.stress_basis(0, space.to_reference(0, mid), &mut val, &mut div);
            let n = mesh.edge_normal(ce.edge);
            let len = mesh.h_per_edge()[ce.edge];
            for m in 0..3 {
                let expected = if m == i { 1.0 / len } else { 0.0 };
                assert!((geometry::dot(val[m], n) - expected).abs() < 1e-13);
            }
            // divergence is constant ±|E|/|E|/|K| = sign/|K|
            assert!((div[i] - ce.sign / mesh.area(0)).abs() < 1e-12);
        }
    }

    #[test]
    fn p0_basis_is_one() {
        let mesh = unit_triangle();
        let space = MixedSpace::new(mesh, RtIndex::Zero);
        let u = DispField::new(vec![1.0]);
        assert_eq!(space.evaluate_disp(&u, 0, [0.3, 0.2]).unwrap(), 1.0);
        assert!(matches!(space.evaluate_disp(&u, 4, [0.3, 0.2]), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn projection_of_x_is_centroid() {
        let mesh = Arc::new(Mesh::new(vec![[0.0, 0.0], [2.0, 0.5], [0.7, 1.9]], vec![[0, 1, 2]]).unwrap());
        let space = MixedSpace::new(mesh.clone(), RtIndex::Zero);
        let p = space.l2_project_scalar(|x| x[0]);
        assert!((p.coeffs[0] - mesh.centroid(0)[0]).abs() < 1e-14);
        let ones = space.l2_project_scalar(|_| 1.0);
        assert!((ones.coeffs[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn projection_reproduces_p1_when_ell_is_one() {
        let mesh = Arc::new(Mesh::unit_square(2));
        let space = MixedSpace::new(mesh, RtIndex::One);
        let f = |x: Point| 0.3 - 1.2 * x[0] + 2.5 * x[1];
        let p = space.l2_project_scalar(f);
        for c in 0..space.num_cells() {
            for xh in [[0.1, 0.2], [0.7, 0.1], [0.3, 0.3]] {
                let x = space.to_physical(c, xh);
                assert!((space.disp_at(&p, c, xh) - f(x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn interpolant_reproduces_constants_and_linear_divergence() {
        let mesh = Arc::new(Mesh::unit_square(3));
        for rt in [RtIndex::Zero, RtIndex::One] {
            let space = MixedSpace::new(mesh.clone(), rt);
            let s = space.fortin_interpolate(|_| [1.0, 0.0]);
            for c in 0..space.num_cells() {
                let (v, d) = space.stress_at(&s, c, [0.2, 0.5]);
                assert!((v[0] - 1.0).abs() < 1e-12 && v[1].abs() < 1e-12 && d.abs() < 1e-11);
            }
            let s = space.fortin_interpolate(|x| x);
            for c in 0..space.num_cells() {
                let (v, d) = space.stress_at(&s, c, [0.25, 0.25]);
                let x = space.to_physical(c, [0.25, 0.25]);
                assert!((d - 2.0).abs() < 1e-11);
                assert!((v[0] - x[0]).abs() < 1e-12 && (v[1] - x[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normal_component_is_continuous() {
        let mesh = Arc::new(Mesh::unit_square(2));
        for rt in [RtIndex::Zero, RtIndex::One] {
            let space = MixedSpace::new(mesh.clone(), rt);
            let coeffs: Vec<f64> = (0..space.n_stress()).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
            let s = StressField::new(coeffs);
            for e in 0..mesh.num_edges() {
                if let [Some(a), Some(b)] = mesh.edge_cells(e) {
                    let n = mesh.edge_normal(e);
                    for t in [0.1, 0.5, 0.8] {
                        let x = mesh.edge_point(e, t);
                        let va = space.stress_at(&s, a, space.to_reference(a, x)).0;
                        let vb = space.stress_at(&s, b, space.to_reference(b, x)).0;
                        assert!((geometry::dot(va, n) - geometry::dot(vb, n)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn low_quadrature_is_rejected() {
        let q = QuadratureConfig {
            cell_order: 2,
            edge_order: 5,
            data_order: 14,
        };
        assert!(matches!(
            MixedSpace::with_quadrature(unit_triangle(), RtIndex::One, q),
            Err(Error::QuadratureOrderTooLow { required: 4, configured: 2 })
        ));
    }
}
