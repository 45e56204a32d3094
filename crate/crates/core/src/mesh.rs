//! Conforming triangulations of polygonal domains.
//!
//! Cells are stored counter-clockwise. Local edge `i` of a cell is the edge
//! opposite local vertex `i`. Every global edge `(a, b)` is oriented from the
//! lower to the higher vertex index; its unit tangent points from `a` to `b`
//! and its unit normal is the tangent rotated clockwise.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::{self, Point};
use crate::{Error, Result};

/// Reference to a global edge from inside a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellEdge {
    pub edge: usize,
    /// `+1` when the global normal points out of the cell, `-1` otherwise.
    pub sign: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    cell_edges: Vec<[CellEdge; 3]>,
    edge_cells: Vec<[Option<usize>; 2]>,
    boundary: Vec<bool>,
    h_cell: Vec<f64>,
    h_edge: Vec<f64>,
    areas: Vec<f64>,
}

/// Output of [`Mesh::refine_uniform`].
#[derive(Debug, Clone)]
pub struct RefinementResult {
    pub child_mesh: Mesh,
    pub parent_of_cell: Vec<usize>,
}

impl Mesh {
    /// Build connectivity for a triangulation. Clockwise cells are reordered.
    pub fn new(vertices: Vec<Point>, cell_list: Vec<[usize; 3]>) -> Result<Self> {
        for (i, v) in vertices.iter().enumerate() {
            if !v[0].is_finite() || !v[1].is_finite() {
                return Err(Error::NonFiniteVertex(i));
            }
        }
        let nv = vertices.len();
        let mut cells = cell_list;
        let scale = bounding_box_diameter(&vertices);
        let area_tol = 1e-14 * scale * scale;
        for (c, cell) in cells.iter_mut().enumerate() {
            for &v in cell.iter() {
                if v >= nv {
                    return Err(Error::IndexOutOfRange {
                        what: "vertex",
                        index: v,
                        limit: nv,
                    });
                }
            }
            let area = geometry::signed_area(vertices[cell[0]], vertices[cell[1]], vertices[cell[2]]);
            if area.abs() <= area_tol {
                return Err(Error::DegenerateCell { cell: c, area });
            }
            if area < 0.0 {
                cell.swap(1, 2);
            }
        }

        let mut edge_index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut edges = Vec::new();
        let mut edge_cells: Vec<[Option<usize>; 2]> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let mut local = [CellEdge { edge: 0, sign: 1.0 }; 3];
            for (i, slot) in local.iter_mut().enumerate() {
                // counter-clockwise traversal of the edge opposite vertex i
                let from = cell[(i + 1) % 3];
                let to = cell[(i + 2) % 3];
                let key = (from.min(to), from.max(to));
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_cells.push([None, None]);
                    edges.len() - 1
                });
                match edge_cells[e] {
                    [None, _] => edge_cells[e][0] = Some(c),
                    [Some(_), None] => edge_cells[e][1] = Some(c),
                    [Some(_), Some(_)] => {
                        return Err(Error::NonConforming(format!(
                            "edge ({}, {}) is shared by more than two cells",
                            key.0, key.1
                        )))
                    }
                }
                let sign = if from < to { 1.0 } else { -1.0 };
                *slot = CellEdge { edge: e, sign };
            }
            cell_edges.push(local);
        }
        let boundary: Vec<bool> = edge_cells.iter().map(|ec| ec[1].is_none()).collect();
        for (e, ec) in edge_cells.iter().enumerate() {
            if let [Some(a), Some(b)] = *ec {
                let sa = cell_edges[a].iter().find(|x| x.edge == e).unwrap().sign;
                let sb = cell_edges[b].iter().find(|x| x.edge == e).unwrap().sign;
                if sa == sb {
                    return Err(Error::NonConforming(format!(
                        "cells {a} and {b} overlap along edge {e}"
                    )));
                }
            }
        }

        let h_edge: Vec<f64> = edges
            .iter()
            .map(|&[a, b]| geometry::norm(geometry::sub(vertices[b], vertices[a])))
            .collect();
        let h_cell: Vec<f64> = cell_edges
            .iter()
            .map(|ce| ce.iter().map(|x| h_edge[x.edge]).fold(0.0, f64::max))
            .collect();
        let areas: Vec<f64> = cells
            .iter()
            .map(|c| geometry::signed_area(vertices[c[0]], vertices[c[1]], vertices[c[2]]))
            .collect();

        let mesh = Mesh {
            vertices,
            cells,
            edges,
            cell_edges,
            edge_cells,
            boundary,
            h_cell,
            h_edge,
            areas,
        };
        mesh.check_hanging_vertices()?;
        Ok(mesh)
    }

    /// A vertex lying in the interior of a one-sided edge is a hanging node.
    /// Only one-sided edges can carry one, so the scan is over those.
    fn check_hanging_vertices(&self) -> Result<()> {
        let one_sided: Vec<usize> = (0..self.edges.len()).filter(|&e| self.boundary[e]).collect();
        let mut used = vec![false; self.vertices.len()];
        for c in &self.cells {
            for &v in c {
                used[v] = true;
            }
        }
        for &e in &one_sided {
            let [a, b] = self.edges[e];
            let pa = self.vertices[a];
            let pb = self.vertices[b];
            let d = geometry::sub(pb, pa);
            let len2 = geometry::dot(d, d);
            for (v, &p) in self.vertices.iter().enumerate() {
                if v == a || v == b || !used[v] {
                    continue;
                }
                let w = geometry::sub(p, pa);
                let s = geometry::dot(w, d) / len2;
                if s <= 1e-12 || s >= 1.0 - 1e-12 {
                    continue;
                }
                let off = geometry::cross(d, w).abs() / len2.sqrt();
                if off <= 1e-12 * len2.sqrt() {
                    return Err(Error::NonConforming(format!(
                        "vertex {v} hangs on edge ({a}, {b})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Uniform `n × n` grid of the unit square, each square cut by one diagonal
    /// with alternating direction (criss-cross pattern); `2 n²` cells.
    pub fn unit_square(n: usize) -> Self {
        Self::rectangle([0.0, 0.0], [1.0, 1.0], n, n)
    }

    pub fn rectangle(lo: Point, hi: Point, nx: usize, ny: usize) -> Self {
        assert!(nx > 0 && ny > 0);
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([
                    lo[0] + (hi[0] - lo[0]) * i as f64 / nx as f64,
                    lo[1] + (hi[1] - lo[1]) * j as f64 / ny as f64,
                ]);
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut cells = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                if (i + j) % 2 == 0 {
                    cells.push([a, b, c]);
                    cells.push([a, c, d]);
                } else {
                    cells.push([a, b, d]);
                    cells.push([b, c, d]);
                }
            }
        }
        Self::new(vertices, cells).expect("structured grid is conforming")
    }

    /// Red refinement: every cell is split into four congruent children through
    /// its edge midpoints. The midpoint of edge `e` becomes vertex `V + e`.
    pub fn refine_uniform(&self) -> RefinementResult {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        for &[a, b] in &self.edges {
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        }
        let mut cells = Vec::with_capacity(4 * self.cells.len());
        let mut parent_of_cell = Vec::with_capacity(4 * self.cells.len());
        for (c, cell) in self.cells.iter().enumerate() {
            let m = |i: usize| nv + self.cell_edges[c][i].edge;
            let [v0, v1, v2] = *cell;
            cells.push([v0, m(2), m(1)]);
            cells.push([m(2), v1, m(0)]);
            cells.push([m(1), m(0), v2]);
            cells.push([m(0), m(1), m(2)]);
            parent_of_cell.extend_from_slice(&[c; 4]);
        }
        let child_mesh = Mesh::new(vertices, cells).expect("refinement of a conforming mesh is conforming");
        RefinementResult {
            child_mesh,
            parent_of_cell,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_interior_edges(&self) -> usize {
        self.boundary.iter().filter(|b| !**b).count()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn cell_edges(&self, cell: usize) -> &[CellEdge; 3] {
        &self.cell_edges[cell]
    }

    /// Cells on either side of an edge; the second is `None` on the boundary.
    pub fn edge_cells(&self, edge: usize) -> [Option<usize>; 2] {
        self.edge_cells[edge]
    }

    pub fn is_boundary_edge(&self, edge: usize) -> bool {
        self.boundary[edge]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    /// Diameter (longest side) of every cell.
    pub fn h_per_cell(&self) -> &[f64] {
        &self.h_cell
    }

    /// Length of every edge.
    pub fn h_per_edge(&self) -> &[f64] {
        &self.h_edge
    }

    /// Per-cell `h_K` and per-edge `h_E`.
    pub fn mesh_size_field(&self) -> (&[f64], &[f64]) {
        (&self.h_cell, &self.h_edge)
    }

    pub fn max_h(&self) -> f64 {
        self.h_cell.iter().copied().fold(0.0, f64::max)
    }

    pub fn area(&self, cell: usize) -> f64 {
        self.areas[cell]
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn cell_vertices(&self, cell: usize) -> [Point; 3] {
        let c = self.cells[cell];
        [self.vertices[c[0]], self.vertices[c[1]], self.vertices[c[2]]]
    }

    pub fn centroid(&self, cell: usize) -> Point {
        let [a, b, c] = self.cell_vertices(cell);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Unit tangent of an edge along its global orientation.
    pub fn edge_tangent(&self, edge: usize) -> [f64; 2] {
        let [a, b] = self.edges[edge];
        let d = geometry::sub(self.vertices[b], self.vertices[a]);
        let l = self.h_edge[edge];
        [d[0] / l, d[1] / l]
    }

    /// Unit normal of an edge: the tangent rotated clockwise.
    pub fn edge_normal(&self, edge: usize) -> [f64; 2] {
        let t = self.edge_tangent(edge);
        [t[1], -t[0]]
    }

    /// Point at parameter `s ∈ [0, 1]` along the oriented edge.
    pub fn edge_point(&self, edge: usize, s: f64) -> Point {
        let [a, b] = self.edges[edge];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])]
    }

    /// `V - E + T`; equals 1 for a simply connected domain.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.cells.len() as i64
    }

    /// Vertices on the domain boundary.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut flags = vec![false; self.vertices.len()];
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            if self.boundary[e] {
                flags[a] = true;
                flags[b] = true;
            }
        }
        flags
    }
}

pub fn build_mesh(vertices: Vec<Point>, cell_list: Vec<[usize; 3]>) -> Result<Mesh> {
    Mesh::new(vertices, cell_list)
}

fn bounding_box_diameter(vertices: &[Point]) -> f64 {
    if vertices.is_empty() {
        return 1.0;
    }
    let mut lo = vertices[0];
    let mut hi = vertices[0];
    for v in vertices {
        lo = [lo[0].min(v[0]), lo[1].min(v[1])];
        hi = [hi[0].max(v[0]), hi[1].max(v[1])];
    }
    geometry::norm(geometry::sub(hi, lo)).max(f64::MIN_POSITIVE)
}

/// Bucket grid for locating the cell containing a point.
#[derive(Debug, Clone)]
pub struct PointLocator {
    lo: Point,
    cell_size: [f64; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl PointLocator {
    pub fn new(mesh: &Mesh) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in mesh.vertices() {
            lo = [lo[0].min(v[0]), lo[1].min(v[1])];
            hi = [hi[0].max(v[0]), hi[1].max(v[1])];
        }
        let side = (mesh.num_cells() as f64).sqrt().ceil().max(1.0) as usize;
        let dims = [side, side];
        let cell_size = [
            ((hi[0] - lo[0]) / side as f64).max(f64::MIN_POSITIVE),
            ((hi[1] - lo[1]) / side as f64).max(f64::MIN_POSITIVE),
        ];
        let mut buckets = vec![Vec::new(); side * side];
        for c in 0..mesh.num_cells() {
            let vs = mesh.cell_vertices(c);
            let bx0 = vs.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
            let bx1 = vs.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
            let by0 = vs.iter().map(|v| v[1]).fold(f64::INFINITY, f64::min);
            let by1 = vs.iter().map(|v| v[1]).fold(f64::NEG_INFINITY, f64::max);
            let i0 = bucket_coord(bx0, lo[0], cell_size[0], side);
            let i1 = bucket_coord(bx1, lo[0], cell_size[0], side);
            let j0 = bucket_coord(by0, lo[1], cell_size[1], side);
            let j1 = bucket_coord(by1, lo[1], cell_size[1], side);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * side + i].push(c);
                }
            }
        }
        PointLocator {
            lo,
            cell_size,
            dims,
            buckets,
        }
    }

    /// Cell containing `p` (closed cells; ties resolved by lowest index).
    pub fn locate(&self, mesh: &Mesh, p: Point) -> Option<usize> {
        let i = bucket_coord(p[0], self.lo[0], self.cell_size[0], self.dims[0]);
        let j = bucket_coord(p[1], self.lo[1], self.cell_size[1], self.dims[1]);
        let mut best: Option<(usize, f64)> = None;
        for &c in &self.buckets[j * self.dims[0] + i] {
            let [a, b, d] = mesh.cell_vertices(c);
            let area = mesh.area(c);
            let l0 = geometry::signed_area(p, b, d) / area;
            let l1 = geometry::signed_area(a, p, d) / area;
            let l2 = 1.0 - l0 - l1;
            let worst = l0.min(l1).min(l2);
            if worst >= -1e-12 && best.map_or(true, |(_, w)| worst > w) {
                best = Some((c, worst));
            }
        }
        best.map(|(c, _)| c)
    }
}

fn bucket_coord(x: f64, lo: f64, size: f64, n: usize) -> usize {
    let k = ((x - lo) / size).floor();
    if k < 0.0 {
        0
    } else {
        (k as usize).min(n - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn two_triangles() -> Mesh {
        Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn smallest_square_mesh() {
        let m = two_triangles();
        assert_eq!((m.num_vertices(), m.num_cells(), m.num_edges()), (4, 2, 5));
        assert_eq!(m.num_interior_edges(), 1);
        assert_eq!(m.euler_characteristic(), 1);
    }

    #[test]
    fn clockwise_cell_is_reoriented() {
        let m = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 2, 1], [0, 2, 3]],
        )
        .unwrap();
        let reference = two_triangles();
        assert_eq!(m.num_edges(), reference.num_edges());
        for c in 0..2 {
            assert!(m.area(c) > 0.0);
        }
        let edges: HashSet<_> = m.edges().iter().collect();
        let reference_edges: HashSet<_> = reference.edges().iter().collect();
        assert_eq!(edges, reference_edges);
    }

    #[test]
    fn criss_cross_grid_edge_count_matches_enumeration() {
        let m = Mesh::unit_square(4);
        assert_eq!(m.num_cells(), 32);
        // brute force: distinct unordered vertex pairs appearing in some cell
        let mut pairs = HashSet::new();
        for c in m.cells() {
            for i in 0..3 {
                let (a, b) = (c[i], c[(i + 1) % 3]);
                pairs.insert((a.min(b), a.max(b)));
            }
        }
        assert_eq!(pairs.len(), m.num_edges());
        assert_eq!(m.num_edges(), m.num_vertices() + m.num_cells() - 1);
        for h in m.h_per_cell() {
            assert!((h - 2f64.sqrt() / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn interior_edges_have_opposite_signs() {
        let m = Mesh::unit_square(3);
        for e in 0..m.num_edges() {
            if let [Some(a), Some(b)] = m.edge_cells(e) {
                let sa = m.cell_edges(a).iter().find(|x| x.edge == e).unwrap().sign;
                let sb = m.cell_edges(b).iter().find(|x| x.edge == e).unwrap().sign;
                assert_eq!(sa, -sb);
            }
        }
    }

    #[test]
    fn hanging_node_is_rejected() {
        // square split into a big left triangle and two right triangles that
        // meet at the midpoint of the diagonal
        let vertices = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]];
        let cells = vec![[0, 2, 3], [0, 1, 4], [1, 2, 4]];
        assert!(matches!(Mesh::new(vertices, cells), Err(Error::NonConforming(_))));
    }

    #[test]
    fn degenerate_and_out_of_range_cells() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        assert!(matches!(
            Mesh::new(v.clone(), vec![[0, 1, 2]]),
            Err(Error::DegenerateCell { cell: 0, .. })
        ));
        assert!(matches!(
            Mesh::new(v, vec![[0, 1, 7]]),
            Err(Error::IndexOutOfRange { index: 7, .. })
        ));
    }

    #[test]
    fn refinement_halves_h_and_preserves_area() {
        let m = two_triangles();
        let r = m.refine_uniform();
        assert_eq!(r.child_mesh.num_cells(), 8);
        assert_eq!(r.child_mesh.max_h(), 0.5 * m.max_h());
        let mut child_area = vec![0.0; m.num_cells()];
        for (c, &p) in r.parent_of_cell.iter().enumerate() {
            child_area[p] += r.child_mesh.area(c);
            assert!(r.child_mesh.h_per_cell()[c] <= m.h_per_cell()[p]);
        }
        for (p, a) in child_area.iter().enumerate() {
            assert!((a - m.area(p)).abs() <= 1e-13 * m.area(p));
        }
        let mut mesh = m;
        for _ in 0..3 {
            mesh = mesh.refine_uniform().child_mesh;
            assert_eq!(mesh.euler_characteristic(), 1);
        }
        assert_eq!(mesh.num_cells(), 128);
    }

    #[test]
    fn right_triangle_diameter() {
        let m = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        assert!((m.h_per_cell()[0] - 2f64.sqrt()).abs() < 1e-15);
        let r = m.refine_uniform();
        for h in r.child_mesh.h_per_cell() {
            assert!((h - 0.5 * 2f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn locator_finds_centroids() {
        let m = Mesh::unit_square(5);
        let loc = PointLocator::new(&m);
        for c in 0..m.num_cells() {
            assert_eq!(loc.locate(&m, m.centroid(c)), Some(c));
        }
        assert_eq!(loc.locate(&m, [2.0, 2.0]), None);
    }
}
