use std::sync::Arc;

use approx::assert_relative_eq;
use mixedwave_core::assembly::{assemble_divergence, assemble_stress_mass, assemble_system};
use mixedwave_core::geometry::{self, Point};
use mixedwave_core::linalg::dense_rank;
use mixedwave_core::mesh::Mesh;
use mixedwave_core::problem::ConstantCoefficient;
use mixedwave_core::quadrature::TriangleRule;
use mixedwave_core::spaces::{DispField, MixedSpace, RtIndex, StressField};
use mixedwave_core::verification::{assemble_dense, ManufacturedKind, ManufacturedProblem};
use mixedwave_core::Problem;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const IDENTITY: ConstantCoefficient = ConstantCoefficient([[1.0, 0.0], [0.0, 1.0]]);

/// Unit-square grid with interior vertices moved by up to `jitter · h`.
fn perturbed_square(n: usize, jitter: f64, seed: u64) -> Mesh {
    let base = Mesh::unit_square(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1.0 / n as f64;
    let boundary = base.boundary_vertices();
    let vertices: Vec<Point> = base
        .vertices()
        .iter()
        .zip(&boundary)
        .map(|(v, &b)| {
            if b {
                *v
            } else {
                [v[0] + jitter * h * rng.gen_range(-1.0..1.0), v[1] + jitter * h * rng.gen_range(-1.0..1.0)]
            }
        })
        .collect();
    Mesh::new(vertices, base.cells().to_vec()).expect("small perturbations keep cells positive")
}

fn rt(ell: usize) -> RtIndex {
    RtIndex::new(ell).unwrap()
}

/// `‖div Π_h v - P_h div v‖` by an independent high-order rule.
fn commuting_defect(space: &MixedSpace, v: impl Fn(Point) -> [f64; 2] + Copy, div_v: impl Fn(Point) -> f64 + Copy) -> f64 {
    let pi = space.fortin_interpolate(v);
    let p = space.l2_project_scalar(div_v);
    let rule = TriangleRule::of_degree(2 * space.ell() + 2);
    let mut total = 0.0;
    for c in 0..space.num_cells() {
        let det = space.jacobian_det(c);
        for (xh, &w) in rule.points.iter().zip(&rule.weights) {
            let d = space.stress_at(&pi, c, *xh).1 - space.disp_at(&p, c, *xh);
            total += w * det * d * d;
        }
    }
    total.sqrt()
}

fn vector_l2(v: impl Fn(Point) -> [f64; 2]) -> f64 {
    let space = MixedSpace::new(Arc::new(Mesh::unit_square(4)), RtIndex::Zero);
    let rule = TriangleRule::of_degree(8);
    let mut total = 0.0;
    for c in 0..space.num_cells() {
        let det = space.jacobian_det(c);
        for (xh, &w) in rule.points.iter().zip(&rule.weights) {
            let val = v(space.to_physical(c, *xh));
            total += w * det * geometry::dot(val, val);
        }
    }
    total.sqrt()
}

#[test]
fn criss_cross_diameters() {
    let mesh = Mesh::unit_square(4);
    for h in mesh.h_per_cell() {
        assert_relative_eq!(*h, 2f64.sqrt() / 4.0, max_relative = 1e-14);
    }
    let mut m = Mesh::unit_square(1);
    for _ in 0..3 {
        m = m.refine_uniform().child_mesh;
    }
    assert_eq!(m.num_cells(), 128);
}

#[test]
fn sine_field_commutes_on_criss_cross_grid() {
    use std::f64::consts::PI;
    for ell in [0, 1] {
        let space = MixedSpace::new(Arc::new(Mesh::unit_square(8)), rt(ell));
        let defect = commuting_defect(&space, |x| [(PI * x[1]).sin(), (PI * x[0]).sin()], |_| 0.0);
        assert!(defect <= 1e-10, "ℓ = {ell}: {defect:e}");
    }
}

#[test]
fn divergence_has_full_row_rank() {
    for n in 1..=3 {
        for ell in [0, 1] {
            let space = MixedSpace::new(Arc::new(perturbed_square(n, 0.2, n as u64)), rt(ell));
            let dense = assemble_dense(&space, &IDENTITY).unwrap();
            assert_eq!(dense_rank(&dense.b, 1e-10), space.n_disp(), "n = {n}, ℓ = {ell}");
        }
    }
}

#[test]
fn reference_rt0_mass_matrix_matches_moment_formula() {
    let vs = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let mesh = Arc::new(Mesh::new(vs.to_vec(), vec![[0, 1, 2]]).unwrap());
    let space = MixedSpace::new(mesh.clone(), RtIndex::Zero);
    let sys = assemble_system(&space, &IDENTITY).unwrap();
    let area = 0.5;
    let c = mesh.centroid(0);
    // ∫_K x xᵀ = |K|/12 (Σ v vᵀ + 9 c cᵀ)
    let second: f64 = vs.iter().map(|v| geometry::dot(*v, *v)).sum::<f64>() + 9.0 * geometry::dot(c, c);
    let moment = |p: Point, q: Point| area * (second / 12.0 - geometry::dot(c, [p[0] + q[0], p[1] + q[1]]) + geometry::dot(p, q));
    // φ_i = s_i (x - p_i) / (2|K|) with p_i opposite the edge of local dof i
    let local: Vec<(usize, f64, Point)> = mesh
        .cell_edges(0)
        .iter()
        .map(|ce| {
            let [a, b] = mesh.edges()[ce.edge];
            let opposite = (0..3).find(|v| *v != a && *v != b).unwrap();
            (ce.edge, ce.sign, vs[opposite])
        })
        .collect();
    for &(ei, si, pi) in &local {
        for &(ej, sj, pj) in &local {
            let exact = si * sj * moment(pi, pj) / (4.0 * area * area);
            assert_relative_eq!(sys.m_sigma.get(ei, ej), exact, epsilon = 1e-14);
        }
    }
}

#[test]
fn weighted_mass_rayleigh_quotients_lie_in_coefficient_range() {
    let p = ManufacturedProblem::new(ManufacturedKind::FullVariable).unwrap();
    let coef = p.coefficient();
    let space = MixedSpace::new(Arc::new(Mesh::unit_square(3)), RtIndex::One);
    let weighted = assemble_system(&space, coef).unwrap().m_sigma;
    let plain = assemble_stress_mass(&space, |_| Ok(geometry::IDENTITY)).unwrap();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for c in 0..space.num_cells() {
        for xh in &space.cell_rule().points {
            let a = coef.alpha(space.to_physical(c, *xh));
            let mean = 0.5 * (a[0][0] + a[1][1]);
            let rad = (0.25 * (a[0][0] - a[1][1]).powi(2) + a[0][1] * a[1][0]).sqrt();
            lo = lo.min(mean - rad);
            hi = hi.max(mean + rad);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..20 {
        let x: Vec<f64> = (0..space.n_stress()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let q = weighted.bilinear(&x, &x) / plain.bilinear(&x, &x);
        assert!(q >= lo * (1.0 - 1e-12) && q <= hi * (1.0 + 1e-12), "{q} not in [{lo}, {hi}]");
    }
}

/// Vector field with cubic polynomial components.
#[derive(Debug, Clone)]
struct Cubic {
    cx: Vec<f64>,
    cy: Vec<f64>,
}

const MONOMIALS: [(i32, i32); 10] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)];

impl Cubic {
    fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coeffs = || (0..MONOMIALS.len()).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<f64>>();
        Cubic { cx: coeffs(), cy: coeffs() }
    }

    fn value(&self, x: Point) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (i, &(a, b)) in MONOMIALS.iter().enumerate() {
            let m = x[0].powi(a) * x[1].powi(b);
            out[0] += self.cx[i] * m;
            out[1] += self.cy[i] * m;
        }
        out
    }

    fn div(&self, x: Point) -> f64 {
        let mut d = 0.0;
        for (i, &(a, b)) in MONOMIALS.iter().enumerate() {
            if a > 0 {
                d += self.cx[i] * a as f64 * x[0].powi(a - 1) * x[1].powi(b);
            }
            if b > 0 {
                d += self.cy[i] * b as f64 * x[0].powi(a) * x[1].powi(b - 1);
            }
        }
        d
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn commuting_diagram_for_cubic_fields(seed in any::<u64>(), n_index in 0usize..3, ell in 0usize..2) {
        let field = Cubic::random(seed);
        let space = MixedSpace::new(Arc::new(Mesh::unit_square([4, 8, 16][n_index])), rt(ell));
        let defect = commuting_defect(&space, |x| field.value(x), |x| field.div(x));
        prop_assert!(defect <= 1e-10 * (1.0 + vector_l2(|x| field.value(x))), "{defect:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mesh_connectivity_invariants(n in 1usize..6, jitter in 0.0f64..0.3, seed in any::<u64>()) {
        let mesh = perturbed_square(n, jitter, seed);
        prop_assert_eq!(mesh.euler_characteristic(), 1);
        let mut seen = vec![0usize; mesh.num_edges()];
        let mut signs = vec![0.0f64; mesh.num_edges()];
        for c in 0..mesh.num_cells() {
            prop_assert!(mesh.area(c) > 0.0);
            let vs = mesh.cell_vertices(c);
            let longest = (0..3).map(|i| geometry::norm(geometry::sub(vs[i], vs[(i + 1) % 3]))).fold(0.0, f64::max);
            prop_assert!((mesh.h_per_cell()[c] - longest).abs() <= 1e-15);
            for ce in mesh.cell_edges(c) {
                seen[ce.edge] += 1;
                signs[ce.edge] += ce.sign;
            }
        }
        for e in 0..mesh.num_edges() {
            let expected = if mesh.is_boundary_edge(e) { 1 } else { 2 };
            prop_assert_eq!(seen[e], expected);
            if expected == 2 {
                prop_assert_eq!(signs[e], 0.0);
            }
        }
        let refined = mesh.refine_uniform();
        let child = &refined.child_mesh;
        prop_assert_eq!(child.euler_characteristic(), 1);
        prop_assert!((child.total_area() - mesh.total_area()).abs() <= 1e-13 * mesh.total_area());
        let mut child_area = vec![0.0; mesh.num_cells()];
        for (c, &p) in refined.parent_of_cell.iter().enumerate() {
            child_area[p] += child.area(c);
            prop_assert!(child.h_per_cell()[c] <= mesh.h_per_cell()[p] * (1.0 + 1e-14));
        }
        for (p, a) in child_area.iter().enumerate() {
            prop_assert!((a - mesh.area(p)).abs() <= 1e-13 * mesh.area(p));
        }
    }

    #[test]
    fn normal_traces_agree_on_interior_edges(seed in any::<u64>(), ell in 0usize..2) {
        let mesh = Arc::new(perturbed_square(3, 0.25, seed));
        let space = MixedSpace::new(mesh.clone(), rt(ell));
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let s = StressField::new((0..space.n_stress()).map(|_| rng.gen_range(-3.0..3.0)).collect());
        for e in 0..mesh.num_edges() {
            if let [Some(a), Some(b)] = mesh.edge_cells(e) {
                let n = mesh.edge_normal(e);
                for t in [0.1127, 0.5, 0.8873] {
                    let x = mesh.edge_point(e, t);
                    let va = space.stress_at(&s, a, space.to_reference(a, x)).0;
                    let vb = space.stress_at(&s, b, space.to_reference(b, x)).0;
                    prop_assert!((geometry::dot(va, n) - geometry::dot(vb, n)).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn divergence_operator_is_adjoint_consistent(seed in any::<u64>(), ell in 0usize..2) {
        let space = MixedSpace::new(Arc::new(perturbed_square(3, 0.2, seed)), rt(ell));
        let b = assemble_divergence(&space);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = StressField::new((0..space.n_stress()).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let u = DispField::new((0..space.n_disp()).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let assembled = b.bilinear(&u.coeffs, &s.coeffs);
        let rule = TriangleRule::of_degree(2 * ell + 1);
        let mut direct = 0.0;
        for c in 0..space.num_cells() {
            let det = space.jacobian_det(c);
            for (xh, &w) in rule.points.iter().zip(&rule.weights) {
                direct += w * det * space.stress_at(&s, c, *xh).1 * space.disp_at(&u, c, *xh);
            }
        }
        prop_assert!((assembled - direct).abs() <= 1e-11 * assembled.abs().max(1.0), "{assembled} vs {direct}");
    }

    #[test]
    fn divergence_of_basis_lies_in_displacement_space(seed in any::<u64>(), ell in 0usize..2) {
        let space = MixedSpace::new(Arc::new(perturbed_square(2, 0.2, seed)), rt(ell));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = StressField::new((0..space.n_stress()).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let projected = space.disp_mass_solve(&assemble_divergence(&space).mul_vec(&s.coeffs));
        for c in 0..space.num_cells() {
            for xh in [[0.1, 0.1], [0.6, 0.2], [0.2, 0.7], [0.3, 0.3]] {
                let d = space.stress_at(&s, c, xh).1;
                prop_assert!((d - space.disp_at(&projected, c, xh)).abs() <= 1e-10 * (1.0 + d.abs()));
            }
        }
    }
}
