//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process fails if any criterion does.

use std::sync::Arc;
use std::time::Instant;

use mixedwave_core::estimators::{self, ConstantsPolicy, EstimatorOptions};
use mixedwave_core::geometry;
use mixedwave_core::quadrature::{LineRule, TriangleRule};
use mixedwave_core::reconstruction::{discrete_acceleration, mu, C1Interpolant, EllipticReconstructor};
use mixedwave_core::solver::{self, forcing_value, Solver};
use mixedwave_core::verification::{
    disp_error, finish_study, four_cell_mesh, oracle_small_instance, run_level, ManufacturedKind, ManufacturedProblem,
    StudyConfig,
};
use mixedwave_core::{ForcingMode, Mesh, MixedSpace, Point, Problem, RtIndex, TimeGrid, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Outcome { passed, detail }
    }
}

type Criterion = fn() -> Outcome;

fn space(n: usize, rt: RtIndex) -> Arc<MixedSpace> {
    Arc::new(MixedSpace::new(Arc::new(Mesh::unit_square(n)), rt))
}

fn max_abs<'a>(v: impl IntoIterator<Item = &'a f64>) -> f64 {
    v.into_iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn rate(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Vector field with cubic components stored as `x^i y^j` coefficients.
struct CubicField {
    c: [[[f64; 4]; 4]; 2],
}

impl CubicField {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut c = [[[0.0; 4]; 4]; 2];
        for comp in &mut c {
            for i in 0..4 {
                for j in 0..4 - i {
                    comp[i][j] = rng.gen_range(-1.0..1.0);
                }
            }
        }
        CubicField { c }
    }

    fn value(&self, x: Point) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (o, comp) in out.iter_mut().zip(&self.c) {
            for i in 0..4 {
                for j in 0..4 - i {
                    *o += comp[i][j] * x[0].powi(i as i32) * x[1].powi(j as i32);
                }
            }
        }
        out
    }

    fn div(&self, x: Point) -> f64 {
        let mut d = 0.0;
        for i in 0..4 {
            for j in 0..4 - i {
                if i > 0 {
                    d += self.c[0][i][j] * i as f64 * x[0].powi(i as i32 - 1) * x[1].powi(j as i32);
                }
                if j > 0 {
                    d += self.c[1][i][j] * j as f64 * x[0].powi(i as i32) * x[1].powi(j as i32 - 1);
                }
            }
        }
        d
    }
}

fn commuting_diagram() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let fields: Vec<CubicField> = (0..50).map(|_| CubicField::random(&mut rng)).collect();
    let mut worst = 0.0f64;
    for n in [4, 8, 16] {
        for rt in [RtIndex::Zero, RtIndex::One] {
            let s = space(n, rt);
            let rule = TriangleRule::of_degree(2 * s.ell() + 6);
            for f in &fields {
                let pi = s.fortin_interpolate(|x| f.value(x));
                let p = s.l2_project_scalar(|x| f.div(x));
                let (mut defect, mut norm) = (0.0, 0.0);
                for c in 0..s.num_cells() {
                    let det = s.jacobian_det(c);
                    for (xh, &w) in rule.points.iter().zip(&rule.weights) {
                        let d = s.stress_at(&pi, c, *xh).1 - s.disp_at(&p, c, *xh);
                        let v = f.value(s.to_physical(c, *xh));
                        defect += w * det * d * d;
                        norm += w * det * geometry::dot(v, v);
                    }
                }
                worst = worst.max(defect.sqrt() / (1.0 + norm.sqrt()));
            }
        }
    }
    Outcome::new(worst <= 1e-10, format!("max ‖div Πv - P div v‖/(1+‖v‖) = {worst:.3e} (tol 1e-10)"))
}

fn standing_wave_run(n: usize, steps: usize) -> (Solver, Trajectory) {
    let p = ManufacturedProblem::standing_wave();
    let mut s = Solver::new(space(n, RtIndex::Zero), p.coefficient()).expect("solver setup");
    let traj = s.run(&p, &TimeGrid::uniform(0.5, steps).expect("grid"), ForcingMode::Pointwise).expect("solve");
    (s, traj)
}

fn residual_orthogonality() -> Outcome {
    let (solver, traj) = standing_wave_run(8, 20);
    let scale = traj.states.iter().map(|s| max_abs(s.u.coeffs.iter().chain(&s.sigma.coeffs))).fold(1.0, f64::max);
    let worst = (1..traj.num_nodes())
        .map(|n| {
            let (r1, r2) = solver.discrete_residuals(&traj, n);
            r1.max(r2)
        })
        .fold(0.0, f64::max);
    Outcome::new(
        worst <= 1e-9 * scale,
        format!("max |r1|, |r2| = {worst:.3e} (tol 1e-9 x {scale:.3})"),
    )
}

fn c1_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rule = LineRule::gauss(4);
    let (mut nodes_err, mut mu_end, mut mu_mean, mut moment_rel) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let steps = rng.gen_range(1..10);
        let mut t = vec![0.0];
        for _ in 0..steps {
            let last = *t.last().unwrap();
            t.push(last + rng.gen_range(1e-3..1.0));
        }
        let grid = TimeGrid::from_nodes(t).expect("increasing nodes");
        let dim = rng.gen_range(1..4);
        let values: Vec<Vec<f64>> = (0..=steps).map(|_| (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
        let initial_rate: Vec<f64> = (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let c1 = C1Interpolant::build(&grid, values.clone(), initial_rate.clone()).expect("interpolant");
        let rate_at = |n: usize| -> Vec<f64> {
            if n == 0 {
                initial_rate.clone()
            } else {
                values[n].iter().zip(&values[n - 1]).map(|(a, b)| (a - b) / grid.k(n)).collect()
            }
        };
        for n in 1..=steps {
            let (a, b, k) = (grid.t(n - 1), grid.t(n), grid.k(n));
            let (v_b, r_b, _) = c1.eval_on(n, b);
            let (v_a, r_a, _) = c1.eval_on(n, a);
            let (rb, ra) = (rate_at(n), rate_at(n - 1));
            for i in 0..dim {
                let scaled = |x: f64, y: f64| (x - y).abs() / (1.0 + y.abs());
                nodes_err = nodes_err
                    .max(scaled(v_b[i], values[n][i]))
                    .max(scaled(v_a[i], values[n - 1][i]))
                    .max(scaled(r_b[i], rb[i]))
                    .max(scaled(r_a[i], ra[i]));
            }
            mu_end = mu_end.max((mu(&grid, n, a) - 3.0).abs()).max((mu(&grid, n, b) + 3.0).abs());
            mu_mean = mu_mean.max(rule.integrate(a, b, |s| mu(&grid, n, s)).abs() / k.max(1.0));
            let moment = rule.integrate(a, b, |s| (b - s).powi(3) / k - (b - s).powi(2));
            let exact = -k.powi(3) / 12.0;
            moment_rel = moment_rel.max((moment - exact).abs() / exact.abs());
        }
    }
    let passed = nodes_err <= 1e-12 && mu_end <= 1e-12 && mu_mean <= 1e-14 && moment_rel <= 1e-13;
    Outcome::new(
        passed,
        format!(
            "nodes {nodes_err:.1e} (1e-12), mu ends {mu_end:.1e} (1e-12), mean mu {mu_mean:.1e} (1e-14), moment {moment_rel:.1e} (1e-13)"
        ),
    )
}

fn elliptic_orthogonality() -> Outcome {
    let p = ManufacturedProblem::new(ManufacturedKind::FullVariable).expect("registered problem");
    let s = space(8, RtIndex::Zero);
    let grid = TimeGrid::uniform(0.5, 20).expect("grid");
    let traj = solver::run(&p, s.clone(), &grid, ForcingMode::Pointwise).expect("solve");
    let exact = p.exact().expect("manufactured");
    let mut worst = 0.0f64;
    let mut monitor = Vec::new();
    for enrich in [1, 2] {
        let rec = EllipticReconstructor::new(s.clone(), p.coefficient(), enrich).expect("reconstructor");
        let nodes: Vec<usize> = if enrich == 1 { (0..traj.num_nodes()).collect() } else { vec![traj.num_nodes() - 1] };
        for n in nodes {
            let st = &traj.states[n];
            let data = |x: Point| forcing_value(&p, &grid, ForcingMode::Pointwise, n, x);
            let pair = rec.reconstruct(&discrete_acceleration(&traj, n), data).expect("reconstruction");
            let scale = max_abs(st.u.coeffs.iter().chain(&st.sigma.coeffs)).max(1.0);
            let (r1, r2) = rec.orthogonality_defect(p.coefficient(), &pair, &st.u, &st.sigma);
            let defect = r1.max(r2).max(rec.constitutive_defect(&pair)) / scale;
            worst = worst.max(defect);
            if n == traj.num_nodes() - 1 {
                let t = grid.t(n);
                monitor.push(disp_error(rec.fine_space(), &pair.u, |x| exact.u(x, t)));
            }
        }
    }
    Outcome::new(
        worst <= 1e-9,
        format!(
            "max scaled defect {worst:.3e} (tol 1e-9); final ‖ũ - u‖ enrich 1: {:.4e}, enrich 2: {:.4e}",
            monitor[0], monitor[1]
        ),
    )
}

fn dense_oracle() -> Outcome {
    let grid = TimeGrid::from_nodes(vec![0.0, 0.1, 0.25, 0.3]).expect("grid");
    let mut worst = 0.0f64;
    for kind in [ManufacturedKind::FullVariable, ManufacturedKind::Forced, ManufacturedKind::StandingWave] {
        let p = ManufacturedProblem::new(kind).expect("registered problem");
        for rt in [RtIndex::Zero, RtIndex::One] {
            for mode in [ForcingMode::Pointwise, ForcingMode::IntervalAverage] {
                let r = oracle_small_instance(&p, four_cell_mesh(), rt, &grid, mode).expect("oracle instance");
                worst = worst.max(r.solve).max(r.reconstruction);
            }
        }
    }
    Outcome::new(worst <= 1e-11, format!("max relative sparse/dense difference {worst:.3e} (tol 1e-11)"))
}

struct SpatialStudy {
    unit: mixedwave_core::verification::StudyResult,
    calibrated: mixedwave_core::verification::StudyResult,
}

fn spatial_study() -> &'static SpatialStudy {
    static STUDY: std::sync::OnceLock<SpatialStudy> = std::sync::OnceLock::new();
    STUDY.get_or_init(|| {
        let p = ManufacturedProblem::standing_wave();
        let cfg = StudyConfig::spatial(RtIndex::Zero, 0.5, &[8, 16, 32]);
        let runs: Vec<_> = cfg.levels.iter().map(|&l| run_level(&p, &cfg, l).expect("study level")).collect();
        let unit = finish_study(&cfg, runs.clone()).expect("unit study");
        let calibrated_cfg = StudyConfig {
            constants: ConstantsPolicy::Calibrated,
            ..cfg
        };
        let calibrated = finish_study(&calibrated_cfg, runs).expect("calibrated study");
        SpatialStudy { unit, calibrated }
    })
}

fn spatial_rates() -> Outcome {
    let study = &spatial_study().unit;
    let mut passed = true;
    let mut parts = Vec::new();
    for l in &study.levels[1..] {
        let (ru, rs) = (l.rate_u.unwrap(), l.rate_sigma.unwrap());
        passed &= (ru - 1.0).abs() <= 0.25 && (rs - 1.0).abs() <= 0.25;
        parts.push(format!("n={}: u {ru:.3}, sigma {rs:.3}", l.spec.mesh_n));
    }
    Outcome::new(passed, format!("{} (target 1 ± 0.25)", parts.join("; ")))
}

fn temporal_rates() -> Outcome {
    let p = ManufacturedProblem::standing_wave();
    let s = space(32, RtIndex::Zero);
    let solver = Solver::new(s.clone(), p.coefficient()).expect("solver setup");
    let steps = [10, 20, 40];
    let mut trajs = Vec::new();
    let mut e13 = Vec::new();
    for &n in &steps {
        let traj = solver::run(&p, s.clone(), &TimeGrid::uniform(0.5, n).expect("grid"), ForcingMode::Pointwise).expect("solve");
        let series = estimators::estimate_trajectory(&traj, &p, &EstimatorOptions::default()).expect("estimators");
        e13.push(*series.temporal.e13.last().unwrap());
        trajs.push(traj);
    }
    // Successive differences at the coarsest nodes cancel the fixed spatial error.
    let diff = |a: &Trajectory, b: &Trajectory| -> f64 {
        let stride = b.grid.num_steps() / a.grid.num_steps();
        (0..a.num_nodes())
            .map(|m| {
                let d: Vec<f64> = a.states[m].u.coeffs.iter().zip(&b.states[m * stride].u.coeffs).map(|(x, y)| x - y).collect();
                solver.system().m_u.bilinear(&d, &d).sqrt()
            })
            .fold(0.0, f64::max)
    };
    let (d1, d2) = (diff(&trajs[0], &trajs[1]), diff(&trajs[1], &trajs[2]));
    let rate_u = rate(d1, d2);
    let exps = [rate(e13[0], e13[1]), rate(e13[1], e13[2])];
    let passed = (rate_u - 1.0).abs() <= 0.25 && exps.iter().all(|e| (0.75..=1.25).contains(e));
    Outcome::new(
        passed,
        format!(
            "self-convergence rate u {rate_u:.3} (1 ± 0.25); e13 exponents {:.3}, {:.3} ([0.75, 1.25])",
            exps[0], exps[1]
        ),
    )
}

fn reliability() -> Outcome {
    let study = spatial_study();
    let mut passed = true;
    let mut parts = Vec::new();
    for (u, c) in study.unit.levels.iter().zip(&study.calibrated.levels) {
        passed &= u.eff_u >= 1.0 && u.eff_sigma >= 1.0;
        passed &= [c.eff_u, c.eff_sigma].iter().all(|e| (1.0..=10.0).contains(e));
        parts.push(format!(
            "n={}: unit {:.2}/{:.2}, calibrated {:.2}/{:.2}",
            u.spec.mesh_n, u.eff_u, u.eff_sigma, c.eff_u, c.eff_sigma
        ));
    }
    Outcome::new(passed, format!("{} (unit ≥ 1, calibrated in [1, 10])", parts.join("; ")))
}

fn forcing_average() -> Outcome {
    let p = ManufacturedProblem::new(ManufacturedKind::Forced).expect("registered problem");
    let s = space(8, RtIndex::Zero);
    let grid = TimeGrid::uniform(0.5, 20).expect("grid");
    let finals = |mode| {
        let traj = solver::run(&p, s.clone(), &grid, mode).expect("solve");
        let t = estimators::estimate_trajectory(&traj, &p, &EstimatorOptions::default()).expect("estimators").temporal;
        (*t.e14.last().unwrap(), *t.e24.last().unwrap())
    };
    let (pw, avg) = (finals(ForcingMode::Pointwise), finals(ForcingMode::IntervalAverage));
    let (r14, r24) = (pw.0 / avg.0, pw.1 / avg.1);
    Outcome::new(r14 >= 2.0 && r24 >= 2.0, format!("e14 reduced {r14:.3}x, e24 reduced {r24:.3}x (≥ 2)"))
}

fn energy_monotone() -> Outcome {
    let (solver, traj) = standing_wave_run(8, 20);
    let energies: Vec<f64> = traj.states.iter().map(|s| solver.energy(s)).collect();
    let growth = energies.windows(2).map(|w| (w[1] - w[0]) / w[0]).fold(f64::NEG_INFINITY, f64::max);
    Outcome::new(growth <= 1e-10, format!("max relative energy change per step {growth:.3e} (≤ 1e-10)"))
}

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("commuting_diagram", commuting_diagram),
        ("residual_orthogonality", residual_orthogonality),
        ("c1_reconstruction", c1_identities),
        ("elliptic_orthogonality", elliptic_orthogonality),
        ("dense_oracle", dense_oracle),
        ("spatial_convergence", spatial_rates),
        ("temporal_convergence", temporal_rates),
        ("reliability", reliability),
        ("average_forcing", forcing_average),
        ("energy_monotone", energy_monotone),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let status = if outcome.passed { "PASS" } else { "FAIL" };
        println!("{status} {:>2} {name}: {} [{:.1}s]", i + 1, outcome.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!outcome.passed);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
