//! Executing a resolved configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use mixedwave_core::estimators::{self, EstimatorOptions, EstimatorReport};
use mixedwave_core::reconstruction::{discrete_acceleration, EllipticReconstructor};
use mixedwave_core::solver::{self, forcing_value, Solver};
use mixedwave_core::verification::{self, finish_study, run_level, ManufacturedProblem, StudyConfig, StudyResult};
use mixedwave_core::{Mesh, MixedSpace, TimeGrid, Trajectory};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::checks::{self, Check};
use crate::config::{CellMaps, Command, Coupling, MeshSource, ProblemSpec, RunConfig, TimeSpec};
use crate::error::{CliError, Result};
use crate::formats::{read_mesh, write_trajectory};
use crate::problems::{CustomProblem, ExprCoefficient, LoadedProblem};
use crate::report::{self, fmt_f64};

/// Environment variable read as the worker-thread hint.
pub const THREADS_VAR: &str = "MIXEDWAVE_THREADS";

/// Files written by a successful run, relative to the output directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
}

pub fn load_problem(spec: &ProblemSpec) -> Result<LoadedProblem> {
    Ok(match spec {
        ProblemSpec::Manufactured(kind) => LoadedProblem::Manufactured(ManufacturedProblem::new(*kind)?),
        ProblemSpec::Custom(c) => LoadedProblem::Custom(CustomProblem {
            f: c.f.clone(),
            u0: c.u0.clone(),
            u1: c.u1.clone(),
            coefficient: ExprCoefficient::new(c.a11.clone(), c.a12.clone(), c.a22.clone()),
        }),
    })
}

pub fn load_mesh(source: &MeshSource) -> Result<Mesh> {
    match source {
        MeshSource::Builtin(n) => Ok(Mesh::unit_square(*n)),
        MeshSource::Files { nodes, elements } => read_mesh(nodes, elements),
    }
}

pub fn time_grid(spec: &TimeSpec) -> Result<TimeGrid> {
    Ok(match spec {
        TimeSpec::Uniform { steps, end } => TimeGrid::uniform(*end, *steps)?,
        TimeSpec::Nodes(n) => TimeGrid::from_nodes(n.clone())?,
    })
}

/// Thread count from `MIXEDWAVE_THREADS`; `None` leaves the choice to rayon.
pub fn thread_hint() -> Option<usize> {
    std::env::var(THREADS_VAR).ok()?.trim().parse::<usize>().ok().filter(|n| *n > 0)
}

/// SHA-256 of the resolved configuration without its `out` line, followed by
/// the bytes of every input file it references.
pub fn inputs_hash(config: &RunConfig) -> Result<String> {
    let mut h = Sha256::new();
    for line in config.render().lines().filter(|l| !l.starts_with("out =")) {
        h.update(line.as_bytes());
        h.update(b"\n");
    }
    if let MeshSource::Files { nodes, elements } = &config.mesh {
        for p in [nodes, elements] {
            h.update(fs::read(p).map_err(CliError::io(p))?);
        }
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn write_manifest(config: &RunConfig, wall: f64, status: &str) -> Result<PathBuf> {
    let path = config.out.join("manifest.txt");
    let text = format!(
        "command = {}\ninputs_sha256 = {}\nmixedwave_version = {}\nplatform = {}-{}\nthreads = {}\nwall_time_seconds = {wall:.6}\nstatus = {status}\n",
        config.command.name(),
        inputs_hash(config)?,
        env!("CARGO_PKG_VERSION"),
        std::env::consts::ARCH,
        std::env::consts::OS,
        thread_hint().map_or("default".to_string(), |n| n.to_string()),
    );
    fs::write(&path, text).map_err(CliError::io(&path))?;
    Ok(path)
}

/// Run the command of `config`, writing every artifact under `config.out`.
/// `manifest.txt` is written even when the command fails after the output
/// directory exists.
pub fn execute(config: &RunConfig) -> Result<Outcome> {
    let start = Instant::now();
    let out = &config.out;
    fs::create_dir_all(out).map_err(CliError::io(out))?;
    let resolved = out.join("resolved_config.txt");
    fs::write(&resolved, config.render()).map_err(CliError::io(&resolved))?;
    let result = match config.command {
        Command::Solve => solve(config),
        Command::Estimate => estimate(config),
        Command::Study => study(config),
        Command::OracleCheck => oracle_check(config),
    };
    let status = match &result {
        Ok(_) => "ok".to_string(),
        Err(e) => e.report_line(),
    };
    let manifest = write_manifest(config, start.elapsed().as_secs_f64(), &status)?;
    let mut outcome = result?;
    outcome.files.insert(0, resolved);
    outcome.files.push(manifest);
    Ok(outcome)
}

fn run_trajectory(config: &RunConfig, problem: &LoadedProblem) -> Result<Trajectory> {
    let mesh = load_mesh(&config.mesh)?;
    let space = Arc::new(MixedSpace::new(Arc::new(mesh), config.rt));
    let grid = time_grid(&config.time)?;
    Ok(solver::run(problem.as_problem(), space, &grid, config.forcing)?)
}

fn solve(config: &RunConfig) -> Result<Outcome> {
    let problem = load_problem(&config.problem)?;
    let traj = run_trajectory(config, &problem)?;
    let dir = config.out.join("trajectory");
    write_trajectory(&traj, &dir)?;
    let mut files = vec![dir];

    let solver = Solver::new(traj.space.clone(), problem.as_problem().coefficient())?;
    let errors = problem.exact().map(|e| verification::true_error(&traj, problem.as_problem(), e));
    let rows = (0..traj.num_nodes()).map(|n| {
        let s = &traj.states[n];
        let mut row = vec![
            n.to_string(),
            fmt_f64(traj.grid.t(n)),
            fmt_f64(solver.energy(s)),
            fmt_f64(traj.solve_residuals[n]),
        ];
        match &errors {
            Some(e) => row.extend([fmt_f64(e.u[n]), fmt_f64(e.sigma[n]), fmt_f64(e.u_t[n])]),
            None => row.extend([String::new(), String::new(), String::new()]),
        }
        row
    });
    let summary = config.out.join("solution.csv");
    report::write_csv(&summary, &["n", "t", "energy", "solve_residual", "err_u", "err_sigma", "err_ut"], rows)?;
    files.push(summary);

    if config.vtk {
        let last = traj.num_nodes() - 1;
        let path = config.out.join("displacement.vtk");
        let u = report::cell_values(&traj.space, &traj.states[last].u);
        let ut = report::cell_values(&traj.space, &traj.states[last].dt_u);
        report::write_vtk(&path, &traj.space, &format!("mixedwave displacement at t = {}", traj.grid.t(last)), &[("u", &u), ("u_t", &ut)])?;
        files.push(path);
    }
    Ok(Outcome { files, checks: Vec::new() })
}

fn cell_map_nodes(maps: &CellMaps, last: usize) -> Vec<usize> {
    match maps {
        CellMaps::None => Vec::new(),
        CellMaps::Last => vec![last],
        CellMaps::Nodes(n) => n.iter().copied().filter(|n| *n <= last).collect(),
    }
}

/// Estimator report of one run under the configured constants policy.
pub fn estimate_report(config: &RunConfig, problem: &LoadedProblem, traj: &Trajectory) -> Result<EstimatorReport> {
    let options = EstimatorOptions {
        recovery: config.recovery,
        unprojected_acceleration: config.unprojected_acceleration,
        cell_maps_at: cell_map_nodes(&config.cell_maps, traj.num_nodes() - 1),
        ..EstimatorOptions::default()
    };
    let series = estimators::estimate_trajectory(traj, problem.as_problem(), &options)?;
    let errors = problem.exact().map(|e| verification::true_error(traj, problem.as_problem(), e));
    let constants = estimators::resolve_constants(config.constants, &series, errors.as_ref());
    Ok(estimators::compose_report(series, constants, errors)?)
}

fn estimate(config: &RunConfig) -> Result<Outcome> {
    let problem = load_problem(&config.problem)?;
    let traj = run_trajectory(config, &problem)?;
    let report = estimate_report(config, &problem, &traj)?;
    let out = &config.out;
    let mut files = Vec::new();

    let nodes = out.join("estimator.csv");
    report::write_estimator_nodes(&nodes, &report)?;
    files.push(nodes);
    let summary = out.join("estimator_summary.csv");
    report::write_estimator_summary(&summary, &report)?;
    files.push(summary);
    for (n, est) in &report.series.cell_maps {
        let path = out.join(format!("cells_{n}.csv"));
        report::write_cell_map(&path, &traj.space, est)?;
        files.push(path);
        if config.vtk {
            let (du, ds) = report::densities(est);
            let u = report::cell_values(&traj.space, &traj.states[*n].u);
            let path = out.join(format!("estimator_{n}.vtk"));
            report::write_vtk(
                &path,
                &traj.space,
                &format!("mixedwave estimator density at node {n}"),
                &[("u", &u), ("density_u", &du), ("density_sigma", &ds)],
            )?;
            files.push(path);
        }
    }

    let p = problem.as_problem();
    let rec = EllipticReconstructor::new(traj.space.clone(), p.coefficient(), config.enrich)?;
    let mut rows = Vec::with_capacity(traj.num_nodes());
    for n in 0..traj.num_nodes() {
        let st = &traj.states[n];
        let pair = rec.reconstruct(&discrete_acceleration(&traj, n), |x| forcing_value(p, &traj.grid, traj.forcing_mode, n, x))?;
        let (r1, r2) = rec.orthogonality_defect(p.coefficient(), &pair, &st.u, &st.sigma);
        rows.push(vec![
            n.to_string(),
            fmt_f64(traj.grid.t(n)),
            fmt_f64(r1),
            fmt_f64(r2),
            fmt_f64(rec.constitutive_defect(&pair)),
        ]);
    }
    let path = out.join("reconstruction.csv");
    report::write_csv(&path, &["n", "t", "orthogonality_stress", "orthogonality_disp", "constitutive"], rows)?;
    files.push(path);
    Ok(Outcome { files, checks: Vec::new() })
}

pub fn study_config(config: &RunConfig) -> StudyConfig {
    let (steps, end) = match config.time {
        TimeSpec::Uniform { steps, end } => (steps, end),
        TimeSpec::Nodes(_) => (1, config.end_time()),
    };
    let mesh_n = match config.mesh {
        MeshSource::Builtin(n) => n,
        MeshSource::Files { .. } => 1,
    };
    let base = match config.coupling {
        Coupling::Spatial => StudyConfig::spatial(config.rt, end, &config.levels),
        Coupling::Linear => StudyConfig::linear(config.rt, end, &config.levels, steps),
        Coupling::Temporal => StudyConfig::temporal(config.rt, end, mesh_n, &config.levels),
    };
    StudyConfig {
        forcing: config.forcing,
        recovery: config.recovery,
        constants: config.constants,
        ..base
    }
}

/// Levels are solved concurrently on a pool sized by [`thread_hint`]; the
/// result does not depend on the thread count.
pub fn run_study_parallel(problem: &LoadedProblem, study: &StudyConfig) -> Result<StudyResult> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_hint() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Io {
        path: PathBuf::from(THREADS_VAR),
        source: std::io::Error::other(e),
    })?;
    let p = problem.as_problem();
    let runs = pool.install(|| study.levels.par_iter().map(|&spec| run_level(p, study, spec)).collect::<Result<Vec<_>, _>>())?;
    Ok(finish_study(study, runs)?)
}

fn study(config: &RunConfig) -> Result<Outcome> {
    let problem = load_problem(&config.problem)?;
    let result = run_study_parallel(&problem, &study_config(config))?;
    let path = config.out.join("study.csv");
    report::write_study(&path, &result)?;
    Ok(Outcome {
        files: vec![path],
        checks: Vec::new(),
    })
}

fn oracle_check(config: &RunConfig) -> Result<Outcome> {
    let checks = checks::run_all();
    let path = config.out.join("oracle_check.csv");
    let rows = checks.iter().map(|c| {
        vec![
            c.name.clone(),
            fmt_f64(c.value),
            fmt_f64(c.tolerance),
            if c.passed() { "pass" } else { "fail" }.to_string(),
            c.error.clone().unwrap_or_default(),
        ]
    });
    report::write_csv(&path, &["check", "value", "tolerance", "status", "error"], rows)?;
    let failed = checks.iter().filter(|c| !c.passed()).count();
    if failed > 0 {
        return Err(CliError::Acceptance {
            failed,
            total: checks.len(),
        });
    }
    Ok(Outcome { files: vec![path], checks })
}

pub fn relative_to(base: &Path, p: &Path) -> PathBuf {
    p.strip_prefix(base).map(Path::to_path_buf).unwrap_or_else(|_| p.to_path_buf())
}
