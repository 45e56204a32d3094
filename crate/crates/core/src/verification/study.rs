use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::estimators::{self, Constants, ConstantsPolicy, EstimatorOptions, EstimatorReport, EstimatorSeries, RecoveryMode};
use crate::mesh::Mesh;
use crate::problem::{ForcingMode, Problem};
use crate::solver::{self, TimeGrid};
use crate::spaces::{MixedSpace, RtIndex};
use crate::verification::{true_error, TrueErrors};
use crate::{Error, Result};

/// One level of a study: a uniform mesh with `mesh_n` subdivisions per side and
/// `steps` uniform time steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelSpec {
    pub mesh_n: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub rt: RtIndex,
    pub end: f64,
    pub levels: Vec<LevelSpec>,
    pub forcing: ForcingMode,
    pub recovery: RecoveryMode,
    pub constants: ConstantsPolicy,
}

impl StudyConfig {
    /// Meshes `n` with `k = T / round(T n²)`, i.e. `k ≈ h²`, on the unit square.
    pub fn spatial(rt: RtIndex, end: f64, meshes: &[usize]) -> Self {
        let levels = meshes
            .iter()
            .map(|&n| LevelSpec {
                mesh_n: n,
                steps: ((end * (n * n) as f64).round() as usize).max(1),
            })
            .collect();
        Self::with_levels(rt, end, levels)
    }

    /// Meshes `n` with `k ∝ h`: `steps = steps₀ n / n₀`.
    pub fn linear(rt: RtIndex, end: f64, meshes: &[usize], first_steps: usize) -> Self {
        let n0 = meshes.first().copied().unwrap_or(1);
        let levels = meshes
            .iter()
            .map(|&n| LevelSpec {
                mesh_n: n,
                steps: first_steps * n / n0,
            })
            .collect();
        Self::with_levels(rt, end, levels)
    }

    /// One fixed mesh and a sequence of step counts.
    pub fn temporal(rt: RtIndex, end: f64, mesh_n: usize, steps: &[usize]) -> Self {
        let levels = steps.iter().map(|&s| LevelSpec { mesh_n, steps: s }).collect();
        Self::with_levels(rt, end, levels)
    }

    pub fn with_levels(rt: RtIndex, end: f64, levels: Vec<LevelSpec>) -> Self {
        StudyConfig {
            rt,
            end,
            levels,
            forcing: ForcingMode::Pointwise,
            recovery: RecoveryMode::default(),
            constants: ConstantsPolicy::Unit,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.levels.len() < 3 {
            return Err(Error::InvalidStudy(format!("a study needs at least 3 levels, got {}", self.levels.len())));
        }
        for w in self.levels.windows(2) {
            let (a, b) = (w[0], w[1]);
            let finer_mesh = b.mesh_n >= a.mesh_n && b.mesh_n % a.mesh_n == 0;
            let finer_time = b.steps >= a.steps;
            if !(finer_mesh && finer_time) || a == b {
                return Err(Error::InvalidStudy(format!(
                    "levels are not nested: {}x{} then {}x{}",
                    a.mesh_n, a.steps, b.mesh_n, b.steps
                )));
            }
        }
        if self.levels.iter().any(|l| l.mesh_n == 0 || l.steps == 0) || !(self.end > 0.0) {
            return Err(Error::InvalidStudy("mesh and step counts must be positive and T > 0".into()));
        }
        Ok(())
    }
}

/// Everything computed on one level before constants are applied.
#[derive(Debug, Clone)]
pub struct LevelRun {
    pub spec: LevelSpec,
    pub h: f64,
    pub k: f64,
    pub errors: TrueErrors,
    pub series: EstimatorSeries,
}

/// Solve, measure errors and evaluate estimators on one level.
pub fn run_level(problem: &dyn Problem, config: &StudyConfig, spec: LevelSpec) -> Result<LevelRun> {
    let exact = problem
        .exact()
        .ok_or_else(|| Error::InvalidStudy("studies need a registered exact solution".into()))?;
    let mesh = Arc::new(Mesh::unit_square(spec.mesh_n));
    let h = mesh.max_h();
    let space = Arc::new(MixedSpace::new(mesh, config.rt));
    let grid = TimeGrid::uniform(config.end, spec.steps)?;
    let traj = solver::run(problem, space, &grid, config.forcing)?;
    let errors = true_error(&traj, problem, exact);
    let options = EstimatorOptions {
        recovery: config.recovery,
        ..Default::default()
    };
    let series = estimators::estimate_trajectory(&traj, problem, &options)?;
    Ok(LevelRun {
        spec,
        h,
        k: grid.max_step(),
        errors,
        series,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyLevel {
    pub spec: LevelSpec,
    pub h: f64,
    pub k: f64,
    /// `max_m ‖Uᵐ - u(t_m)‖`
    pub err_u: f64,
    /// `max_m ‖Σᵐ - σ(t_m)‖_{A⁻¹}`
    pub err_sigma: f64,
    pub bound_u: f64,
    pub bound_sigma: f64,
    pub eff_u: f64,
    pub eff_sigma: f64,
    /// Observed rates against the previous level; `None` on the first level.
    pub rate_u: Option<f64>,
    pub rate_sigma: Option<f64>,
    pub report: EstimatorReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub levels: Vec<StudyLevel>,
    pub constants: Constants,
}

impl StudyResult {
    /// Observed exponent of a per-level quantity against the refined parameter.
    pub fn rates_of(&self, value: impl Fn(&StudyLevel) -> f64) -> Vec<f64> {
        self.levels.windows(2).map(|w| observed_rate(&w[0], &w[1], value(&w[0]), value(&w[1]))).collect()
    }
}

/// `log(a/b) / log(s_a/s_b)` with `s = h` when the mesh changes and `s = k`
/// otherwise.
fn observed_rate(a: &StudyLevel, b: &StudyLevel, va: f64, vb: f64) -> f64 {
    let ratio = if a.spec.mesh_n != b.spec.mesh_n { a.h / b.h } else { a.k / b.k };
    (va / vb).ln() / ratio.ln()
}

/// Apply the constants policy (calibrated on the first level) and compute
/// bounds, effectivities and rates.
pub fn finish_study(config: &StudyConfig, runs: Vec<LevelRun>) -> Result<StudyResult> {
    config.validate()?;
    if runs.len() != config.levels.len() {
        return Err(Error::MissingSeries(format!("{} of {} levels computed", runs.len(), config.levels.len())));
    }
    let constants = match config.constants {
        ConstantsPolicy::Unit => Constants::unit(),
        ConstantsPolicy::Calibrated => estimators::calibrate(&runs[0].series, &runs[0].errors),
        ConstantsPolicy::Fixed(c) => c,
    };
    let mut levels: Vec<StudyLevel> = Vec::with_capacity(runs.len());
    for run in runs {
        let report = estimators::compose_report(run.series, constants, Some(run.errors))?;
        let errors = report.errors.as_ref().expect("errors were supplied");
        let (err_u, err_sigma) = (errors.max_u(), errors.max_sigma());
        let (bound_u, bound_sigma) = (report.max_bound_u(), report.max_bound_sigma());
        let mut level = StudyLevel {
            spec: run.spec,
            h: run.h,
            k: run.k,
            err_u,
            err_sigma,
            bound_u,
            bound_sigma,
            eff_u: bound_u / err_u,
            eff_sigma: bound_sigma / err_sigma,
            rate_u: None,
            rate_sigma: None,
            report,
        };
        if let Some(prev) = levels.last() {
            level.rate_u = Some(observed_rate(prev, &level, prev.err_u, err_u));
            level.rate_sigma = Some(observed_rate(prev, &level, prev.err_sigma, err_sigma));
        }
        levels.push(level);
    }
    Ok(StudyResult { levels, constants })
}

/// Run every level in order and finish the study.
pub fn run_study(problem: &dyn Problem, config: &StudyConfig) -> Result<StudyResult> {
    config.validate()?;
    let runs = config
        .levels
        .iter()
        .map(|&spec| run_level(problem, config, spec))
        .collect::<Result<Vec<_>>>()?;
    finish_study(config, runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verification::ManufacturedProblem;

    #[test]
    fn too_few_or_unnested_levels_are_rejected() {
        let p = ManufacturedProblem::standing_wave();
        let two = StudyConfig::spatial(RtIndex::Zero, 0.5, &[2, 4]);
        assert!(matches!(run_study(&p, &two), Err(Error::InvalidStudy(_))));
        let bad = StudyConfig::temporal(RtIndex::Zero, 0.5, 2, &[4, 2, 8]);
        assert!(matches!(run_study(&p, &bad), Err(Error::InvalidStudy(_))));
    }

    #[test]
    fn coupling_presets() {
        let s = StudyConfig::spatial(RtIndex::Zero, 0.5, &[8, 16, 32]);
        assert_eq!(s.levels.iter().map(|l| l.steps).collect::<Vec<_>>(), [32, 128, 512]);
        let l = StudyConfig::linear(RtIndex::Zero, 0.5, &[4, 8, 16], 5);
        assert_eq!(l.levels.iter().map(|l| l.steps).collect::<Vec<_>>(), [5, 10, 20]);
    }

    #[test]
    fn small_study_has_finite_rates() {
        let p = ManufacturedProblem::standing_wave();
        let cfg = StudyConfig::linear(RtIndex::Zero, 0.25, &[2, 4, 8], 2);
        let r = run_study(&p, &cfg).unwrap();
        assert_eq!(r.levels.len(), 3);
        assert!(r.levels[0].rate_u.is_none());
        for l in &r.levels[1..] {
            assert!(l.rate_u.unwrap().is_finite() && l.rate_sigma.unwrap().is_finite());
        }
    }
}
