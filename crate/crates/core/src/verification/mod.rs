//! Manufactured solutions, true errors, dense oracles and convergence studies.

pub mod ad;
mod errors;
mod manufactured;
mod oracle;
mod study;

pub use errors::{alpha_stress_norm, disp_error, stress_error, true_error, TrueErrors};
pub use manufactured::{strong_form_defect, ManufacturedCoefficient, ManufacturedKind, ManufacturedProblem};
pub use oracle::{assemble_dense, dense_trajectory, four_cell_mesh, oracle_small_instance, relative_max_difference, DenseSystem, OracleReport};
pub use study::{finish_study, run_level, run_study, LevelRun, LevelSpec, StudyConfig, StudyLevel, StudyResult};
