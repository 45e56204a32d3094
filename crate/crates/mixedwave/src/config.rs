//! Plain-text `key = value` run configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mixedwave_core::estimators::{ConstantsPolicy, RecoveryMode};
use mixedwave_core::verification::ManufacturedKind;
use mixedwave_core::{ForcingMode, RtIndex};

use crate::error::ConfigError;
use crate::expr::Expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Estimate,
    Study,
    OracleCheck,
}

impl Command {
    pub const NAMES: [&'static str; 4] = ["solve", "estimate", "study", "oracle-check"];

    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Estimate => "estimate",
            Command::Study => "study",
            Command::OracleCheck => "oracle-check",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        [Command::Solve, Command::Estimate, Command::Study, Command::OracleCheck]
            .into_iter()
            .find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CustomSpec {
    pub f: Expr,
    pub u0: Expr,
    pub u1: Expr,
    pub a11: Expr,
    pub a12: Expr,
    pub a22: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Manufactured(ManufacturedKind),
    Custom(Box<CustomSpec>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    /// Unit square with `n` subdivisions per side.
    Builtin(usize),
    Files { nodes: PathBuf, elements: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TimeSpec {
    Uniform { steps: usize, end: f64 },
    Nodes(Vec<f64>),
}

/// How the levels of a study are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// Mesh sizes with `k ≈ h²`.
    Spatial,
    /// Mesh sizes with `k ∝ h`, starting from `steps`.
    Linear,
    /// Step counts on the fixed mesh `mesh_n`.
    Temporal,
}

impl Coupling {
    fn name(self) -> &'static str {
        match self {
            Coupling::Spatial => "spatial",
            Coupling::Linear => "linear",
            Coupling::Temporal => "temporal",
        }
    }
}

/// Nodes at which per-cell estimator maps are written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CellMaps {
    None,
    Last,
    Nodes(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub problem: ProblemSpec,
    pub mesh: MeshSource,
    pub rt: RtIndex,
    pub time: TimeSpec,
    pub forcing: ForcingMode,
    pub recovery: RecoveryMode,
    pub constants: ConstantsPolicy,
    pub enrich: usize,
    pub unprojected_acceleration: bool,
    pub out: PathBuf,
    pub coupling: Coupling,
    pub levels: Vec<usize>,
    pub cell_maps: CellMaps,
    pub vtk: bool,
}

/// Every accepted key, in the order `resolved_config.txt` lists them.
pub const KEYS: [&str; 25] = [
    "command",
    "problem",
    "mesh_n",
    "mesh_nodes",
    "mesh_elements",
    "rt_index",
    "steps",
    "T",
    "time_nodes",
    "forcing",
    "recovery",
    "constants",
    "enrich",
    "unprojected_acceleration",
    "out",
    "study_coupling",
    "study_levels",
    "cell_maps",
    "vtk",
    "custom_f",
    "custom_u0",
    "custom_u1",
    "custom_a11",
    "custom_a12",
    "custom_a22",
];

/// Raw `key -> value` pairs from one source.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawConfig(pub BTreeMap<String, String>);

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: line.to_string(),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: line.to_string(),
                });
            }
            check_key(key)?;
            map.insert(key.to_string(), value.trim().to_string());
        }
        Ok(RawConfig(map))
    }

    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|_| ConfigError::MissingFile {
            key: "config".into(),
            path: path.to_path_buf(),
        })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), ConfigError> {
        check_key(key)?;
        self.0.insert(key.to_string(), value.into());
        Ok(())
    }

    /// Layer `overrides` on top of `self`. Choosing a mesh source in the
    /// overrides discards the other source from the base.
    pub fn merged(mut self, overrides: &RawConfig) -> Self {
        let o = &overrides.0;
        if o.contains_key("mesh_n") {
            self.0.remove("mesh_nodes");
            self.0.remove("mesh_elements");
        }
        if o.contains_key("mesh_nodes") || o.contains_key("mesh_elements") {
            self.0.remove("mesh_n");
        }
        if o.contains_key("steps") || o.contains_key("T") {
            self.0.remove("time_nodes");
        }
        for (k, v) in o {
            self.0.insert(k.clone(), v.clone());
        }
        self
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }
}

fn check_key(key: &str) -> Result<(), ConfigError> {
    if KEYS.contains(&key) {
        Ok(())
    } else {
        Err(ConfigError::UnknownKey { key: key.to_string() })
    }
}

fn mismatch(key: &str, expected: &'static str, value: &str) -> ConfigError {
    ConfigError::TypeMismatch {
        key: key.to_string(),
        expected,
        value: value.to_string(),
    }
}

fn unknown(key: &str, value: &str, allowed: &[&str]) -> ConfigError {
    ConfigError::UnknownValue {
        key: key.to_string(),
        value: value.to_string(),
        allowed: allowed.join(","),
    }
}

fn positive_int(key: &str, v: &str) -> Result<usize, ConfigError> {
    match v.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(mismatch(key, "a positive integer", v)),
    }
}

fn int_list(key: &str, v: &str) -> Result<Vec<usize>, ConfigError> {
    v.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| mismatch(key, "a list of non-negative integers", v)))
        .collect()
}

fn boolean(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(mismatch(key, "a boolean", v)),
    }
}

fn expression(key: &str, v: &str) -> Result<Expr, ConfigError> {
    Expr::parse(v).map_err(|source| ConfigError::Expression { key: key.to_string(), source })
}

impl RunConfig {
    /// Validate and fill defaults. `base_dir` resolves relative mesh paths.
    pub fn resolve(raw: &RawConfig, base_dir: &Path) -> Result<Self, ConfigError> {
        let command = match raw.get("command") {
            None => {
                return Err(ConfigError::MissingRequired {
                    key: "command".into(),
                    reason: "one of solve, estimate, study, oracle-check".into(),
                })
            }
            Some(v) => Command::from_name(v).ok_or_else(|| unknown("command", v, &Command::NAMES))?,
        };

        let problem = match raw.get("problem").unwrap_or("standing-wave") {
            "custom" => {
                let need = |key: &str| -> Result<Expr, ConfigError> {
                    let v = raw.get(key).ok_or_else(|| ConfigError::MissingRequired {
                        key: key.to_string(),
                        reason: "custom problems need f, u0 and u1".into(),
                    })?;
                    expression(key, v)
                };
                let coefficient = |key: &str, default: &str| -> Result<Expr, ConfigError> {
                    let e = expression(key, raw.get(key).unwrap_or(default))?;
                    if e.depends_on_t() {
                        return Err(mismatch(key, "an expression in x and y only", e.text()));
                    }
                    Ok(e)
                };
                ProblemSpec::Custom(Box::new(CustomSpec {
                    f: need("custom_f")?,
                    u0: need("custom_u0")?,
                    u1: need("custom_u1")?,
                    a11: coefficient("custom_a11", "1")?,
                    a12: coefficient("custom_a12", "0")?,
                    a22: coefficient("custom_a22", "1")?,
                }))
            }
            name => match ManufacturedKind::from_name(name) {
                Some(kind) => ProblemSpec::Manufactured(kind),
                None => {
                    let mut allowed: Vec<&str> = ManufacturedKind::all().iter().map(|k| k.name()).collect();
                    allowed.push("custom");
                    return Err(unknown("problem", name, &allowed));
                }
            },
        };

        let mesh = match (raw.get("mesh_nodes"), raw.get("mesh_elements")) {
            (Some(n), Some(e)) => {
                let file = |key: &str, p: &str| {
                    let path = base_dir.join(p);
                    if path.is_file() {
                        Ok(path)
                    } else {
                        Err(ConfigError::MissingFile { key: key.to_string(), path })
                    }
                };
                MeshSource::Files {
                    nodes: file("mesh_nodes", n)?,
                    elements: file("mesh_elements", e)?,
                }
            }
            (Some(_), None) => {
                return Err(ConfigError::MissingRequired {
                    key: "mesh_elements".into(),
                    reason: "a node file needs an element file".into(),
                })
            }
            (None, Some(_)) => {
                return Err(ConfigError::MissingRequired {
                    key: "mesh_nodes".into(),
                    reason: "an element file needs a node file".into(),
                })
            }
            (None, None) => MeshSource::Builtin(raw.get("mesh_n").map_or(Ok(8), |v| positive_int("mesh_n", v))?),
        };

        let rt = match raw.get("rt_index").unwrap_or("0") {
            "0" => RtIndex::Zero,
            "1" => RtIndex::One,
            v if v.parse::<usize>().is_ok() => return Err(unknown("rt_index", v, &["0", "1"])),
            v => return Err(mismatch("rt_index", "an integer", v)),
        };

        let time = match raw.get("time_nodes") {
            Some(v) => {
                let nodes = v
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<f64>().map_err(|_| mismatch("time_nodes", "a list of numbers", v)))
                    .collect::<Result<Vec<_>, _>>()?;
                let increasing = nodes.windows(2).all(|w| w[1] > w[0]);
                if nodes.len() < 2 || nodes[0] != 0.0 || !increasing {
                    return Err(mismatch("time_nodes", "an increasing list starting at 0 with at least two nodes", v));
                }
                TimeSpec::Nodes(nodes)
            }
            None => {
                let steps = raw.get("steps").map_or(Ok(20), |v| positive_int("steps", v))?;
                let end = match raw.get("T") {
                    None => 0.5,
                    Some(v) => match v.parse::<f64>() {
                        Ok(t) if t > 0.0 && t.is_finite() => t,
                        _ => return Err(mismatch("T", "a positive number", v)),
                    },
                };
                TimeSpec::Uniform { steps, end }
            }
        };

        let forcing = match raw.get("forcing").unwrap_or("pointwise") {
            "pointwise" => ForcingMode::Pointwise,
            "average" => ForcingMode::IntervalAverage,
            v => return Err(unknown("forcing", v, &["pointwise", "average"])),
        };
        let recovery = match raw.get("recovery") {
            None => RecoveryMode::default(),
            Some(v) => RecoveryMode::from_name(v).ok_or_else(|| unknown("recovery", v, &["literal", "cg-recovery"]))?,
        };
        let constants = match raw.get("constants") {
            None => ConstantsPolicy::Unit,
            Some(v) => ConstantsPolicy::from_name(v).ok_or_else(|| unknown("constants", v, &["unit", "calibrated"]))?,
        };
        let enrich = match raw.get("enrich").unwrap_or("1") {
            "1" => 1,
            "2" => 2,
            v if v.parse::<usize>().is_ok() => return Err(unknown("enrich", v, &["1", "2"])),
            v => return Err(mismatch("enrich", "an integer", v)),
        };
        let unprojected_acceleration = raw
            .get("unprojected_acceleration")
            .map_or(Ok(false), |v| boolean("unprojected_acceleration", v))?;
        let out = PathBuf::from(raw.get("out").unwrap_or("mixedwave-out"));

        let coupling = match raw.get("study_coupling").unwrap_or("spatial") {
            "spatial" => Coupling::Spatial,
            "linear" => Coupling::Linear,
            "temporal" => Coupling::Temporal,
            v => return Err(unknown("study_coupling", v, &["spatial", "linear", "temporal"])),
        };
        let levels = match raw.get("study_levels") {
            Some(v) => int_list("study_levels", v)?,
            None if coupling == Coupling::Temporal => vec![20, 40, 80],
            None => vec![8, 16, 32],
        };
        let cell_maps = match raw.get("cell_maps").unwrap_or("last") {
            "last" => CellMaps::Last,
            "none" => CellMaps::None,
            v => CellMaps::Nodes(int_list("cell_maps", v)?),
        };
        let vtk = raw.get("vtk").map_or(Ok(false), |v| boolean("vtk", v))?;

        let config = RunConfig {
            command,
            problem,
            mesh,
            rt,
            time,
            forcing,
            recovery,
            constants,
            enrich,
            unprojected_acceleration,
            out,
            coupling,
            levels,
            cell_maps,
            vtk,
        };
        config.validate_command()?;
        Ok(config)
    }

    fn validate_command(&self) -> Result<(), ConfigError> {
        let custom = matches!(self.problem, ProblemSpec::Custom(_));
        if custom && self.constants == ConstantsPolicy::Calibrated && matches!(self.command, Command::Estimate | Command::Study) {
            return Err(ConfigError::MissingRequired {
                key: "problem".into(),
                reason: "calibrated constants need a problem with an exact solution".into(),
            });
        }
        if self.command != Command::Study {
            return Ok(());
        }
        if self.levels.len() < 3 {
            return Err(ConfigError::MissingRequired {
                key: "study_levels".into(),
                reason: format!("a study needs at least 3 levels, got {}", self.levels.len()),
            });
        }
        if self.levels.contains(&0) {
            return Err(mismatch("study_levels", "positive level sizes", &join(&self.levels)));
        }
        if custom {
            return Err(ConfigError::MissingRequired {
                key: "problem".into(),
                reason: "studies need a problem with an exact solution".into(),
            });
        }
        if !matches!(self.mesh, MeshSource::Builtin(_)) {
            return Err(ConfigError::MissingRequired {
                key: "mesh_n".into(),
                reason: "studies run on the built-in unit-square meshes".into(),
            });
        }
        if !matches!(self.time, TimeSpec::Uniform { .. }) {
            return Err(ConfigError::MissingRequired {
                key: "steps".into(),
                reason: "studies use uniform time grids".into(),
            });
        }
        Ok(())
    }

    pub fn end_time(&self) -> f64 {
        match &self.time {
            TimeSpec::Uniform { end, .. } => *end,
            TimeSpec::Nodes(n) => *n.last().expect("validated node list"),
        }
    }

    /// The fully resolved configuration as `key = value` lines that parse back
    /// to the same configuration.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("command", self.command.name().into());
        match &self.problem {
            ProblemSpec::Manufactured(k) => line("problem", k.name().into()),
            ProblemSpec::Custom(c) => {
                line("problem", "custom".into());
                line("custom_f", c.f.text().into());
                line("custom_u0", c.u0.text().into());
                line("custom_u1", c.u1.text().into());
                line("custom_a11", c.a11.text().into());
                line("custom_a12", c.a12.text().into());
                line("custom_a22", c.a22.text().into());
            }
        }
        match &self.mesh {
            MeshSource::Builtin(n) => line("mesh_n", n.to_string()),
            MeshSource::Files { nodes, elements } => {
                line("mesh_nodes", nodes.display().to_string());
                line("mesh_elements", elements.display().to_string());
            }
        }
        line("rt_index", self.rt.value().to_string());
        match &self.time {
            TimeSpec::Uniform { steps, end } => {
                line("steps", steps.to_string());
                line("T", format!("{end:?}"));
            }
            TimeSpec::Nodes(n) => line("time_nodes", n.iter().map(|t| format!("{t:?}")).collect::<Vec<_>>().join(" ")),
        }
        line(
            "forcing",
            match self.forcing {
                ForcingMode::Pointwise => "pointwise",
                ForcingMode::IntervalAverage => "average",
            }
            .into(),
        );
        line("recovery", self.recovery.name().into());
        line("constants", self.constants.name().into());
        line("enrich", self.enrich.to_string());
        line("unprojected_acceleration", self.unprojected_acceleration.to_string());
        line("out", self.out.display().to_string());
        line("study_coupling", self.coupling.name().into());
        line("study_levels", join(&self.levels));
        line(
            "cell_maps",
            match &self.cell_maps {
                CellMaps::None => "none".into(),
                CellMaps::Last => "last".into(),
                CellMaps::Nodes(n) => join(n),
            },
        );
        line("vtk", self.vtk.to_string());
        out
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::resolve(&RawConfig::parse(text)?, Path::new("."))
    }

    #[test]
    fn documented_defaults() {
        let c = resolve("command = solve\nproblem = standing-wave\n").unwrap();
        assert_eq!(c.mesh, MeshSource::Builtin(8));
        assert_eq!(c.time, TimeSpec::Uniform { steps: 20, end: 0.5 });
        assert_eq!(c.rt, RtIndex::Zero);
        assert_eq!(c.forcing, ForcingMode::Pointwise);
        assert_eq!(c.enrich, 1);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let c = resolve("# header\n\n  command = estimate  # not a comment\n").unwrap_err();
        assert_eq!(c.kind(), "UnknownValue");
        let c = resolve("# header\n\n  command =   estimate\n").unwrap();
        assert_eq!(c.command, Command::Estimate);
    }

    #[test]
    fn errors_name_the_key() {
        let e = resolve("command = solve\nrt_index = 2\n").unwrap_err();
        assert!(matches!(&e, ConfigError::UnknownValue { key, allowed, .. } if key == "rt_index" && allowed == "0,1"), "{e}");
        assert!(e.to_string().contains("{0,1}"));
        let e = resolve("command = solve\nmesh_size = 3\n").unwrap_err();
        assert!(matches!(e, ConfigError::UnknownKey { key } if key == "mesh_size"));
        let e = resolve("command = solve\nsteps = many\n").unwrap_err();
        assert!(matches!(e, ConfigError::TypeMismatch { key, .. } if key == "steps"));
        let e = resolve("problem = forced\n").unwrap_err();
        assert!(matches!(e, ConfigError::MissingRequired { key, .. } if key == "command"));
        let e = resolve("command = solve\nT = -1\n").unwrap_err();
        assert!(matches!(e, ConfigError::TypeMismatch { key, .. } if key == "T"));
        let e = resolve("command = solve\njust words\n").unwrap_err();
        assert!(matches!(e, ConfigError::Syntax { line: 2, .. }));
    }

    #[test]
    fn flags_override_the_file() {
        let file = RawConfig::parse("command = solve\nmesh_n = 8\n").unwrap();
        let mut flags = RawConfig::default();
        flags.set("mesh_n", "16").unwrap();
        let c = RunConfig::resolve(&file.merged(&flags), Path::new(".")).unwrap();
        assert_eq!(c.mesh, MeshSource::Builtin(16));
    }

    #[test]
    fn mesh_flag_replaces_mesh_files() {
        let file = RawConfig::parse("command = solve\nmesh_nodes = a.node\nmesh_elements = a.ele\n").unwrap();
        let mut flags = RawConfig::default();
        flags.set("mesh_n", "4").unwrap();
        let c = RunConfig::resolve(&file.clone().merged(&flags), Path::new(".")).unwrap();
        assert_eq!(c.mesh, MeshSource::Builtin(4));
        let e = RunConfig::resolve(&file, Path::new("/nonexistent")).unwrap_err();
        assert!(matches!(e, ConfigError::MissingFile { key, .. } if key == "mesh_nodes"));
    }

    #[test]
    fn study_needs_three_levels() {
        let e = resolve("command = study\nstudy_levels = 8\n").unwrap_err();
        assert!(matches!(e, ConfigError::MissingRequired { key, .. } if key == "study_levels"));
        assert!(resolve("command = study\nstudy_levels = 4, 8, 16\n").is_ok());
        let e = resolve("command = study\nproblem = custom\ncustom_f = 0\ncustom_u0 = 0\ncustom_u1 = 0\n").unwrap_err();
        assert!(matches!(e, ConfigError::MissingRequired { key, .. } if key == "problem"));
    }

    #[test]
    fn custom_problem_needs_its_strings() {
        let e = resolve("command = solve\nproblem = custom\ncustom_f = 0\n").unwrap_err();
        assert!(matches!(e, ConfigError::MissingRequired { key, .. } if key == "custom_u0"));
        let e = resolve("command = solve\nproblem = custom\ncustom_f = 0\ncustom_u0 = sin(\ncustom_u1 = 0\n").unwrap_err();
        assert!(matches!(e, ConfigError::Expression { key, .. } if key == "custom_u0"));
        let e = resolve("command = solve\nproblem = custom\ncustom_f = 0\ncustom_u0 = 0\ncustom_u1 = 0\ncustom_a11 = 1 + t\n").unwrap_err();
        assert!(matches!(e, ConfigError::TypeMismatch { key, .. } if key == "custom_a11"));
    }

    #[test]
    fn rendered_config_parses_back() {
        let texts = [
            "command = estimate\nproblem = forced\nrt_index = 1\ntime_nodes = 0 0.1 0.25\nforcing = average\nrecovery = literal\nconstants = calibrated\nenrich = 2\ncell_maps = 0 2\nvtk = yes\n",
            "command = solve\nproblem = custom\ncustom_f = cos(20*t) * x\ncustom_u0 = sin(pi*x)*sin(pi*y)\ncustom_u1 = 0\ncustom_a22 = 1 + x/2\nT = 0.3\n",
            "command = study\nstudy_coupling = temporal\nmesh_n = 4\n",
        ];
        for t in texts {
            let c = resolve(t).unwrap();
            let again = resolve(&c.render()).unwrap();
            assert_eq!(c, again);
            assert_eq!(c.render(), again.render());
        }
    }
}
