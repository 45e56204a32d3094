//! Command-line flags and their translation into configuration overrides.

use std::path::{Path, PathBuf};

use clap::Parser;

use crate::config::{RawConfig, RunConfig};
use crate::error::{ConfigError, Result};

#[derive(Debug, Clone, Parser)]
#[command(name = "mixedwave", version, about = "Mixed finite element wave solver with a posteriori error estimators")]
pub struct Cli {
    /// solve | estimate | study | oracle-check
    #[arg(value_name = "COMMAND", conflicts_with = "command_flag")]
    pub command: Option<String>,
    /// Same as the positional command.
    #[arg(long = "command", value_name = "COMMAND")]
    pub command_flag: Option<String>,
    /// Plain-text `key = value` file; flags override its values.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<String>,
    /// standing-wave | variable-coefficient | full-coefficient | forced | zero | custom
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long = "mesh-n", value_name = "INT", conflicts_with = "mesh_files")]
    pub mesh_n: Option<String>,
    #[arg(long = "mesh-files", num_args = 2, value_names = ["NODE", "ELE"])]
    pub mesh_files: Option<Vec<String>>,
    #[arg(long = "rt-index", value_name = "{0,1}")]
    pub rt_index: Option<String>,
    #[arg(long, value_name = "INT")]
    pub steps: Option<String>,
    #[arg(long = "T", value_name = "FLOAT")]
    pub end: Option<String>,
    #[arg(long, value_name = "{pointwise,average}")]
    pub forcing: Option<String>,
    #[arg(long, value_name = "{literal,cg-recovery}")]
    pub recovery: Option<String>,
    #[arg(long, value_name = "{unit,calibrated}")]
    pub constants: Option<String>,
    #[arg(long, value_name = "{1,2}")]
    pub enrich: Option<String>,
    /// Write legacy VTK cell data next to the CSV reports.
    #[arg(long)]
    pub vtk: bool,
    /// Any other configuration key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl Cli {
    /// Flag values as a configuration layer.
    pub fn overrides(&self) -> Result<RawConfig, ConfigError> {
        let mut raw = RawConfig::default();
        for entry in &self.set {
            let Some((k, v)) = entry.split_once('=') else {
                return Err(ConfigError::Syntax { line: 0, text: entry.clone() });
            };
            raw.set(k.trim(), v.trim())?;
        }
        let simple = [
            ("command", self.command.as_ref().or(self.command_flag.as_ref())),
            ("out", self.out.as_ref()),
            ("problem", self.problem.as_ref()),
            ("mesh_n", self.mesh_n.as_ref()),
            ("rt_index", self.rt_index.as_ref()),
            ("steps", self.steps.as_ref()),
            ("T", self.end.as_ref()),
            ("forcing", self.forcing.as_ref()),
            ("recovery", self.recovery.as_ref()),
            ("constants", self.constants.as_ref()),
            ("enrich", self.enrich.as_ref()),
        ];
        for (key, value) in simple {
            if let Some(v) = value {
                raw.set(key, v.clone())?;
            }
        }
        if let Some(files) = &self.mesh_files {
            raw.set("mesh_nodes", files[0].clone())?;
            raw.set("mesh_elements", files[1].clone())?;
        }
        if self.vtk {
            raw.set("vtk", "true")?;
        }
        Ok(raw)
    }

    /// Read the config file (if any), rebase its relative paths on the file's
    /// directory, apply the flag overrides and resolve.
    pub fn resolve(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(path) => {
                let mut raw = RawConfig::read(path)?;
                let dir = path.parent().unwrap_or(Path::new(""));
                for key in ["mesh_nodes", "mesh_elements"] {
                    if let Some(v) = raw.0.get(key) {
                        let p = Path::new(v);
                        if p.is_relative() && !v.is_empty() {
                            let rebased = dir.join(p).display().to_string();
                            raw.0.insert(key.to_string(), rebased);
                        }
                    }
                }
                raw
            }
            None => RawConfig::default(),
        };
        Ok(RunConfig::resolve(&base.merged(&self.overrides()?), Path::new(""))?)
    }
}
