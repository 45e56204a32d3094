//! Mesh files and trajectory directories.
//!
//! Node file: a header `V 2` followed by `V` lines `x y`. Element file: a
//! header `T 3` followed by `T` lines of three 0-based vertex indices. Lines
//! starting with `#` are comments.
//!
//! A trajectory directory holds `grid.csv` with columns `n,t,k` (`k = 0` at
//! node 0), the mesh as `mesh.node` / `mesh.ele`, and one `state_<n>.bin` per
//! node laid out little-endian as
//!
//! ```text
//!     b"MWST"  u32 version  u32 ℓ  u64 n  u64 n_disp  u64 n_stress
//!     f64 × n_disp    U
//!     f64 × n_stress  Σ
//!     f64 × n_disp    ∂U
//! ```

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use mixedwave_core::{Mesh, Point, TimeGrid, Trajectory};

use crate::error::{CliError, FormatError, Result};
use crate::report::fmt_f64;

pub const STATE_MAGIC: [u8; 4] = *b"MWST";
pub const STATE_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 * 3;

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> CliError {
    FormatError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
    .into()
}

fn parse_table<T: std::str::FromStr>(text: &str, path: &Path, tag: &str, width: usize) -> Result<Vec<Vec<T>>> {
    let mut lines = data_lines(text);
    let Some((hline, header)) = lines.next() else {
        return Err(parse_error(path, 1, format!("missing `{tag} {width}` header")));
    };
    let h: Vec<&str> = header.split_whitespace().collect();
    let count = match h.as_slice() {
        [c, w] if w.parse::<usize>().ok() == Some(width) => c.parse::<usize>().ok(),
        _ => None,
    }
    .ok_or_else(|| parse_error(path, hline, format!("expected header `<count> {width}`, got `{header}`")))?;
    let mut rows = Vec::with_capacity(count);
    for (line, text) in lines {
        let row = text
            .split_whitespace()
            .map(|s| s.parse::<T>())
            .collect::<std::result::Result<Vec<T>, _>>()
            .map_err(|_| parse_error(path, line, format!("malformed entry in `{text}`")))?;
        if row.len() != width {
            return Err(parse_error(path, line, format!("expected {width} entries, got {}", row.len())));
        }
        rows.push(row);
    }
    if rows.len() != count {
        return Err(FormatError::Layout {
            path: path.to_path_buf(),
            message: format!("header announces {count} rows, found {}", rows.len()),
        }
        .into());
    }
    Ok(rows)
}

pub fn parse_nodes(text: &str, path: &Path) -> Result<Vec<Point>> {
    Ok(parse_table::<f64>(text, path, "V", 2)?.into_iter().map(|r| [r[0], r[1]]).collect())
}

pub fn parse_elements(text: &str, path: &Path) -> Result<Vec<[usize; 3]>> {
    Ok(parse_table::<usize>(text, path, "T", 3)?.into_iter().map(|r| [r[0], r[1], r[2]]).collect())
}

pub fn read_mesh(nodes: &Path, elements: &Path) -> Result<Mesh> {
    let nt = fs::read_to_string(nodes).map_err(CliError::io(nodes))?;
    let et = fs::read_to_string(elements).map_err(CliError::io(elements))?;
    let vertices = parse_nodes(&nt, nodes)?;
    let cells = parse_elements(&et, elements)?;
    Mesh::new(vertices, cells).map_err(|e| {
        FormatError::Layout {
            path: elements.to_path_buf(),
            message: e.to_string(),
        }
        .into()
    })
}

pub fn render_nodes(mesh: &Mesh) -> String {
    let mut s = format!("{} 2\n", mesh.num_vertices());
    for v in mesh.vertices() {
        s.push_str(&format!("{} {}\n", fmt_f64(v[0]), fmt_f64(v[1])));
    }
    s
}

pub fn render_elements(mesh: &Mesh) -> String {
    let mut s = format!("{} 3\n", mesh.num_cells());
    for c in mesh.cells() {
        s.push_str(&format!("{} {} {}\n", c[0], c[1], c[2]));
    }
    s
}

pub fn write_mesh(mesh: &Mesh, nodes: &Path, elements: &Path) -> Result<()> {
    fs::write(nodes, render_nodes(mesh)).map_err(CliError::io(nodes))?;
    fs::write(elements, render_elements(mesh)).map_err(CliError::io(elements))
}

/// Coefficients of one node as stored in `state_<n>.bin`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateRecord {
    pub ell: u32,
    pub node: u64,
    pub u: Vec<f64>,
    pub sigma: Vec<f64>,
    pub dt_u: Vec<f64>,
}

impl StateRecord {
    pub fn encode(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(HEADER_LEN + 8 * (2 * self.u.len() + self.sigma.len()));
        b.extend_from_slice(&STATE_MAGIC);
        b.extend_from_slice(&STATE_VERSION.to_le_bytes());
        b.extend_from_slice(&self.ell.to_le_bytes());
        b.extend_from_slice(&self.node.to_le_bytes());
        b.extend_from_slice(&(self.u.len() as u64).to_le_bytes());
        b.extend_from_slice(&(self.sigma.len() as u64).to_le_bytes());
        for v in self.u.iter().chain(&self.sigma).chain(&self.dt_u) {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |message: String| -> CliError {
            FormatError::Layout {
                path: path.to_path_buf(),
                message,
            }
            .into()
        };
        if bytes.len() < HEADER_LEN || bytes[..4] != STATE_MAGIC {
            return Err(bad("not a state file".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let version = u32_at(4);
        if version != STATE_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let (ell, node, nd, ns) = (u32_at(8), u64_at(12), u64_at(20) as usize, u64_at(28) as usize);
        let expected = nd
            .checked_mul(2)
            .and_then(|v| v.checked_add(ns))
            .and_then(|v| v.checked_mul(8))
            .and_then(|v| v.checked_add(HEADER_LEN));
        if expected != Some(bytes.len()) {
            return Err(bad(format!("length {} does not match the header counts", bytes.len())));
        }
        let mut values = bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let mut take = |n: usize| values.by_ref().take(n).collect::<Vec<f64>>();
        let u = take(nd);
        let sigma = take(ns);
        let dt_u = take(nd);
        Ok(StateRecord { ell, node, u, sigma, dt_u })
    }
}

pub fn state_path(dir: &Path, n: usize) -> PathBuf {
    dir.join(format!("state_{n}.bin"))
}

pub fn write_trajectory(traj: &Trajectory, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let grid_path = dir.join("grid.csv");
    let mut w = csv::Writer::from_path(&grid_path).map_err(|e| csv_error(&grid_path, e))?;
    w.write_record(["n", "t", "k"]).map_err(|e| csv_error(&grid_path, e))?;
    for n in 0..traj.num_nodes() {
        let k = if n == 0 { 0.0 } else { traj.grid.k(n) };
        w.write_record([n.to_string(), fmt_f64(traj.grid.t(n)), fmt_f64(k)])
            .map_err(|e| csv_error(&grid_path, e))?;
    }
    w.flush().map_err(CliError::io(&grid_path))?;
    write_mesh(traj.space.mesh(), &dir.join("mesh.node"), &dir.join("mesh.ele"))?;
    let ell = traj.space.ell() as u32;
    for (n, s) in traj.states.iter().enumerate() {
        let rec = StateRecord {
            ell,
            node: n as u64,
            u: s.u.coeffs.clone(),
            sigma: s.sigma.coeffs.clone(),
            dt_u: s.dt_u.coeffs.clone(),
        };
        let path = state_path(dir, n);
        let mut f = fs::File::create(&path).map_err(CliError::io(&path))?;
        f.write_all(&rec.encode()).map_err(CliError::io(&path))?;
    }
    Ok(())
}

/// Grid and node records of a trajectory directory.
pub fn read_trajectory(dir: &Path) -> Result<(TimeGrid, Vec<StateRecord>)> {
    let grid_path = dir.join("grid.csv");
    let mut r = csv::Reader::from_path(&grid_path).map_err(|e| csv_error(&grid_path, e))?;
    let mut nodes = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row.map_err(|e| csv_error(&grid_path, e))?;
        let t = row
            .get(1)
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| parse_error(&grid_path, i + 2, "malformed time"))?;
        nodes.push(t);
    }
    let grid = TimeGrid::from_nodes(nodes)?;
    let states = (0..=grid.num_steps())
        .map(|n| {
            let path = state_path(dir, n);
            let bytes = fs::read(&path).map_err(CliError::io(&path))?;
            StateRecord::decode(&bytes, &path)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((grid, states))
}

pub fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => parse_error(path, 0, format!("{other:?}")),
    }
}
