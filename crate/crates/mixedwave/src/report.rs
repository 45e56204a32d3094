//! CSV reports and legacy-VTK cell data.

use std::fs;
use std::path::Path;

use mixedwave_core::estimators::{EstimatorReport, SpatialEstimate};
use mixedwave_core::verification::StudyResult;
use mixedwave_core::{DispField, MixedSpace};

use crate::error::{CliError, Result};
use crate::formats::csv_error;

/// 17 significant digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(CliError::io(path))
}

pub const STUDY_HEADER: [&str; 11] = [
    "level", "h", "k", "err_u", "err_sigma", "bound_u", "bound_sigma", "eff_u", "eff_sigma", "rate_u", "rate_sigma",
];

pub fn write_study(path: &Path, study: &StudyResult) -> Result<()> {
    let rows = study.levels.iter().enumerate().map(|(i, l)| {
        vec![
            i.to_string(),
            fmt_f64(l.h),
            fmt_f64(l.k),
            fmt_f64(l.err_u),
            fmt_f64(l.err_sigma),
            fmt_f64(l.bound_u),
            fmt_f64(l.bound_sigma),
            fmt_f64(l.eff_u),
            fmt_f64(l.eff_sigma),
            fmt_opt(l.rate_u),
            fmt_opt(l.rate_sigma),
        ]
    });
    write_csv(path, &STUDY_HEADER, rows)
}

pub const ESTIMATOR_HEADER: [&str; 31] = [
    "n",
    "t",
    "k",
    "e2",
    "e3",
    "e6",
    "e7",
    "e8",
    "sum_k_e3",
    "sum_k_e8",
    "e11",
    "e12",
    "e13",
    "e14",
    "e21",
    "e22",
    "e23",
    "e24",
    "e23_full",
    "residual_u",
    "residual_sigma",
    "recovery",
    "jump",
    "curl",
    "recovery_other",
    "bound_u",
    "bound_sigma",
    "err_u",
    "err_sigma",
    "eff_u",
    "eff_sigma",
];

/// One row per time node.
pub fn write_estimator_nodes(path: &Path, report: &EstimatorReport) -> Result<()> {
    let s = &report.series;
    let tm = &s.temporal;
    let rows = (0..s.num_nodes()).map(|n| {
        let k = if n == 0 { 0.0 } else { s.grid.k(n) };
        let tot = s.totals[n];
        let (err_u, err_s) = match &report.errors {
            Some(e) => (Some(e.u[n]), Some(e.sigma[n])),
            None => (None, None),
        };
        let eff = |b: f64, e: Option<f64>| e.filter(|e| *e > 0.0).map(|e| b / e);
        let mut row = vec![n.to_string()];
        row.extend(
            [
                s.grid.t(n),
                k,
                s.e2[n],
                s.e3[n],
                s.e6[n],
                s.e7()[n],
                s.e8[n],
                s.sum_k_e3[n],
                s.sum_k_e8[n],
                tm.e11[n],
                tm.e12[n],
                tm.e13[n],
                tm.e14[n],
                tm.e21[n],
                tm.e22[n],
                tm.e23[n],
                tm.e24[n],
                tm.e23_full[n],
                tot.residual_u,
                tot.residual_sigma,
                tot.recovery,
                tot.jump,
                tot.curl,
                tot.recovery_other,
                report.bound_u[n],
                report.bound_sigma[n],
            ]
            .map(fmt_f64),
        );
        row.extend([
            fmt_opt(err_u),
            fmt_opt(err_s),
            fmt_opt(eff(report.bound_u[n], err_u)),
            fmt_opt(eff(report.bound_sigma[n], err_s)),
        ]);
        row
    });
    write_csv(path, &ESTIMATOR_HEADER, rows)
}

/// Run-level quantities as `name,value` rows.
pub fn write_estimator_summary(path: &Path, report: &EstimatorReport) -> Result<()> {
    let s = &report.series;
    let c = &report.constants;
    let mut rows: Vec<(String, String)> = vec![
        ("recovery".into(), s.recovery.name().into()),
        ("init_err_u".into(), fmt_f64(s.init_err_u)),
        ("init_err_ut".into(), fmt_f64(s.init_err_ut)),
        ("init_err_sigma".into(), fmt_f64(s.init_err_sigma)),
        ("e1_0".into(), fmt_f64(s.e1_0)),
        ("e4_0".into(), fmt_f64(s.e4_0)),
        ("e5_0".into(), fmt_f64(s.e5_0)),
    ];
    for (i, v) in c.big.iter().enumerate() {
        rows.push((format!("C{}", i + 1), fmt_f64(*v)));
    }
    for (i, v) in c.small_u.iter().enumerate() {
        rows.push((format!("c{}_u", i + 1), fmt_f64(*v)));
    }
    for (i, v) in c.small_sigma.iter().enumerate() {
        rows.push((format!("c{}_sigma", i + 1), fmt_f64(*v)));
    }
    rows.push(("max_bound_u".into(), fmt_f64(report.max_bound_u())));
    rows.push(("max_bound_sigma".into(), fmt_f64(report.max_bound_sigma())));
    if let Some(e) = &report.errors {
        rows.push(("max_err_u".into(), fmt_f64(e.max_u())));
        rows.push(("max_err_sigma".into(), fmt_f64(e.max_sigma())));
        rows.push(("eff_u".into(), fmt_opt(report.effectivity_u())));
        rows.push(("eff_sigma".into(), fmt_opt(report.effectivity_sigma())));
    }
    write_csv(path, &["name", "value"], rows.into_iter().map(|(a, b)| vec![a, b]))
}

/// `(‖·‖ of the displacement parts, ‖·‖ of the stress parts)` per cell.
pub fn densities(est: &SpatialEstimate) -> (Vec<f64>, Vec<f64>) {
    (0..est.num_cells())
        .map(|c| {
            let u = est.residual_u[c].hypot(est.recovery[c]);
            let s = (est.residual_sigma[c].powi(2) + est.jump[c].powi(2) + est.curl[c].powi(2)).sqrt();
            (u, s)
        })
        .unzip()
}

pub const CELL_HEADER: [&str; 11] = [
    "cell", "cx", "cy", "h", "residual_u", "residual_sigma", "recovery", "jump", "curl", "density_u", "density_sigma",
];

pub fn write_cell_map(path: &Path, space: &MixedSpace, est: &SpatialEstimate) -> Result<()> {
    let mesh = space.mesh();
    let h = mesh.h_per_cell();
    let (du, ds) = densities(est);
    let rows = (0..est.num_cells()).map(|c| {
        let m = mesh.centroid(c);
        let mut row = vec![c.to_string()];
        row.extend(
            [m[0], m[1], h[c], est.residual_u[c], est.residual_sigma[c], est.recovery[c], est.jump[c], est.curl[c], du[c], ds[c]]
                .map(fmt_f64),
        );
        row
    });
    write_csv(path, &CELL_HEADER, rows)
}

/// Cell values of `u` at the centroids.
pub fn cell_values(space: &MixedSpace, u: &DispField) -> Vec<f64> {
    (0..space.num_cells()).map(|c| space.disp_at(u, c, [1.0 / 3.0, 1.0 / 3.0])).collect()
}

/// Legacy ASCII VTK unstructured grid with scalar cell data.
pub fn render_vtk(space: &MixedSpace, title: &str, fields: &[(&str, &[f64])]) -> String {
    let mesh = space.mesh();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str(title.lines().next().unwrap_or(""));
    s.push_str("\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    s.push_str(&format!("POINTS {} double\n", mesh.num_vertices()));
    for v in mesh.vertices() {
        s.push_str(&format!("{} {} 0\n", fmt_f64(v[0]), fmt_f64(v[1])));
    }
    let nc = mesh.num_cells();
    s.push_str(&format!("CELLS {nc} {}\n", 4 * nc));
    for c in mesh.cells() {
        s.push_str(&format!("3 {} {} {}\n", c[0], c[1], c[2]));
    }
    s.push_str(&format!("CELL_TYPES {nc}\n"));
    for _ in 0..nc {
        s.push_str("5\n");
    }
    s.push_str(&format!("CELL_DATA {nc}\n"));
    for (name, values) in fields {
        s.push_str(&format!("SCALARS {name} double 1\nLOOKUP_TABLE default\n"));
        for v in values.iter() {
            s.push_str(&fmt_f64(*v));
            s.push('\n');
        }
    }
    s
}

pub fn write_vtk(path: &Path, space: &MixedSpace, title: &str, fields: &[(&str, &[f64])]) -> Result<()> {
    fs::write(path, render_vtk(space, title, fields)).map_err(CliError::io(path))
}
