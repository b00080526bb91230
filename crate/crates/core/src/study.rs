//! Convergence studies over a range of uniform refinements.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::lookup;
use crate::mesh::Mesh;
use crate::postproc::{error_norms, observed_orders, postprocess, ErrorReport, ErrorRow};
use crate::properties::{run_property_suite, PropertyReport};
use crate::spaces::SpaceConfig;
use crate::system::solve_stokes_with;
use crate::vtk;
use crate::weakops::WeakGradOptions;

/// Largest refinement level accepted (`n = 2^level`).
pub const MAX_LEVEL: u32 = 10;

pub const CSV_HEADER: &str = "h,err_u,ord_u,err_sigma,ord_sigma,err_sigma_0h,ord_sigma_0h,err_p,ord_p,err_Iu,ord_Iu,err_upost,ord_upost,err_grad_upost,ord_grad_upost";

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub k: usize,
    pub l: usize,
    pub example: String,
    pub first_level: u32,
    pub last_level: u32,
    pub out_dir: Option<PathBuf>,
    pub postprocess: bool,
    pub vtk: bool,
    pub properties: bool,
    pub flip_normals: bool,
    /// Largest accepted relative residual of the linear solve.
    pub residual_tolerance: f64,
}

impl RunConfig {
    pub fn new(k: usize, l: usize, example: &str, first_level: u32, last_level: u32) -> Self {
        Self {
            k,
            l,
            example: example.to_string(),
            first_level,
            last_level,
            out_dir: None,
            postprocess: false,
            vtk: false,
            properties: false,
            flip_normals: false,
            residual_tolerance: 1e-10,
        }
    }

    pub fn validate(&self) -> Result<SpaceConfig> {
        let config = SpaceConfig::new(self.k, self.l)?;
        if self.first_level > self.last_level {
            return Err(Error::InvalidConfig(format!(
                "levels must be ascending, got {}:{}",
                self.first_level, self.last_level
            )));
        }
        if self.last_level > MAX_LEVEL {
            return Err(Error::InvalidConfig(format!(
                "level {} exceeds the maximum {MAX_LEVEL}",
                self.last_level
            )));
        }
        if !(self.residual_tolerance > 0.0) {
            return Err(Error::InvalidConfig("residual tolerance must be positive".into()));
        }
        lookup(&self.example)?;
        Ok(config)
    }

    pub fn stem(&self) -> String {
        format!("study_k{}_l{}", self.k, self.l)
    }
}

/// Parses `A:B` into an inclusive level range.
pub fn parse_levels(s: &str) -> Result<(u32, u32)> {
    let bad = || Error::InvalidConfig(format!("levels must look like A:B, got {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a = a.trim().parse().map_err(|_| bad())?;
    let b = b.trim().parse().map_err(|_| bad())?;
    Ok((a, b))
}

#[derive(Debug, Clone)]
pub struct StudyOutput {
    pub report: ErrorReport,
    pub csv: String,
    pub markdown: String,
    pub properties: Option<PropertyReport>,
}

/// Solves on every level, computes all error norms and writes the requested
/// artifacts. The property suite, when enabled, runs after the study.
pub fn run_convergence_study(run: &RunConfig) -> Result<StudyOutput> {
    let config = run.validate()?;
    let exact = lookup(&run.example)?;
    let options = WeakGradOptions {
        flip_multiplier_normals: run.flip_normals,
    };
    if let Some(dir) = &run.out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut rows = Vec::new();
    for level in run.first_level..=run.last_level {
        let mesh = Arc::new(Mesh::uniform_unit_square(1 << level)?);
        let f = |x| exact.forcing(x);
        let solution = solve_stokes_with(mesh, config, options, &f)?;
        if solution.relative_residual > run.residual_tolerance {
            return Err(Error::Solver(format!(
                "relative residual {:.3e} above tolerance {:.1e} at level {level}",
                solution.relative_residual, run.residual_tolerance
            )));
        }
        let upost = if run.postprocess {
            Some(postprocess(&solution)?)
        } else {
            None
        };
        rows.push(error_norms(&solution, upost.as_ref(), exact.as_ref())?);
        if run.vtk {
            if let Some(dir) = &run.out_dir {
                vtk::write_solution(&dir.join(format!("level{level}.vtk")), &solution)?;
            }
        }
    }
    let report = ErrorReport {
        k: run.k,
        l: run.l,
        example: run.example.clone(),
        rows,
    };
    let csv = to_csv(&report);
    let markdown = to_markdown(&report, run.first_level);
    let properties = if run.properties {
        Some(run_property_suite(&[config], &[2, 4], options)?)
    } else {
        None
    };
    if let Some(dir) = &run.out_dir {
        std::fs::write(dir.join(format!("{}.csv", run.stem())), &csv)?;
        std::fs::write(dir.join(format!("{}.md", run.stem())), &markdown)?;
        if let Some(p) = &properties {
            std::fs::write(dir.join("properties.json"), serde_json::to_string_pretty(p)? + "\n")?;
        }
    }
    Ok(StudyOutput {
        report,
        csv,
        markdown,
        properties,
    })
}

/// Scientific notation with a signed two-digit exponent, `2.988e-03`.
pub fn sci(x: f64, digits: usize) -> String {
    let s = format!("{x:.digits$e}");
    match s.split_once('e') {
        Some((m, e)) => {
            let e: i32 = e.parse().unwrap_or(0);
            let sign = if e < 0 { '-' } else { '+' };
            format!("{m}e{sign}{:02}", e.abs())
        }
        None => s,
    }
}

type Column = fn(&ErrorRow) -> Option<f64>;

const COLUMNS: [Column; 7] = [
    |r| Some(r.u),
    |r| Some(r.sigma),
    |r| Some(r.sigma_0h),
    |r| Some(r.p),
    |r| Some(r.interp_u),
    |r| r.upost,
    |r| r.grad_upost,
];

fn column_orders(report: &ErrorReport, col: Column) -> Vec<Option<f64>> {
    let vals: Vec<Option<f64>> = report.rows.iter().map(col).collect();
    if vals.iter().any(Option::is_none) {
        return vec![None; vals.len()];
    }
    observed_orders(&vals.into_iter().flatten().collect::<Vec<_>>())
}

pub fn to_csv(report: &ErrorReport) -> String {
    let orders: Vec<Vec<Option<f64>>> = COLUMNS.iter().map(|c| column_orders(report, *c)).collect();
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (i, row) in report.rows.iter().enumerate() {
        out.push_str(&sci(row.h, 10));
        for (col, ord) in COLUMNS.iter().zip(&orders) {
            out.push(',');
            if let Some(v) = col(row) {
                out.push_str(&sci(v, 10));
            }
            out.push(',');
            if let Some(o) = ord[i] {
                let _ = write!(out, "{o:.6}");
            }
        }
        out.push('\n');
    }
    out
}

/// Table with `h = 2^-level` rows in the layout of a printed convergence
/// table: each error followed by its observed order.
pub fn to_markdown(report: &ErrorReport, first_level: u32) -> String {
    let mut heads = vec![
        ("‖u−u_h‖", COLUMNS[0]),
        ("‖σ−σ_h‖", COLUMNS[1]),
        ("‖σ−σ_h‖_{0,h}", COLUMNS[2]),
        ("‖p−p_h‖", COLUMNS[3]),
        ("‖I u−u_h‖", COLUMNS[4]),
    ];
    if report.rows.iter().all(|r| r.upost.is_some()) {
        heads.push(("‖u−u_h*‖", COLUMNS[5]));
        heads.push(("‖∇_h(u−u_h*)‖", COLUMNS[6]));
    }
    let mut out = format!(
        "Example {}, (k, l) = ({}, {})\nmesh: uniform n x n squares, each split along the lower-left to upper-right diagonal\n\n| h |",
        report.example, report.k, report.l
    );
    for (name, _) in &heads {
        let _ = write!(out, " {name} | order |");
    }
    out.push_str("\n|---|");
    for _ in &heads {
        out.push_str("---|---|");
    }
    out.push('\n');
    let orders: Vec<Vec<Option<f64>>> = heads.iter().map(|(_, c)| column_orders(report, *c)).collect();
    for (i, row) in report.rows.iter().enumerate() {
        let _ = write!(out, "| 2^-{} |", first_level as usize + i);
        for ((_, col), ord) in heads.iter().zip(&orders) {
            let v = col(row).map(|v| sci(v, 3)).unwrap_or_default();
            let o = ord[i].map(|o| format!("{o:.2}")).unwrap_or_else(|| "-".into());
            let _ = write!(out, " {v} | {o} |");
        }
        out.push('\n');
    }
    out
}
