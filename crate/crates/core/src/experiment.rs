//! Batch drivers: single solves, inexact/exact comparisons on a shared mesh,
//! and refinement studies on the disk. Results are written as JSON and CSV.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::thread;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::eigensolver::{solve_on_mesh, EigenSolution, SolveMode, SolverConfig, SolverReport};
use crate::error::{MaeError, Result};
use crate::fem::assemble_system;
use crate::geometry::DomainKind;
use crate::mesh::{generate_mesh, write_mesh, TriMesh};
use crate::oracle::{
    convergence_rate, error_norms, quadrature_error_norms, reference_solution, ErrorNorms,
};

pub const REPORT_FILE: &str = "report.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const SOLUTION_FILE: &str = "solution.csv";
pub const MESH_FILE: &str = "mesh.txt";
pub const COMPARE_FILE: &str = "compare.csv";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const CONVERGENCE_JSON: &str = "convergence.json";
pub const PROFILE_FILE: &str = "reference_profile.txt";

/// Shooting tolerance used for the reference profile.
pub const ORACLE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Compare,
    Convergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSelection {
    Inexact,
    Exact,
    Both,
}

impl ModeSelection {
    fn single(self) -> Option<SolveMode> {
        match self {
            ModeSelection::Inexact => Some(SolveMode::Inexact),
            ModeSelection::Exact => Some(SolveMode::Exact),
            ModeSelection::Both => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub domain: DomainKind,
    pub h: Vec<f64>,
    pub mode: ModeSelection,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub tol_outer: f64,
    pub xi_coefficient: f64,
    pub xi_power: f64,
    pub max_inner: usize,
    pub eta_init: f64,
    pub dump_mesh: bool,
    pub jobs: usize,
}

impl ExperimentConfig {
    /// Defaults of [`SolverConfig`] for every solver knob.
    pub fn new(
        command: Command,
        domain: DomainKind,
        h: Vec<f64>,
        out_dir: impl Into<PathBuf>,
    ) -> Self {
        let d = SolverConfig::new(domain, 0.1, SolveMode::Inexact);
        ExperimentConfig {
            command,
            domain,
            h,
            mode: match command {
                Command::Compare => ModeSelection::Both,
                _ => ModeSelection::Inexact,
            },
            out_dir: out_dir.into(),
            seed: d.seed,
            tol_outer: d.tol_outer,
            xi_coefficient: d.xi_coefficient,
            xi_power: d.xi_power,
            max_inner: d.max_inner,
            eta_init: d.eta_init,
            dump_mesh: false,
            jobs: 1,
        }
    }

    pub fn solver_config(&self, h: f64, mode: SolveMode) -> SolverConfig {
        let mut c = SolverConfig::new(self.domain, h, mode);
        c.seed = self.seed;
        c.tol_outer = self.tol_outer;
        c.xi_coefficient = self.xi_coefficient;
        c.xi_power = self.xi_power;
        c.max_inner = self.max_inner;
        c.eta_init = self.eta_init;
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MaeError::InvalidConfig(msg));
        if self.h.is_empty() {
            return bad("at least one --h value is required".into());
        }
        if let Some(h) = self.h.iter().find(|h| !(**h > 0.0 && **h <= 0.5)) {
            return bad(format!("h = {h} outside (0, 0.5]"));
        }
        if self.jobs == 0 {
            return bad("--jobs must be at least 1".into());
        }
        for &h in &self.h {
            self.solver_config(h, SolveMode::Inexact).validate()?;
        }
        match self.command {
            Command::Solve => {
                if self.h.len() != 1 {
                    return bad("solve takes exactly one --h".into());
                }
                if self.mode == ModeSelection::Both {
                    return bad("solve runs a single mode; use compare for both".into());
                }
            }
            Command::Compare => {}
            Command::Convergence => {
                if self.domain != DomainKind::UnitDisk {
                    return bad("convergence studies need the disk reference solution".into());
                }
                if self.h.len() < 2 {
                    return bad("convergence needs at least two --h values".into());
                }
                if self
                    .h
                    .windows(2)
                    .any(|w| ((w[0] / w[1]) - 2.0).abs() > 1e-9)
                {
                    return bad("convergence --h values must halve successively".into());
                }
                if self.mode == ModeSelection::Both {
                    return bad("convergence runs a single mode".into());
                }
            }
        }
        Ok(())
    }
}

/// report.json layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: SolverConfig,
    #[serde(flatten)]
    pub report: SolverReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub algorithm: SolveMode,
    pub h: f64,
    pub iter: usize,
    pub eta1: f64,
    pub lambda_h: f64,
    pub min_u: f64,
    pub time_s: f64,
    pub poisson: usize,
}

impl CompareRow {
    fn from_report(r: &SolverReport) -> Self {
        CompareRow {
            algorithm: r.mode,
            h: r.h,
            iter: r.summary.iterations,
            eta1: r.summary.eta1,
            lambda_h: r.summary.lambda_h,
            min_u: r.summary.min_u,
            time_s: r.summary.wall_ms / 1e3,
            poisson: r.summary.total_poisson,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub lambda_h: f64,
    pub errors: ErrorNorms,
    pub quadrature_errors: ErrorNorms,
    pub l2_rate: Option<f64>,
    pub h1_rate: Option<f64>,
}

/// Formats a real with 12 significant digits.
pub fn fmt_real(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let e = x.abs().log10().floor() as i32;
    if (-5..12).contains(&e) {
        let decimals = (11 - e).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.11e}")
    }
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(csv_error)
}

fn csv_error(e: csv::Error) -> MaeError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => MaeError::Io(io),
        other => MaeError::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Runs one solve and writes report.json, trace.csv, solution.csv and,
/// optionally, mesh.txt into the output directory.
pub fn run_solve(cfg: &ExperimentConfig) -> Result<EigenSolution> {
    cfg.validate()?;
    if cfg.command != Command::Solve {
        return Err(MaeError::InvalidConfig(
            "run_solve needs the solve command".into(),
        ));
    }
    let mode = cfg.mode.single().expect("validated");
    let solver = cfg.solver_config(cfg.h[0], mode);
    prepare_dir(&cfg.out_dir)?;
    let mesh = generate_mesh(&solver.domain, solver.h, solver.seed)?;
    if cfg.dump_mesh {
        let mut w = BufWriter::new(File::create(cfg.out_dir.join(MESH_FILE))?);
        write_mesh(&mesh, &mut w)?;
        w.flush()?;
    }
    let system = assemble_system(&mesh)?;
    let sol = solve_on_mesh(&solver, &mesh, &system)?;
    write_report(&cfg.out_dir.join(REPORT_FILE), &solver, &sol.report)?;
    write_trace(&cfg.out_dir.join(TRACE_FILE), &sol.report)?;
    write_solution(&cfg.out_dir.join(SOLUTION_FILE), &mesh, &sol.u_h)?;
    Ok(sol)
}

pub fn write_report(path: &Path, config: &SolverConfig, report: &SolverReport) -> Result<()> {
    let run = RunReport {
        config: config.clone(),
        report: report.clone(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &run)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn write_trace(path: &Path, report: &SolverReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "k",
        "lambda",
        "eta1",
        "inner_iters",
        "cumulative_poisson",
        "wall_ms",
    ])
    .map_err(csv_error)?;
    for r in &report.iterations {
        w.write_record([
            r.k.to_string(),
            fmt_real(r.lambda),
            fmt_real(r.eta1),
            r.inner_iters.to_string(),
            r.cumulative_poisson.to_string(),
            fmt_real(r.wall_ms),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_solution(path: &Path, mesh: &TriMesh, u: &[f64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["x", "y", "u", "boundary"])
        .map_err(csv_error)?;
    for ((p, &b), &value) in mesh.vertices.iter().zip(&mesh.boundary_mask).zip(u) {
        w.write_record([
            fmt_real(p[0]),
            fmt_real(p[1]),
            fmt_real(value),
            u8::from(b).to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs `f` over the cells, at most `jobs` at a time, keeping input order.
fn run_cells<T: Send, F>(hs: &[f64], jobs: usize, f: F) -> Vec<T>
where
    F: Fn(f64) -> T + Sync,
{
    if jobs <= 1 || hs.len() <= 1 {
        return hs.iter().map(|&h| f(h)).collect();
    }
    let mut out = Vec::with_capacity(hs.len());
    for chunk in hs.chunks(jobs) {
        let results: Vec<T> = thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&h| {
                    let f = &f;
                    s.spawn(move || f(h))
                })
                .collect();
            handles
                .into_iter()
                .map(|handle| handle.join().expect("worker panicked"))
                .collect()
        });
        out.extend(results);
    }
    out
}

type ComparePair = (Result<SolverReport>, Result<SolverReport>);

fn compare_cell(cfg: &ExperimentConfig, h: f64) -> Result<ComparePair> {
    let base = cfg.solver_config(h, SolveMode::Inexact);
    let mesh = generate_mesh(&base.domain, h, base.seed)?;
    let system = assemble_system(&mesh)?;
    let run = |mode| solve_on_mesh(&base.with_mode(mode), &mesh, &system).map(|s| s.report);
    Ok((run(SolveMode::Inexact), run(SolveMode::Exact)))
}

/// Solves every h in both modes on one mesh per h and writes compare.csv.
/// A mode that fails is recorded as a `failed` row and the first failure is
/// returned after the file is complete.
pub fn run_compare(cfg: &ExperimentConfig) -> Result<Vec<CompareRow>> {
    cfg.validate()?;
    prepare_dir(&cfg.out_dir)?;
    let cells = run_cells(&cfg.h, cfg.jobs, |h| compare_cell(cfg, h));

    let mut w = csv_writer(&cfg.out_dir.join(COMPARE_FILE))?;
    w.write_record([
        "algorithm",
        "h",
        "iter",
        "eta1",
        "lambda_h",
        "min_u",
        "time_s",
        "poisson",
    ])
    .map_err(csv_error)?;
    let mut rows = Vec::new();
    let mut first_error = None;
    for (&h, cell) in cfg.h.iter().zip(cells) {
        let pair = match cell {
            Ok(pair) => pair,
            Err(e) => (
                Err(e),
                Err(MaeError::InvalidConfig("mesh setup failed".into())),
            ),
        };
        for (mode, result) in [(SolveMode::Inexact, pair.0), (SolveMode::Exact, pair.1)] {
            match result {
                Ok(report) => {
                    let row = CompareRow::from_report(&report);
                    w.write_record([
                        mode.name().to_string(),
                        fmt_real(h),
                        row.iter.to_string(),
                        fmt_real(row.eta1),
                        fmt_real(row.lambda_h),
                        fmt_real(row.min_u),
                        fmt_real(row.time_s),
                        row.poisson.to_string(),
                    ])
                    .map_err(csv_error)?;
                    rows.push(row);
                }
                Err(e) => {
                    warn!("{} h={h}: {e}", mode.name());
                    w.write_record([mode.name(), &fmt_real(h), "failed", "", "", "", "", ""])
                        .map_err(csv_error)?;
                    first_error.get_or_insert(e);
                }
            }
        }
    }
    w.flush()?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(rows),
    }
}

/// Disk refinement study against the shooting reference; writes
/// convergence.csv, convergence.json and the reference profile.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<Vec<ConvergenceRow>> {
    cfg.validate()?;
    let mode = cfg.mode.single().expect("validated");
    prepare_dir(&cfg.out_dir)?;
    let reference = reference_solution(ORACLE_TOL)?;
    info!(
        "reference lambda {:.9}, v(0) {:.6}",
        reference.lambda,
        reference.center_value()
    );
    write_profile(&cfg.out_dir.join(PROFILE_FILE), &reference)?;

    let solved = run_cells(&cfg.h, cfg.jobs, |h| -> Result<_> {
        let solver = cfg.solver_config(h, mode);
        let mesh = generate_mesh(&solver.domain, h, solver.seed)?;
        let system = assemble_system(&mesh)?;
        let sol = solve_on_mesh(&solver, &mesh, &system)?;
        Ok((
            sol.lambda_h,
            error_norms(&mesh, &sol.u_h, &reference),
            quadrature_error_norms(&mesh, &sol.u_h, &reference),
        ))
    });

    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for (&h, cell) in cfg.h.iter().zip(solved) {
        let (lambda_h, errors, quadrature_errors) = cell?;
        let (l2_rate, h1_rate) = match rows.last() {
            Some(prev) => (
                Some(convergence_rate(prev.errors.l2, errors.l2)),
                Some(convergence_rate(prev.errors.h1, errors.h1)),
            ),
            None => (None, None),
        };
        rows.push(ConvergenceRow {
            h,
            lambda_h,
            errors,
            quadrature_errors,
            l2_rate,
            h1_rate,
        });
    }

    let mut w = csv_writer(&cfg.out_dir.join(CONVERGENCE_FILE))?;
    w.write_record(["h", "l2_error", "l2_rate", "h1_error", "h1_rate"])
        .map_err(csv_error)?;
    let opt = |x: Option<f64>| x.map(fmt_real).unwrap_or_default();
    for r in &rows {
        w.write_record([
            fmt_real(r.h),
            fmt_real(r.errors.l2),
            opt(r.l2_rate),
            fmt_real(r.errors.h1),
            opt(r.h1_rate),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    let mut j = BufWriter::new(File::create(cfg.out_dir.join(CONVERGENCE_JSON))?);
    serde_json::to_writer_pretty(&mut j, &rows)?;
    j.flush()?;
    Ok(rows)
}

/// Two-column `r v` text export of the reference profile, every 20th grid point.
pub fn write_profile(path: &Path, sol: &crate::oracle::RadialSolution) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# r v  (lambda = {})", fmt_real(sol.lambda))?;
    for (r, v) in sol.r_grid.iter().zip(&sol.v).step_by(20) {
        writeln!(w, "{} {}", fmt_real(*r), fmt_real(*v))?;
    }
    w.flush()?;
    Ok(())
}
