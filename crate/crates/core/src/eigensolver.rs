//! Inverse iteration for `det D²u = λ|u|²` with a fixed-point Poisson inner
//! solver.
//!
//! Each outer step freezes `f = R(u_k) u_k²` and iterates
//! `Δū_{n+1} = sqrt(ū_xx² + ū_yy² + 2ū_xy² + 2f)` from `ū_0 = u_k`. In
//! [`SolveMode::Inexact`] the inner loop stops as soon as the L³ residual
//! `‖det D²ū − f‖` drops below `ξ_k = c·η₁(u_k)/(1+k)^p`; in
//! [`SolveMode::Exact`] it runs until the relative residual η₂ is below
//! `tol_eta2`. Outer iterates are rescaled to unit mesh L² norm.
//!
//! Residual norms and the Rayleigh quotient use vertex quadrature restricted to
//! interior vertices, where the discrete Hessian is defined.

use std::time::Instant;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::error::{MaeError, Result};
use crate::fem::{assemble_system, solve_poisson, PoissonSystem, SolverStats};
use crate::geometry::{DomainKind, DomainSpec};
use crate::mesh::{discrete_norm, generate_mesh, TriMesh};
use crate::recovery::{hessian_determinant, lumped_hessian, trace_corrected_hessian, HessianField};

/// Smallest admissible `Σ|ω_v||u_v|³` in the Rayleigh quotient.
pub const MIN_DENOMINATOR: f64 = 1e-300;

/// Relative slack of the monotonicity monitor.
pub const MONITOR_SLACK: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMode {
    Inexact,
    Exact,
}

impl SolveMode {
    pub fn name(self) -> &'static str {
        match self {
            SolveMode::Inexact => "inexact",
            SolveMode::Exact => "exact",
        }
    }
}

/// Discrete Hessian used by the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HessianScheme {
    /// [`lumped_hessian`]
    #[default]
    Lumped,
    /// [`trace_corrected_hessian`]
    Recovered,
}

impl HessianScheme {
    pub fn apply(self, mesh: &TriMesh, field: &[f64]) -> HessianField {
        match self {
            HessianScheme::Lumped => lumped_hessian(mesh, field),
            HessianScheme::Recovered => trace_corrected_hessian(mesh, field),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub h: f64,
    pub domain: DomainSpec,
    pub mode: SolveMode,
    pub tol_outer: f64,
    pub xi_coefficient: f64,
    pub xi_power: f64,
    pub tol_eta2: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub eta_init: f64,
    pub seed: u64,
    pub hessian: HessianScheme,
}

impl SolverConfig {
    pub fn new(kind: DomainKind, h: f64, mode: SolveMode) -> Self {
        SolverConfig {
            h,
            domain: DomainSpec::new(kind),
            mode,
            tol_outer: 1e-6,
            xi_coefficient: 20.0,
            xi_power: 1.1,
            tol_eta2: 1e-10,
            max_inner: 15000,
            max_outer: 200,
            eta_init: 0.5,
            seed: 0,
            hessian: HessianScheme::Lumped,
        }
    }

    pub fn with_mode(&self, mode: SolveMode) -> Self {
        SolverConfig {
            mode,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MaeError::InvalidConfig(msg));
        if !(self.h > 0.0 && self.h <= 0.5) {
            return bad(format!("h = {} outside (0, 0.5]", self.h));
        }
        if !(self.tol_outer > 0.0) {
            return bad(format!("tol_outer = {} must be positive", self.tol_outer));
        }
        if !(self.tol_eta2 > 0.0) {
            return bad(format!("tol_eta2 = {} must be positive", self.tol_eta2));
        }
        if !(self.xi_coefficient > 0.0) {
            return bad(format!(
                "xi_coefficient = {} must be positive",
                self.xi_coefficient
            ));
        }
        if !(self.xi_power > 1.0) {
            return bad(format!("xi_power = {} must exceed 1", self.xi_power));
        }
        if !(self.eta_init > 0.0 && self.eta_init.is_finite()) {
            return bad(format!("eta_init = {} must be positive", self.eta_init));
        }
        if self.max_inner == 0 || self.max_outer == 0 {
            return bad("iteration caps must be at least 1".into());
        }
        Ok(())
    }
}

/// Discrete analogue of `R_{k+1}‖u_{k+1}‖² ≤ R_k‖u_k‖² + |Ω|^(1/3) ξ_k`
/// with L³ norms, evaluated on the raw inner output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorRecord {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl MonitorRecord {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + self.slack
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub lambda: f64,
    pub eta1: f64,
    /// Inner break threshold used to produce `u_{k+1}` (absent on the last record).
    pub xi: Option<f64>,
    /// Poisson solves spent producing `u_{k+1}`.
    pub inner_iters: usize,
    /// Poisson solves spent producing `u_k`, counting the initial guess.
    pub cumulative_poisson: usize,
    pub wall_ms: f64,
    pub monitor: Option<MonitorRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalSummary {
    pub lambda_h: f64,
    pub min_u: f64,
    pub eta1: f64,
    pub iterations: usize,
    pub total_poisson: usize,
    pub converged: bool,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshSummary {
    pub vertices: usize,
    pub triangles: usize,
    pub interior: usize,
    pub min_angle_deg: f64,
}

impl MeshSummary {
    pub fn of(mesh: &TriMesh) -> Self {
        MeshSummary {
            vertices: mesh.num_vertices(),
            triangles: mesh.num_triangles(),
            interior: mesh.num_interior(),
            min_angle_deg: mesh.min_angle_degrees(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub domain: DomainKind,
    pub h: f64,
    pub mode: SolveMode,
    pub seed: u64,
    pub mesh: MeshSummary,
    pub linear: SolverStats,
    pub iterations: Vec<IterationRecord>,
    #[serde(rename = "final")]
    pub summary: FinalSummary,
}

#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub lambda_h: f64,
    /// Nodal values, unit mesh L² norm, zero on the boundary.
    pub u_h: Vec<f64>,
    pub report: SolverReport,
}

/// Result of one inner solve.
#[derive(Debug, Clone)]
pub struct InnerOutcome {
    pub u_next: Vec<f64>,
    pub poisson_solves: usize,
    /// Final value of the quantity compared against the break threshold.
    pub residual: f64,
    /// L³ norm of `det D²ū − R u_k²` at the accepted iterate.
    pub l3_residual: f64,
}

/// Vertex quadrature weights `|ω_v|` with boundary vertices zeroed.
pub fn interior_weights(mesh: &TriMesh) -> Vec<f64> {
    mesh.patch_areas
        .iter()
        .zip(&mesh.boundary_mask)
        .map(|(&a, &b)| if b { 0.0 } else { a })
        .collect()
}

/// Solution of `Δu = eta_init`, `u = 0` on ∂Ω.
pub fn initial_guess(
    system: &PoissonSystem,
    num_vertices: usize,
    eta_init: f64,
) -> Result<Vec<f64>> {
    if !(eta_init > 0.0) {
        return Err(MaeError::InvalidConfig(format!(
            "eta_init = {eta_init} must be positive"
        )));
    }
    solve_poisson(system, &vec![eta_init; num_vertices])
}

/// `Σ|ω_v||u_v| det_v / Σ|ω_v||u_v|³`.
pub fn rayleigh_quotient(field: &[f64], hess_det: &[f64], areas: &[f64]) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((u, d), a) in field.iter().zip(hess_det).zip(areas) {
        let au = u.abs();
        num += a * au * d;
        den += a * au * au * au;
    }
    if den < MIN_DENOMINATOR {
        return Err(MaeError::ZeroDenominator);
    }
    Ok(num / den)
}

/// `‖det − R u²‖ / (1 + R‖u‖²)` in the mesh L² norm.
///
/// With `det` taken from `field` itself this is η₁; with the determinant of
/// the next inner iterate it is η₂.
pub fn residual_eta(det: &[f64], field: &[f64], r: f64, areas: &[f64]) -> f64 {
    let res: Vec<f64> = det.iter().zip(field).map(|(d, u)| d - r * u * u).collect();
    let nu = discrete_norm(field, areas, 2.0);
    discrete_norm(&res, areas, 2.0) / (1.0 + r * nu * nu)
}

/// `c·η₁ / (1+k)^p`.
pub fn xi_threshold(k: usize, eta1: f64, cfg: &SolverConfig) -> f64 {
    cfg.xi_coefficient * eta1 / (1.0 + k as f64).powf(cfg.xi_power)
}

/// `sqrt(uxx² + uyy² + 2uxy² + 2·source)`, radicand clamped at zero.
pub fn fixed_point_rhs(hess: &HessianField, source: &[f64]) -> Vec<f64> {
    (0..hess.len())
        .map(|v| {
            let (a, b, c) = (hess.uxx[v], hess.uxy[v], hess.uyy[v]);
            (a * a + c * c + 2.0 * b * b + 2.0 * source[v])
                .max(0.0)
                .sqrt()
        })
        .collect()
}

/// Runs the fixed-point Poisson iteration for one outer step.
///
/// `threshold` is ξ_k in inexact mode (compared with the L³ residual) and is
/// ignored in exact mode, where η₂ is compared with `cfg.tol_eta2`.
pub fn inner_solve(
    mesh: &TriMesh,
    system: &PoissonSystem,
    u_k: &[f64],
    r_k: f64,
    cfg: &SolverConfig,
    threshold: f64,
) -> Result<InnerOutcome> {
    let weights = interior_weights(mesh);
    let source: Vec<f64> = u_k.iter().map(|u| r_k * u * u).collect();
    let nu = discrete_norm(u_k, &weights, 2.0);
    let denom = 1.0 + r_k * nu * nu;
    let target = match cfg.mode {
        SolveMode::Inexact => threshold,
        SolveMode::Exact => cfg.tol_eta2,
    };

    let mut hess = cfg.hessian.apply(mesh, u_k);
    let mut best = f64::INFINITY;
    for n in 1..=cfg.max_inner {
        let g = fixed_point_rhs(&hess, &source);
        let u_next = solve_poisson(system, &g)?;
        hess = cfg.hessian.apply(mesh, &u_next);
        let res = residual_field(&hessian_determinant(&hess), &source, &mesh.boundary_mask);
        let l3_residual = discrete_norm(&res, &weights, 3.0);
        let residual = match cfg.mode {
            SolveMode::Inexact => l3_residual,
            SolveMode::Exact => discrete_norm(&res, &weights, 2.0) / denom,
        };
        best = best.min(residual);
        let done = match cfg.mode {
            SolveMode::Inexact => residual <= target,
            SolveMode::Exact => residual < target,
        };
        if done {
            return Ok(InnerOutcome {
                u_next,
                poisson_solves: n,
                residual,
                l3_residual,
            });
        }
    }
    Err(MaeError::InnerStall {
        iterations: cfg.max_inner,
        best_residual: best,
        target,
    })
}

fn residual_field(det: &[f64], source: &[f64], boundary: &[bool]) -> Vec<f64> {
    det.iter()
        .zip(source)
        .zip(boundary)
        .map(|((d, f), &b)| if b { 0.0 } else { d - f })
        .collect()
}

/// Generates the mesh and runs [`solve_on_mesh`].
pub fn solve_eigenproblem(cfg: &SolverConfig) -> Result<EigenSolution> {
    cfg.validate()?;
    let mesh = generate_mesh(&cfg.domain, cfg.h, cfg.seed)?;
    let system = assemble_system(&mesh)?;
    solve_on_mesh(cfg, &mesh, &system)
}

/// Outer iteration on a prebuilt mesh and factorized system.
pub fn solve_on_mesh(
    cfg: &SolverConfig,
    mesh: &TriMesh,
    system: &PoissonSystem,
) -> Result<EigenSolution> {
    solve_observed(cfg, mesh, system, |_, _| {})
}

/// [`solve_on_mesh`], calling `observer(k, u_k)` on every normalized outer
/// iterate.
pub fn solve_observed(
    cfg: &SolverConfig,
    mesh: &TriMesh,
    system: &PoissonSystem,
    mut observer: impl FnMut(usize, &[f64]),
) -> Result<EigenSolution> {
    cfg.validate()?;
    if !system.is_for(mesh) {
        return Err(MaeError::InvalidConfig(
            "Poisson system was assembled for a different mesh".into(),
        ));
    }
    let start = Instant::now();
    let weights = interior_weights(mesh);
    let omega_cbrt = mesh.total_area().cbrt();

    let mut u = initial_guess(system, mesh.num_vertices(), cfg.eta_init)?;
    let mut cumulative = 1;
    let mut records: Vec<IterationRecord> = Vec::new();
    // R_k‖u_k‖₃² and the bound increment of the step that produced `u`.
    let mut previous: Option<(f64, f64)> = None;

    for k in 0..cfg.max_outer {
        let scale = normalize(&mut u, &weights)?;
        observer(k, &u);
        let det = interior_only(hessian_determinant(&cfg.hessian.apply(mesh, &u)), mesh);
        let r = rayleigh_quotient(&u, &det, &weights)?;
        let eta1 = residual_eta(&det, &u, r, &weights);
        let l3 = discrete_norm(&u, &weights, 3.0);
        let energy = r * l3 * l3;

        if let (Some((energy_prev, increment)), Some(last)) = (previous, records.last_mut()) {
            let raw_l3 = scale * l3;
            last.monitor = Some(MonitorRecord {
                lhs: r * raw_l3 * raw_l3,
                rhs: energy_prev + omega_cbrt * increment,
                slack: MONITOR_SLACK * energy_prev,
            });
        }

        let wall_ms = elapsed_ms(start);
        debug!("k={k} lambda={r:.10} eta1={eta1:.3e} poisson={cumulative}");
        let mut record = IterationRecord {
            k,
            lambda: r,
            eta1,
            xi: None,
            inner_iters: 0,
            cumulative_poisson: cumulative,
            wall_ms,
            monitor: None,
        };

        if eta1 < cfg.tol_outer {
            records.push(record);
            let min_u = u.iter().copied().fold(0.0, f64::min);
            info!(
                "{} {} h={:.5}: lambda={r:.9} after {k} steps, {cumulative} Poisson solves",
                cfg.domain.kind,
                cfg.mode.name(),
                cfg.h
            );
            let report = SolverReport {
                domain: cfg.domain.kind,
                h: cfg.h,
                mode: cfg.mode,
                seed: cfg.seed,
                mesh: MeshSummary::of(mesh),
                linear: system.stats(),
                iterations: records,
                summary: FinalSummary {
                    lambda_h: r,
                    min_u,
                    eta1,
                    iterations: k,
                    total_poisson: cumulative,
                    converged: true,
                    wall_ms,
                },
            };
            return Ok(EigenSolution {
                lambda_h: r,
                u_h: u,
                report,
            });
        }

        let xi = xi_threshold(k, eta1, cfg);
        let inner = inner_solve(mesh, system, &u, r, cfg, xi)?;
        let increment = match cfg.mode {
            SolveMode::Inexact => xi,
            SolveMode::Exact => inner.l3_residual,
        };
        if cfg.mode == SolveMode::Inexact {
            record.xi = Some(xi);
        }
        record.inner_iters = inner.poisson_solves;
        cumulative += inner.poisson_solves;
        records.push(record);
        previous = Some((energy, increment));
        u = inner.u_next;
    }
    Err(MaeError::OuterStall {
        iterations: cfg.max_outer,
        last_eta1: records.last().map_or(f64::NAN, |r| r.eta1),
        tol: cfg.tol_outer,
    })
}

/// Rescales `u` to unit mesh L² norm and returns the previous norm.
fn normalize(u: &mut [f64], weights: &[f64]) -> Result<f64> {
    let s = discrete_norm(u, weights, 2.0);
    if !(s > 0.0 && s.is_finite()) {
        return Err(MaeError::ZeroDenominator);
    }
    u.iter_mut().for_each(|x| *x /= s);
    Ok(s)
}

fn interior_only(mut values: Vec<f64>, mesh: &TriMesh) -> Vec<f64> {
    for (v, &b) in values.iter_mut().zip(&mesh.boundary_mask) {
        if b {
            *v = 0.0;
        }
    }
    values
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg() -> SolverConfig {
        SolverConfig::new(DomainKind::UnitDisk, 0.1, SolveMode::Inexact)
    }

    #[test]
    fn xi_schedule_examples() {
        let c = cfg();
        assert_relative_eq!(xi_threshold(0, 0.05, &c), 1.0, max_relative = 1e-15);
        assert_relative_eq!(
            xi_threshold(9, 1e-4, &c),
            1.588_656_469e-4,
            max_relative = 1e-9
        );
        assert_eq!(xi_threshold(3, 0.0, &c), 0.0);
    }

    #[test]
    fn fixed_point_rhs_examples() {
        let g = fixed_point_rhs(&HessianField::zeros(2), &[2.0, 2.0]);
        assert_eq!(g, vec![2.0, 2.0]);
        let h = HessianField {
            uxx: vec![2.0, 1.0],
            uxy: vec![0.0, 1.0],
            uyy: vec![2.0, 1.0],
        };
        let g = fixed_point_rhs(&h, &[0.0, 0.5]);
        assert_relative_eq!(g[0], 8f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(g[1], 5f64.sqrt(), max_relative = 1e-15);
        // Roundoff below zero is clamped.
        let g = fixed_point_rhs(&HessianField::zeros(1), &[-1e-17]);
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn rayleigh_quotient_examples() {
        assert_eq!(rayleigh_quotient(&[-1.0], &[5.0], &[0.3]).unwrap(), 5.0);
        assert!(matches!(
            rayleigh_quotient(&[0.0, 0.0], &[1.0, 1.0], &[1.0, 1.0]),
            Err(MaeError::ZeroDenominator)
        ));
        let u = [-0.3, -1.2, -0.7, 0.0];
        let det = [2.0, 5.0, 1.5, 9.0];
        let w = [0.1, 0.4, 0.2, 0.3];
        let r = rayleigh_quotient(&u, &det, &w).unwrap();
        let c: f64 = 3.0;
        let cu: Vec<f64> = u.iter().map(|x| c * x).collect();
        let cdet: Vec<f64> = det.iter().map(|x| c * c * x).collect();
        assert_relative_eq!(
            rayleigh_quotient(&cu, &cdet, &w).unwrap(),
            r,
            max_relative = 1e-12
        );
    }

    #[test]
    fn residual_eta_examples() {
        assert_relative_eq!(
            residual_eta(&[4.0], &[-1.0], 2.0, &[3.0]),
            2.0 / 3.0,
            max_relative = 1e-15
        );
        assert_eq!(residual_eta(&[0.0; 3], &[0.0; 3], 0.0, &[1.0; 3]), 0.0);
        let u = [-0.5, -1.0, -0.25];
        let r = 3.0;
        let det: Vec<f64> = u.iter().map(|x| r * x * x).collect();
        assert_eq!(residual_eta(&det, &u, r, &[0.2, 0.3, 0.5]), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        let mut c = cfg();
        c.xi_power = 1.0;
        assert!(matches!(c.validate(), Err(MaeError::InvalidConfig(_))));
        let mut c = cfg();
        c.tol_outer = 0.0;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.max_inner = 0;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.h = 0.6;
        assert!(c.validate().is_err());
        assert_eq!(cfg().with_mode(SolveMode::Exact).mode, SolveMode::Exact);
    }

    #[test]
    fn monitor_holds_with_slack() {
        let m = MonitorRecord {
            lhs: 1.005,
            rhs: 1.0,
            slack: 0.01,
        };
        assert!(m.holds());
        assert!(!MonitorRecord { slack: 0.001, ..m }.holds());
    }
}
