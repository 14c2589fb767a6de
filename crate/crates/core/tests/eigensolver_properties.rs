use mae_core::eigensolver::{
    fixed_point_rhs, initial_guess, inner_solve, interior_weights, rayleigh_quotient, residual_eta,
    solve_observed, solve_on_mesh, xi_threshold, SolveMode, SolverConfig,
};
use mae_core::fem::{assemble_system, solve_poisson, PoissonSystem};
use mae_core::geometry::{DomainKind, DomainSpec};
use mae_core::mesh::{generate_mesh, TriMesh};
use mae_core::recovery::{hessian_determinant, lumped_hessian};
use mae_core::MaeError;

fn setup(kind: DomainKind, h: f64) -> (SolverConfig, TriMesh, PoissonSystem) {
    let cfg = SolverConfig::new(kind, h, SolveMode::Inexact);
    let mesh = generate_mesh(&DomainSpec::new(kind), h, cfg.seed).unwrap();
    let sys = assemble_system(&mesh).unwrap();
    (cfg, mesh, sys)
}

#[test]
fn initial_guess_matches_radial_solution() {
    let h = 1.0 / 20.0;
    let (_, m, sys) = setup(DomainKind::UnitDisk, h);
    let u = initial_guess(&sys, m.num_vertices(), 0.5).unwrap();
    for ((p, v), &b) in m.vertices.iter().zip(&u).zip(&m.boundary_mask) {
        let exact = (p[0] * p[0] + p[1] * p[1] - 1.0) / 8.0;
        assert!((v - exact).abs() <= 5.0 * h * h);
        if b {
            assert_eq!(v.to_bits(), 0.0_f64.to_bits());
        } else {
            assert!(*v < 0.0);
        }
    }
    let min = u.iter().copied().fold(0.0, f64::min);
    assert!((min + 0.125).abs() <= 5.0 * h * h);
    assert!(initial_guess(&sys, m.num_vertices(), 0.0).is_err());
}

#[test]
fn paraboloid_rayleigh_quotient_near_eight() {
    let (_, m, _) = setup(DomainKind::UnitDisk, 1.0 / 40.0);
    let u: Vec<f64> = m
        .vertices
        .iter()
        .map(|p| 0.5 * (p[0] * p[0] + p[1] * p[1] - 1.0))
        .collect();
    let r = rayleigh_quotient(&u, &vec![1.0; u.len()], &m.patch_areas).unwrap();
    assert!((r - 8.0).abs() <= 0.2, "{r}");
}

#[test]
fn outer_map_is_homogeneous() {
    let (_, m, sys) = setup(DomainKind::Ellipse, 1.0 / 20.0);
    let w = interior_weights(&m);
    let u = initial_guess(&sys, m.num_vertices(), 0.5).unwrap();
    let c = 3.0;
    let cu: Vec<f64> = u.iter().map(|x| c * x).collect();
    let det = hessian_determinant(&lumped_hessian(&m, &u));
    let cdet = hessian_determinant(&lumped_hessian(&m, &cu));
    let r = rayleigh_quotient(&u, &det, &w).unwrap();
    let rc = rayleigh_quotient(&cu, &cdet, &w).unwrap();
    assert!((r - rc).abs() <= 1e-12 * r);

    let step = |field: &[f64], r: f64| {
        let source: Vec<f64> = field.iter().map(|x| r * x * x).collect();
        solve_poisson(&sys, &fixed_point_rhs(&lumped_hessian(&m, field), &source)).unwrap()
    };
    let next = step(&u, r);
    let next_c = step(&cu, rc);
    for (a, b) in next.iter().zip(&next_c) {
        assert!((c * a - b).abs() <= 1e-12 * b.abs().max(1e-3));
    }
}

#[test]
fn inner_solve_at_fixed_point_takes_one_step() {
    let (cfg, m, sys) = setup(DomainKind::UnitDisk, 1.0 / 20.0);
    let sol = solve_on_mesh(&cfg, &m, &sys).unwrap();
    let out = inner_solve(&m, &sys, &sol.u_h, sol.lambda_h, &cfg, 1.0).unwrap();
    assert_eq!(out.poisson_solves, 1);
    assert!(out.residual < 1e-4, "{}", out.residual);
}

#[test]
fn first_inner_solve_is_cheap() {
    let (cfg, m, sys) = setup(DomainKind::UnitDisk, 1.0 / 40.0);
    let w = interior_weights(&m);
    let mut u = initial_guess(&sys, m.num_vertices(), cfg.eta_init).unwrap();
    let s = mae_core::mesh::discrete_norm(&u, &w, 2.0);
    u.iter_mut().for_each(|x| *x /= s);
    let det = hessian_determinant(&lumped_hessian(&m, &u));
    let det: Vec<f64> = det
        .iter()
        .zip(&m.boundary_mask)
        .map(|(d, &b)| if b { 0.0 } else { *d })
        .collect();
    let r = rayleigh_quotient(&u, &det, &w).unwrap();
    let eta1 = residual_eta(&det, &u, r, &w);
    let out = inner_solve(&m, &sys, &u, r, &cfg, xi_threshold(0, eta1, &cfg)).unwrap();
    assert!(out.poisson_solves <= 50, "{}", out.poisson_solves);
}

#[test]
fn iterates_are_nonpositive_with_zero_boundary() {
    for kind in [DomainKind::UnitDisk, DomainKind::UnitSquare] {
        let (cfg, m, sys) = setup(kind, 1.0 / 20.0);
        let mut seen = 0;
        solve_observed(&cfg, &m, &sys, |_, u| {
            seen += 1;
            for (v, &b) in u.iter().zip(&m.boundary_mask) {
                assert!(*v <= 0.0);
                if b {
                    assert_eq!(v.to_bits(), 0.0_f64.to_bits());
                }
            }
        })
        .unwrap();
        assert!(seen > 1);
    }
}

#[test]
fn report_invariants_and_monitor() {
    let (cfg, m, sys) = setup(DomainKind::UnitDisk, 1.0 / 40.0);
    let sol = solve_on_mesh(&cfg, &m, &sys).unwrap();
    let it = &sol.report.iterations;
    assert!(it
        .windows(2)
        .all(|w| w[1].cumulative_poisson > w[0].cumulative_poisson));
    assert!(sol.report.summary.converged);
    assert!(it.last().unwrap().eta1 < cfg.tol_outer);
    assert_eq!(
        sol.report.summary.total_poisson,
        it.last().unwrap().cumulative_poisson
    );
    for r in it.iter().filter(|r| r.k >= 3) {
        if let Some(mon) = r.monitor {
            assert!(mon.holds(), "monitor fails at k={}: {mon:?}", r.k);
        }
    }
    assert!(
        it.iter()
            .filter(|r| r.k >= 3 && r.monitor.is_some())
            .count()
            >= 3
    );
}

#[test]
fn lambda_trace_settles_on_smooth_domains() {
    for kind in [
        DomainKind::UnitDisk,
        DomainKind::Ellipse,
        DomainKind::SmoothedSquare,
    ] {
        let (cfg, m, sys) = setup(kind, 1.0 / 20.0);
        let sol = solve_on_mesh(&cfg, &m, &sys).unwrap();
        for w in sol.report.iterations.windows(2).filter(|w| w[0].k >= 5) {
            assert!(
                w[1].lambda <= w[0].lambda * (1.0 + 1e-3),
                "{kind} k={}",
                w[0].k
            );
        }
    }
}

#[test]
fn exact_mode_spends_more_solves_per_step() {
    let (cfg, m, sys) = setup(DomainKind::UnitDisk, 1.0 / 40.0);
    let exact = solve_on_mesh(&cfg.with_mode(SolveMode::Exact), &m, &sys).unwrap();
    let steps = exact.report.summary.iterations as f64;
    let per_step = (exact.report.summary.total_poisson - 1) as f64 / steps;
    assert!((44.5..=178.0).contains(&per_step), "{per_step}");
    let inexact = solve_on_mesh(&cfg, &m, &sys).unwrap();
    assert!(inexact.report.summary.total_poisson * 2 <= exact.report.summary.total_poisson);
    assert!((inexact.lambda_h - exact.lambda_h).abs() <= 1e-6 * exact.lambda_h);
}

#[test]
fn caps_raise_stall_errors() {
    let (mut cfg, m, sys) = setup(DomainKind::UnitDisk, 0.1);
    cfg.max_outer = 2;
    assert!(matches!(
        solve_on_mesh(&cfg, &m, &sys),
        Err(MaeError::OuterStall { iterations: 2, .. })
    ));
    let mut exact = cfg.with_mode(SolveMode::Exact);
    exact.max_outer = 200;
    exact.max_inner = 1;
    assert!(matches!(
        solve_on_mesh(&exact, &m, &sys),
        Err(MaeError::InnerStall { iterations: 1, .. })
    ));
    let (_, other, _) = setup(DomainKind::UnitDisk, 0.2);
    assert!(matches!(
        solve_on_mesh(&cfg, &other, &sys),
        Err(MaeError::InvalidConfig(_))
    ));
}

#[test]
fn solves_are_deterministic() {
    let cfg = SolverConfig::new(DomainKind::SmoothedSquare, 1.0 / 20.0, SolveMode::Inexact);
    let a = mae_core::solve_eigenproblem(&cfg).unwrap();
    let b = mae_core::solve_eigenproblem(&cfg).unwrap();
    assert_eq!(a.lambda_h.to_bits(), b.lambda_h.to_bits());
    assert_eq!(a.u_h, b.u_h);
}
