//! `mae-eig`: command-line driver for Monge-Ampère eigenvalue experiments.
//!
//! Exit codes: 0 on success, 1 when a solve fails, 2 on usage errors.
//! Log verbosity is read from `MAE_LOG` (e.g. `MAE_LOG=debug`).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mae_core::experiment::{
    fmt_real, run_compare, run_convergence, run_solve, write_profile, Command, ExperimentConfig,
    ModeSelection, ORACLE_TOL, PROFILE_FILE,
};
use mae_core::oracle::reference_solution;
use mae_core::{DomainKind, MaeError};

#[derive(Parser, Debug)]
#[command(
    name = "mae-eig",
    version,
    about = "Monge-Ampère eigenvalue solver (inexact inverse iteration)"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Solve once and write report.json, trace.csv and solution.csv.
    Solve(Args),
    /// Run the inexact and exact methods on a shared mesh for each h.
    Compare(Args),
    /// Disk refinement study against the radial reference solution.
    Convergence(Args),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ModeArg {
    Inexact,
    Exact,
    Both,
}

#[derive(clap::Args, Debug)]
struct Args {
    /// disk, ellipse, smoothsq or square
    #[arg(long, value_parser = parse_domain)]
    domain: DomainKind,
    /// Target edge length; repeatable. Accepts fractions such as 1/40.
    #[arg(long = "h", value_parser = parse_h, required = true)]
    h: Vec<f64>,
    /// Defaults to inexact (both for compare).
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    tol_outer: Option<f64>,
    #[arg(long)]
    xi_coeff: Option<f64>,
    #[arg(long)]
    xi_power: Option<f64>,
    #[arg(long)]
    max_inner: Option<usize>,
    #[arg(long)]
    eta_init: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write the mesh (solve only).
    #[arg(long)]
    dump_mesh: bool,
    /// Also write the radial reference profile as two-column text.
    #[arg(long)]
    export_profile: bool,
    /// Number of h values processed concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn parse_domain(s: &str) -> Result<DomainKind, String> {
    s.parse().map_err(|e: MaeError| e.to_string())
}

fn parse_h(s: &str) -> Result<f64, String> {
    let value = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a
                .trim()
                .parse()
                .map_err(|_| format!("bad numerator in `{s}`"))?;
            let b: f64 = b
                .trim()
                .parse()
                .map_err(|_| format!("bad denominator in `{s}`"))?;
            a / b
        }
        None => s.parse().map_err(|_| format!("`{s}` is not a number"))?,
    };
    if value > 0.0 && value <= 0.5 {
        Ok(value)
    } else {
        Err(format!("h = {value} outside (0, 0.5]"))
    }
}

fn build_config(command: Command, a: &Args) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(command, a.domain, a.h.clone(), a.out.clone());
    if let Some(m) = a.mode {
        cfg.mode = match m {
            ModeArg::Inexact => ModeSelection::Inexact,
            ModeArg::Exact => ModeSelection::Exact,
            ModeArg::Both => ModeSelection::Both,
        };
    }
    cfg.seed = a.seed;
    cfg.tol_outer = a.tol_outer.unwrap_or(cfg.tol_outer);
    cfg.xi_coefficient = a.xi_coeff.unwrap_or(cfg.xi_coefficient);
    cfg.xi_power = a.xi_power.unwrap_or(cfg.xi_power);
    cfg.max_inner = a.max_inner.unwrap_or(cfg.max_inner);
    cfg.eta_init = a.eta_init.unwrap_or(cfg.eta_init);
    cfg.dump_mesh = a.dump_mesh;
    cfg.jobs = a.jobs;
    cfg
}

fn run(cli: Cli) -> Result<(), MaeError> {
    let (command, args) = match &cli.command {
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::Compare(a) => (Command::Compare, a),
        Cmd::Convergence(a) => (Command::Convergence, a),
    };
    let cfg = build_config(command, args);
    cfg.validate()?;
    if args.export_profile {
        std::fs::create_dir_all(&cfg.out_dir)?;
        write_profile(
            &cfg.out_dir.join(PROFILE_FILE),
            &reference_solution(ORACLE_TOL)?,
        )?;
    }
    match command {
        Command::Solve => {
            let s = run_solve(&cfg)?.report.summary;
            println!(
                "lambda_h={} min_u={} iterations={} poisson={} converged={}",
                fmt_real(s.lambda_h),
                fmt_real(s.min_u),
                s.iterations,
                s.total_poisson,
                s.converged
            );
        }
        Command::Compare => {
            println!("algorithm,h,iter,lambda_h,min_u,poisson");
            for r in run_compare(&cfg)? {
                println!(
                    "{},{},{},{},{},{}",
                    r.algorithm.name(),
                    fmt_real(r.h),
                    r.iter,
                    fmt_real(r.lambda_h),
                    fmt_real(r.min_u),
                    r.poisson
                );
            }
        }
        Command::Convergence => {
            println!("h,l2_error,l2_rate,h1_error,h1_rate");
            let opt = |x: Option<f64>| x.map(fmt_real).unwrap_or_default();
            for r in run_convergence(&cfg)? {
                println!(
                    "{},{},{},{},{}",
                    fmt_real(r.h),
                    fmt_real(r.errors.l2),
                    opt(r.l2_rate),
                    fmt_real(r.errors.h1),
                    opt(r.h1_rate)
                );
            }
        }
    }
    Ok(())
}

fn exit_code(e: &MaeError) -> u8 {
    match e {
        MaeError::InvalidConfig(_) | MaeError::UnknownDomain(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MAE_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
