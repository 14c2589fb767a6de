use thiserror::Error;

/// Errors raised by meshing, linear algebra, and the eigenvalue iterations.
#[derive(Debug, Error)]
pub enum MaeError {
    #[error("unknown domain `{0}` (expected disk, ellipse, smoothsq or square)")]
    UnknownDomain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("mesh relaxation did not settle after {iterations} steps (last move {last_move:.3e})")]
    NonConvergence { iterations: usize, last_move: f64 },

    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),

    #[error("stiffness factorization failed: {0}")]
    SingularSystem(String),

    #[error("Rayleigh quotient denominator vanished")]
    ZeroDenominator,

    #[error("inner fixed-point iteration stalled after {iterations} Poisson solves (best residual {best_residual:.3e}, target {target:.3e})")]
    InnerStall {
        iterations: usize,
        best_residual: f64,
        target: f64,
    },

    #[error("outer iteration did not reach eta1 < {tol:.1e} within {iterations} steps (last eta1 {last_eta1:.3e})")]
    OuterStall {
        iterations: usize,
        last_eta1: f64,
        tol: f64,
    },

    #[error("radial integration broke down at r = {r:.4} (derivative {dv:.3e})")]
    BlowUp { r: f64, dv: f64 },

    #[error("no sign change of v(1) on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = MaeError> = std::result::Result<T, E>;
