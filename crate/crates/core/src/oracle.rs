//! Reference eigenpair on the unit disk.
//!
//! A radial eigenfunction `u(x) = v(|x|)` satisfies `v′v″ = λ r v²` on (0, 1)
//! with `v′(0) = 0` and `v(1) = 0`. The ODE is 2-homogeneous in `v`, so `v(0)`
//! is fixed at −1, λ is found by shooting on `v(1) = 0`, and the profile is
//! rescaled afterwards to unit L²(Ω) norm.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{MaeError, Result};
use crate::mesh::{discrete_norm, TriMesh};

/// Start radius of the numerical integration.
pub const SERIES_START: f64 = 1e-4;

/// Default number of grid intervals on [0, 1].
pub const DEFAULT_STEPS: usize = 20_000;

/// Initial shooting bracket for λ.
pub const LAMBDA_BRACKET: (f64, f64) = (1.0, 50.0);

/// Radial profile on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSolution {
    pub r_grid: Vec<f64>,
    pub v: Vec<f64>,
    pub dv: Vec<f64>,
    pub lambda: f64,
    /// Factor applied to the integrated profile.
    pub scale: f64,
}

impl RadialSolution {
    pub fn center_value(&self) -> f64 {
        self.v[0]
    }

    pub fn boundary_value(&self) -> f64 {
        *self.v.last().expect("nonempty grid")
    }

    /// `2π ∫₀¹ v² r dr` by composite Simpson.
    pub fn l2_norm_squared(&self) -> f64 {
        let f: Vec<f64> = self
            .r_grid
            .iter()
            .zip(&self.v)
            .map(|(r, v)| v * v * r)
            .collect();
        2.0 * PI * simpson(&f, self.step())
    }

    fn step(&self) -> f64 {
        self.r_grid[1] - self.r_grid[0]
    }

    /// Cubic Hermite interpolation of `(v, v′)` at radius `r ∈ [0, 1]`.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let n = self.r_grid.len() - 1;
        let dr = self.step();
        let r = r.clamp(0.0, 1.0);
        let i = ((r / dr).floor() as usize).min(n - 1);
        let t = (r - self.r_grid[i]) / dr;
        let (v0, v1) = (self.v[i], self.v[i + 1]);
        let (m0, m1) = (self.dv[i] * dr, self.dv[i + 1] * dr);
        let (t2, t3) = (t * t, t * t * t);
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * v0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * v1
            + (t3 - t2) * m1;
        let slope = ((6.0 * t2 - 6.0 * t) * v0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * v1
            + (3.0 * t2 - 2.0 * t) * m1)
            / dr;
        (value, slope)
    }

    /// Reference value and gradient at a point of the disk.
    pub fn eval_xy(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        let r = x.hypot(y);
        let (v, dv) = self.eval(r);
        if r < 1e-14 {
            return (v, [0.0, 0.0]);
        }
        (v, [dv * x / r, dv * y / r])
    }
}

/// Leading-order expansion `v = v0 + (√λ|v0|/2) r²`, `v′ = √λ|v0| r`.
pub fn series_start(lambda: f64, v0: f64, r: f64) -> (f64, f64) {
    let c = lambda.sqrt() * v0.abs();
    (v0 + 0.5 * c * r * r, c * r)
}

fn rhs(lambda: f64, r: f64, v: f64, p: f64) -> (f64, f64) {
    (p, lambda * r * v * v / p)
}

fn rk4_step(lambda: f64, r: f64, (v, p): (f64, f64), dr: f64) -> (f64, f64) {
    let k1 = rhs(lambda, r, v, p);
    let k2 = rhs(
        lambda,
        r + 0.5 * dr,
        v + 0.5 * dr * k1.0,
        p + 0.5 * dr * k1.1,
    );
    let k3 = rhs(
        lambda,
        r + 0.5 * dr,
        v + 0.5 * dr * k2.0,
        p + 0.5 * dr * k2.1,
    );
    let k4 = rhs(lambda, r + dr, v + dr * k3.0, p + dr * k3.1);
    (
        v + dr / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        p + dr / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    )
}

/// Integrates `v′ = p`, `p′ = λ r v² / p` with classical RK4 on the uniform
/// grid `r_i = i/n_steps`, starting from the series at [`SERIES_START`].
/// Grid points inside the start radius take series values.
pub fn integrate_radial(lambda: f64, v0: f64, n_steps: usize) -> Result<RadialSolution> {
    if !(lambda > 0.0) || !(v0 < 0.0) || n_steps < 1000 {
        return Err(MaeError::InvalidConfig(format!(
            "radial integration needs lambda > 0, v0 < 0, n_steps >= 1000 (got {lambda}, {v0}, {n_steps})"
        )));
    }
    let n = n_steps + n_steps % 2;
    let dr = 1.0 / n as f64;
    let r_grid: Vec<f64> = (0..=n).map(|i| i as f64 * dr).collect();
    let mut v = Vec::with_capacity(n + 1);
    let mut dv = Vec::with_capacity(n + 1);

    let mut r = SERIES_START;
    let mut state = series_start(lambda, v0, r);
    for &ri in &r_grid {
        if ri <= SERIES_START {
            let (a, b) = series_start(lambda, v0, ri);
            v.push(a);
            dv.push(b);
            continue;
        }
        state = rk4_step(lambda, r, state, ri - r);
        r = ri;
        if !(state.1 > 0.0) || !state.0.is_finite() {
            return Err(MaeError::BlowUp { r, dv: state.1 });
        }
        v.push(state.0);
        dv.push(state.1);
    }
    Ok(RadialSolution {
        r_grid,
        v,
        dv,
        lambda,
        scale: 1.0,
    })
}

/// λ with `|v(1)| ≤ tol` for `v(0) = −1`.
pub fn shoot_lambda(tol: f64) -> Result<f64> {
    shoot_lambda_with(tol, -1.0, DEFAULT_STEPS)
}

/// Illinois-modified regula falsi on `λ ↦ v(1; λ)` over [`LAMBDA_BRACKET`].
pub fn shoot_lambda_with(tol: f64, v0: f64, n_steps: usize) -> Result<f64> {
    if !(tol >= 1e-12) {
        return Err(MaeError::InvalidConfig(format!(
            "shooting tolerance {tol} below 1e-12"
        )));
    }
    let end = |lambda: f64| integrate_radial(lambda, v0, n_steps).map(|s| s.boundary_value());
    let (mut a, mut b) = LAMBDA_BRACKET;
    let (mut fa, mut fb) = (end(a)?, end(b)?);
    if fa * fb > 0.0 {
        return Err(MaeError::NoBracket { lo: a, hi: b });
    }
    // Bisect until the bracket is narrow, then switch to regula falsi.
    while b - a > 1e-2 {
        let m = 0.5 * (a + b);
        let fm = end(m)?;
        if fm.abs() <= tol {
            return Ok(m);
        }
        if fa * fm < 0.0 {
            b = m;
            fb = fm;
        } else {
            a = m;
            fa = fm;
        }
    }
    let mut side = 0;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = end(c)?;
        if fc.abs() <= tol || b - a < 1e-15 * c {
            return Ok(c);
        }
        if fa * fc < 0.0 {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (a + b))
}

/// Rescales the profile to `2π ∫ v² r dr = 1`.
pub fn normalized_profile(sol: &RadialSolution) -> RadialSolution {
    let s = sol.l2_norm_squared().sqrt().recip();
    RadialSolution {
        r_grid: sol.r_grid.clone(),
        v: sol.v.iter().map(|x| x * s).collect(),
        dv: sol.dv.iter().map(|x| x * s).collect(),
        lambda: sol.lambda,
        scale: sol.scale * s,
    }
}

/// Shoots λ and returns the normalized reference profile.
pub fn reference_solution(tol: f64) -> Result<RadialSolution> {
    let lambda = shoot_lambda(tol)?;
    Ok(normalized_profile(&integrate_radial(
        lambda,
        -1.0,
        DEFAULT_STEPS,
    )?))
}

fn simpson(f: &[f64], dx: f64) -> f64 {
    let n = f.len() - 1;
    debug_assert!(n.is_multiple_of(2));
    let mut s = f[0] + f[n];
    for (i, y) in f.iter().enumerate().take(n).skip(1) {
        s += if i % 2 == 1 { 4.0 * y } else { 2.0 * y };
    }
    s * dx / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1_semi: f64,
    /// `sqrt(l2² + h1_semi²)`
    pub h1: f64,
}

/// Errors of `u_h` against the nodal interpolant `I_h u` of the reference:
/// the vertex-quadrature L² norm of `u_h − I_h u` and the L² norm of its
/// piecewise-constant gradient.
pub fn error_norms(mesh: &TriMesh, u_h: &[f64], sol: &RadialSolution) -> ErrorNorms {
    let diff: Vec<f64> = mesh
        .vertices
        .iter()
        .zip(u_h)
        .map(|(p, u)| u - sol.eval_xy(p[0], p[1]).0)
        .collect();
    let l2 = discrete_norm(&diff, &mesh.patch_areas, 2.0);
    let semi: f64 = crate::fem::element_gradients(mesh, &diff)
        .iter()
        .zip(mesh.triangle_areas())
        .map(|(g, a)| a * (g[0] * g[0] + g[1] * g[1]))
        .sum();
    ErrorNorms {
        l2,
        h1_semi: semi.sqrt(),
        h1: (l2 * l2 + semi).sqrt(),
    }
}

/// Errors of the P1 function `u_h` against the reference itself. L² uses the
/// edge-midpoint rule; the gradient error uses the centroid value of the
/// analytic gradient. Includes the interpolation error of P1.
pub fn quadrature_error_norms(mesh: &TriMesh, u_h: &[f64], sol: &RadialSolution) -> ErrorNorms {
    let grads = crate::fem::element_gradients(mesh, u_h);
    let mut l2 = 0.0;
    let mut semi = 0.0;
    for ((tri, g), &area) in mesh.triangles.iter().zip(&grads).zip(mesh.triangle_areas()) {
        let p: [[f64; 2]; 3] = tri.map(|v| mesh.vertices[v]);
        let mut acc = 0.0;
        for (a, b) in [(0, 1), (1, 2), (2, 0)] {
            let mx = 0.5 * (p[a][0] + p[b][0]);
            let my = 0.5 * (p[a][1] + p[b][1]);
            let uh = 0.5 * (u_h[tri[a]] + u_h[tri[b]]);
            let e = uh - sol.eval_xy(mx, my).0;
            acc += e * e;
        }
        l2 += area / 3.0 * acc;
        let cx = (p[0][0] + p[1][0] + p[2][0]) / 3.0;
        let cy = (p[0][1] + p[1][1] + p[2][1]) / 3.0;
        let (_, du) = sol.eval_xy(cx, cy);
        semi += area * ((g[0] - du[0]).powi(2) + (g[1] - du[1]).powi(2));
    }
    ErrorNorms {
        l2: l2.sqrt(),
        h1_semi: semi.sqrt(),
        h1: (l2 + semi).sqrt(),
    }
}

/// `log₂(e_coarse / e_fine)`.
pub fn convergence_rate(e_coarse: f64, e_fine: f64) -> f64 {
    (e_coarse / e_fine).log2()
}
