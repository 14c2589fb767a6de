//! Force-based mesh relaxation on a signed-distance domain (DistMesh).
//!
//! Points start on an equilateral lattice clipped to the domain. Edges act as
//! compressive springs whose rest length is a fixed multiple of the current
//! RMS edge length, points that leave the domain are projected back onto the
//! zero level set, and the point set is Delaunay-retriangulated whenever some
//! point has drifted far enough since the last triangulation.

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{distance, signed_area, topological_boundary, TriMesh, MIN_TRIANGLE_AREA};
use crate::error::{MaeError, Result};
use crate::geometry::{DomainSpec, Point};

/// Tunables of the relaxation; the defaults are the classic DistMesh values.
#[derive(Debug, Clone, Copy)]
pub struct DistMeshParams {
    /// Retriangulate once a point moved more than `retriangulate_tol · h`.
    pub retriangulate_tol: f64,
    /// Stop once every interior point moves less than `move_tol · h` per step.
    pub move_tol: f64,
    /// Rest length multiplier applied to the RMS edge length.
    pub force_scale: f64,
    /// Pseudo-time step.
    pub time_step: f64,
    /// Inside tolerance as a fraction of h.
    pub geometry_tol: f64,
    pub max_steps: usize,
    /// Amplitude of the seeded lattice jitter as a fraction of h.
    pub jitter: f64,
}

impl Default for DistMeshParams {
    fn default() -> Self {
        DistMeshParams {
            retriangulate_tol: 0.1,
            move_tol: 1e-3,
            force_scale: 1.2,
            time_step: 0.2,
            geometry_tol: 1e-3,
            max_steps: 2000,
            jitter: 1e-2,
        }
    }
}

/// Generates a quasi-uniform mesh of `domain` with target edge length `h`.
///
/// The result is deterministic for a fixed `(domain, h, seed)`.
pub fn generate_mesh(domain: &DomainSpec, h: f64, seed: u64) -> Result<TriMesh> {
    generate_mesh_with(domain, h, seed, &DistMeshParams::default())
}

pub fn generate_mesh_with(
    domain: &DomainSpec,
    h: f64,
    seed: u64,
    params: &DistMeshParams,
) -> Result<TriMesh> {
    if !(1e-3..=0.5).contains(&h) {
        return Err(MaeError::InvalidConfig(format!(
            "mesh size h = {h} outside [1e-3, 0.5]"
        )));
    }
    let sdf = |p: Point| domain.signed_distance(p);
    let geps = params.geometry_tol * h;
    let fd_step = 1e-6 * domain.diameter();

    let mut points = initial_points(domain, h, seed, params);
    let nfix = domain.fixed_points.len();

    let mut bars: Vec<[usize; 2]> = Vec::new();
    let mut anchor: Vec<Point> = Vec::new();
    let mut forces = vec![[0.0; 2]; points.len()];
    let mut converged = false;
    let mut last_move = f64::INFINITY;
    let mut steps = 0;

    for step in 0..params.max_steps {
        steps = step + 1;
        let drift = if anchor.is_empty() {
            f64::INFINITY
        } else {
            points
                .iter()
                .zip(&anchor)
                .map(|(p, q)| distance(*p, *q))
                .fold(0.0, f64::max)
        };
        if drift > params.retriangulate_tol * h {
            anchor.clone_from(&points);
            bars = unique_bars(&delaunay_inside(&points, &sdf, geps));
        }

        // Spring forces with rest length force_scale · RMS(edge length).
        let lengths: Vec<f64> = bars
            .iter()
            .map(|&[a, b]| distance(points[a], points[b]))
            .collect();
        let mean_sq = lengths.iter().map(|l| l * l).sum::<f64>() / lengths.len().max(1) as f64;
        let rest = params.force_scale * mean_sq.sqrt();
        forces.iter_mut().for_each(|f| *f = [0.0; 2]);
        for (&[a, b], &len) in bars.iter().zip(&lengths) {
            let push = (rest - len).max(0.0);
            if push == 0.0 || len == 0.0 {
                continue;
            }
            let dir = [
                (points[a][0] - points[b][0]) / len,
                (points[a][1] - points[b][1]) / len,
            ];
            for k in 0..2 {
                forces[a][k] += push * dir[k];
                forces[b][k] -= push * dir[k];
            }
        }
        for f in forces.iter_mut().take(nfix) {
            *f = [0.0; 2];
        }

        let mut max_interior_move = 0.0_f64;
        for (p, f) in points.iter_mut().zip(&forces) {
            p[0] += params.time_step * f[0];
            p[1] += params.time_step * f[1];
        }
        for (i, p) in points.iter_mut().enumerate().skip(nfix) {
            if sdf(*p) > 0.0 {
                *p = project_once(*p, &sdf, fd_step);
            }
            if sdf(*p) < -geps {
                let f = forces[i];
                max_interior_move = max_interior_move.max(params.time_step * f[0].hypot(f[1]));
            }
        }
        last_move = max_interior_move;
        if max_interior_move < params.move_tol * h {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(MaeError::NonConvergence {
            iterations: steps,
            last_move,
        });
    }
    debug!(
        "relaxation settled after {steps} steps with {} points",
        points.len()
    );

    finalize(domain, points, nfix, h, &sdf, fd_step)
}

fn initial_points(domain: &DomainSpec, h: f64, seed: u64, params: &DistMeshParams) -> Vec<Point> {
    let bb = domain.bounding_box;
    let geps = params.geometry_tol * h;
    let dy = h * 3f64.sqrt() / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<Point> = domain.fixed_points.clone();
    let rows = (bb.height() / dy).floor() as usize + 1;
    let cols = (bb.width() / h).floor() as usize + 2;
    for j in 0..rows {
        let shift = if j % 2 == 1 { 0.5 * h } else { 0.0 };
        let y = bb.ymin + j as f64 * dy;
        for i in 0..cols {
            let x = bb.xmin + shift + i as f64 * h;
            // Drawn for every lattice site so the stream does not depend on
            // which sites survive the clipping below.
            let jitter = [
                rng.random_range(-1.0..1.0) * params.jitter * h,
                rng.random_range(-1.0..1.0) * params.jitter * h,
            ];
            let p = [x + jitter[0], y + jitter[1]];
            if domain.signed_distance(p) >= -geps {
                continue;
            }
            if domain
                .fixed_points
                .iter()
                .any(|&q| distance(p, q) < 0.5 * h)
            {
                continue;
            }
            points.push(p);
        }
    }
    points
}

fn delaunay_inside(points: &[Point], sdf: &impl Fn(Point) -> f64, geps: f64) -> Vec<[usize; 3]> {
    let dpoints: Vec<delaunator::Point> = points
        .iter()
        .map(|p| delaunator::Point { x: p[0], y: p[1] })
        .collect();
    let tri = delaunator::triangulate(&dpoints);
    tri.triangles
        .chunks_exact(3)
        .filter_map(|t| {
            let (a, b, c) = (points[t[0]], points[t[1]], points[t[2]]);
            let centroid = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
            if sdf(centroid) >= -geps {
                return None;
            }
            let area = signed_area(a, b, c);
            if area > 0.0 {
                Some([t[0], t[1], t[2]])
            } else if area < 0.0 {
                Some([t[0], t[2], t[1]])
            } else {
                None
            }
        })
        .collect()
}

fn unique_bars(triangles: &[[usize; 3]]) -> Vec<[usize; 2]> {
    let mut bars: Vec<[usize; 2]> = triangles
        .iter()
        .flat_map(|t| [[t[0], t[1]], [t[1], t[2]], [t[2], t[0]]])
        .map(|[a, b]| if a < b { [a, b] } else { [b, a] })
        .collect();
    bars.sort_unstable();
    bars.dedup();
    bars
}

fn sdf_gradient(p: Point, sdf: &impl Fn(Point) -> f64, step: f64) -> Point {
    [
        (sdf([p[0] + step, p[1]]) - sdf([p[0] - step, p[1]])) / (2.0 * step),
        (sdf([p[0], p[1] + step]) - sdf([p[0], p[1] - step])) / (2.0 * step),
    ]
}

fn project_once(p: Point, sdf: &impl Fn(Point) -> f64, step: f64) -> Point {
    let d = sdf(p);
    let g = sdf_gradient(p, sdf, step);
    let g2 = g[0] * g[0] + g[1] * g[1];
    if g2 == 0.0 {
        return p;
    }
    [p[0] - d * g[0] / g2, p[1] - d * g[1] / g2]
}

/// Projects onto the zero level set with repeated gradient steps.
fn project_to_boundary(p: Point, sdf: &impl Fn(Point) -> f64, step: f64, tol: f64) -> Point {
    let mut q = p;
    for _ in 0..50 {
        if sdf(q).abs() <= tol {
            break;
        }
        q = project_once(q, sdf, step);
    }
    q
}

fn finalize(
    domain: &DomainSpec,
    mut points: Vec<Point>,
    nfix: usize,
    h: f64,
    sdf: &impl Fn(Point) -> f64,
    fd_step: f64,
) -> Result<TriMesh> {
    let geps = 1e-3 * h;
    let triangles = delaunay_inside(&points, sdf, geps);

    // Drop points no triangle uses, keeping the fixed points first.
    let mut used = vec![false; points.len()];
    for t in &triangles {
        for &v in t {
            used[v] = true;
        }
    }
    if let Some(i) = (0..nfix).find(|&i| !used[i]) {
        return Err(MaeError::DegenerateMesh(format!(
            "fixed point {:?} is not part of the triangulation",
            points[i]
        )));
    }
    let mut remap = vec![usize::MAX; points.len()];
    let mut kept = Vec::with_capacity(points.len());
    for (i, p) in points.drain(..).enumerate() {
        if used[i] {
            remap[i] = kept.len();
            kept.push(p);
        }
    }
    let mut points = kept;
    let triangles: Vec<[usize; 3]> = triangles.iter().map(|t| t.map(|v| remap[v])).collect();

    let mask = topological_boundary(points.len(), &triangles);
    let tol = 1e-12 * domain.diameter();
    for (i, p) in points.iter_mut().enumerate().skip(nfix) {
        if mask[i] {
            *p = project_to_boundary(*p, sdf, fd_step, tol);
        }
    }

    for (t, tri) in triangles.iter().enumerate() {
        let area = signed_area(points[tri[0]], points[tri[1]], points[tri[2]]);
        if area < MIN_TRIANGLE_AREA {
            return Err(MaeError::DegenerateMesh(format!(
                "triangle {t} has area {area:.3e} after boundary projection"
            )));
        }
    }
    TriMesh::new(points, triangles, mask, h)
}
