//! Triangular meshes, vertex patch areas and the vertex-quadrature norms.

mod distmesh;
mod io;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{MaeError, Result};
use crate::geometry::Point;

pub use distmesh::{generate_mesh, generate_mesh_with, DistMeshParams};
pub use io::{read_mesh, write_mesh, MESH_HEADER};

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

/// Minimum signed area accepted for a triangle.
pub const MIN_TRIANGLE_AREA: f64 = 1e-14;

/// A conforming triangulation with counterclockwise triangles.
///
/// Per-triangle areas and barycentric gradients are cached at construction so
/// the gradient and Hessian kernels never recompute geometry.
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_mask: Vec<bool>,
    /// Requested edge length.
    pub h_target: f64,
    /// |ω_v|: total area of the triangles incident to each vertex.
    pub patch_areas: Vec<f64>,
    triangle_areas: Vec<f64>,
    // ∇λ_i of the three barycentric coordinates, per triangle
    basis_gradients: Vec<[Point; 3]>,
    id: u64,
}

impl TriMesh {
    /// Builds a mesh from raw arrays, checking orientation and index ranges.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary_mask: Vec<bool>,
        h_target: f64,
    ) -> Result<Self> {
        let n = vertices.len();
        if boundary_mask.len() != n {
            return Err(MaeError::DegenerateMesh(format!(
                "boundary mask has {} entries for {n} vertices",
                boundary_mask.len()
            )));
        }
        let mut triangle_areas = Vec::with_capacity(triangles.len());
        let mut basis_gradients = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= n) {
                return Err(MaeError::DegenerateMesh(format!(
                    "triangle {t} references a missing vertex"
                )));
            }
            let [a, b, c] = tri.map(|i| vertices[i]);
            let area = signed_area(a, b, c);
            if !(area >= MIN_TRIANGLE_AREA) {
                return Err(MaeError::DegenerateMesh(format!(
                    "triangle {t} has signed area {area:.3e}"
                )));
            }
            let inv = 1.0 / (2.0 * area);
            basis_gradients.push([
                [(b[1] - c[1]) * inv, (c[0] - b[0]) * inv],
                [(c[1] - a[1]) * inv, (a[0] - c[0]) * inv],
                [(a[1] - b[1]) * inv, (b[0] - a[0]) * inv],
            ]);
            triangle_areas.push(area);
        }
        let patch_areas = accumulate_patch_areas(n, &triangles, &triangle_areas);
        Ok(TriMesh {
            vertices,
            triangles,
            boundary_mask,
            h_target,
            patch_areas,
            triangle_areas,
            basis_gradients,
            id: NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed),
        })
    }

    /// Like [`TriMesh::new`], but marks as boundary every vertex of an edge
    /// that belongs to exactly one triangle.
    pub fn with_topological_boundary(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        h_target: f64,
    ) -> Result<Self> {
        let mask = topological_boundary(vertices.len(), &triangles);
        TriMesh::new(vertices, triangles, mask, h_target)
    }

    /// Structured `n × n`-cell mesh of the unit square, two triangles per cell
    /// split along the (0,0)–(1,1) diagonal direction.
    pub fn structured_unit_square(n: usize) -> Result<Self> {
        assert!(n >= 1);
        let h = 1.0 / n as f64;
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        let mut mask = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 * h, j as f64 * h]);
                mask.push(i == 0 || j == 0 || i == n || j == n);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
        TriMesh::new(vertices, triangles, mask, h)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_interior(&self) -> usize {
        self.boundary_mask.iter().filter(|&&b| !b).count()
    }

    /// Identifier binding derived objects (e.g. a Poisson system) to this mesh.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn triangle_areas(&self) -> &[f64] {
        &self.triangle_areas
    }

    /// Gradients of the three barycentric coordinates of triangle `t`.
    pub fn basis_gradients(&self, t: usize) -> &[Point; 3] {
        &self.basis_gradients[t]
    }

    pub fn total_area(&self) -> f64 {
        self.triangle_areas.iter().sum()
    }

    /// Unique edges as sorted vertex pairs, in ascending order.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut edges: Vec<[usize; 2]> = self
            .triangles
            .iter()
            .flat_map(|t| [[t[0], t[1]], [t[1], t[2]], [t[2], t[0]]])
            .map(|[a, b]| if a < b { [a, b] } else { [b, a] })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        self.edges()
            .iter()
            .map(|&[a, b]| distance(self.vertices[a], self.vertices[b]))
            .collect()
    }

    /// Number of triangles sharing each edge.
    pub fn edge_multiplicities(&self) -> HashMap<[usize; 2], usize> {
        edge_counts(&self.triangles)
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_degrees(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let p = t.map(|i| self.vertices[i]);
                (0..3)
                    .map(|k| {
                        let o = p[k];
                        let u = sub(p[(k + 1) % 3], o);
                        let v = sub(p[(k + 2) % 3], o);
                        let cos = (u[0] * v[0] + u[1] * v[1]) / (norm(u) * norm(v));
                        cos.clamp(-1.0, 1.0).acos().to_degrees()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// |ω_v| for every vertex: sum of the areas of the triangles containing it.
pub fn patch_areas(mesh: &TriMesh) -> Vec<f64> {
    accumulate_patch_areas(mesh.num_vertices(), &mesh.triangles, &mesh.triangle_areas)
}

fn accumulate_patch_areas(n: usize, triangles: &[[usize; 3]], areas: &[f64]) -> Vec<f64> {
    let mut patch = vec![0.0; n];
    for (tri, &a) in triangles.iter().zip(areas) {
        for &v in tri {
            patch[v] += a;
        }
    }
    patch
}

/// Vertex-quadrature norm `((1/3) Σ_v |ω_v| |f_v|^p)^(1/p)`.
///
/// With `p = 2` this is the mesh L² norm used by the residuals; `p = 3` gives
/// the L³ norm used by the inner break test.
pub fn discrete_norm(field: &[f64], areas: &[f64], p: f64) -> f64 {
    debug_assert_eq!(field.len(), areas.len());
    debug_assert!(p >= 1.0);
    let scale = field.iter().fold(0.0_f64, |m, f| m.max(f.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    // Scaling by the max entry keeps |f|^p in range for large p.
    let sum: f64 = field
        .iter()
        .zip(areas)
        .map(|(f, a)| a * (f.abs() / scale).powf(p))
        .sum();
    scale * (sum / 3.0).powf(1.0 / p)
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

pub(crate) fn topological_boundary(n: usize, triangles: &[[usize; 3]]) -> Vec<bool> {
    let mut mask = vec![false; n];
    for ([a, b], count) in edge_counts(triangles) {
        if count == 1 {
            mask[a] = true;
            mask[b] = true;
        }
    }
    mask
}

fn edge_counts(triangles: &[[usize; 3]]) -> HashMap<[usize; 2], usize> {
    let mut counts = HashMap::with_capacity(triangles.len() * 2);
    for t in triangles {
        for [a, b] in [[t[0], t[1]], [t[1], t[2]], [t[2], t[0]]] {
            let key = if a < b { [a, b] } else { [b, a] };
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    counts
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

pub(crate) fn distance(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_right_triangle() -> TriMesh {
        TriMesh::with_topological_boundary(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn single_triangle_patch_areas() {
        let m = unit_right_triangle();
        assert_eq!(patch_areas(&m), vec![0.5, 0.5, 0.5]);
        assert_eq!(m.patch_areas, vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn shared_edge_vertices_get_both_areas() {
        // areas 0.5 and 1.0, sharing edge (1, 2)
        let m = TriMesh::with_topological_boundary(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0, 1.0]],
            vec![[0, 1, 2], [1, 3, 2]],
            1.0,
        )
        .unwrap();
        let a = patch_areas(&m);
        assert_eq!(a[0], 0.5);
        assert_eq!(a[3], 1.0);
        assert_eq!(a[1], 1.5);
        assert_eq!(a[2], 1.5);
    }

    #[test]
    fn patch_areas_sum_to_three_times_area() {
        let m = TriMesh::structured_unit_square(7).unwrap();
        let s: f64 = m.patch_areas.iter().sum();
        assert!((s - 3.0 * m.total_area()).abs() <= 1e-12 * s);
        assert!(m.patch_areas.iter().all(|&a| a > 0.0));
    }

    #[test]
    fn clockwise_triangle_rejected() {
        let err = TriMesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 2, 1]],
            vec![true; 3],
            1.0,
        );
        assert!(matches!(err, Err(MaeError::DegenerateMesh(_))));
    }

    #[test]
    fn norm_examples() {
        let m = unit_right_triangle();
        assert_eq!(discrete_norm(&[0.0; 3], &m.patch_areas, 2.0), 0.0);
        let v = discrete_norm(&[1.0; 3], &m.patch_areas, 3.0);
        assert!((v - 0.5f64.cbrt()).abs() < 1e-15);
        assert!((v - 0.793_700_525_984_1).abs() < 1e-12);
    }

    #[test]
    fn constant_field_norm_is_sqrt_area() {
        let m = TriMesh::structured_unit_square(5).unwrap();
        let ones = vec![1.0; m.num_vertices()];
        let v = discrete_norm(&ones, &m.patch_areas, 2.0);
        assert!((v - m.total_area().sqrt()).abs() < 1e-14);
    }

    #[test]
    fn structured_square_is_conforming() {
        let m = TriMesh::structured_unit_square(4).unwrap();
        let mult = m.edge_multiplicities();
        for ([a, b], c) in mult {
            let on_boundary = m.boundary_mask[a] && m.boundary_mask[b] && {
                let (p, q) = (m.vertices[a], m.vertices[b]);
                (p[0] == q[0] && (p[0] == 0.0 || p[0] == 1.0))
                    || (p[1] == q[1] && (p[1] == 0.0 || p[1] == 1.0))
            };
            assert_eq!(c, if on_boundary { 1 } else { 2 });
        }
        assert_eq!(
            topological_boundary(m.num_vertices(), &m.triangles),
            m.boundary_mask
        );
    }

    fn field_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
        (1usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(-10.0f64..10.0, n),
                prop::collection::vec(-10.0f64..10.0, n),
                prop::collection::vec(1e-3f64..2.0, n),
                1.0f64..4.0,
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn norm_is_homogeneous((f, _g, a, p) in field_pair(), c in -50.0f64..50.0) {
            let scaled: Vec<f64> = f.iter().map(|x| c * x).collect();
            let lhs = discrete_norm(&scaled, &a, p);
            let rhs = c.abs() * discrete_norm(&f, &a, p);
            prop_assert!((lhs - rhs).abs() <= 1e-13 * rhs.max(1e-300));
        }

        #[test]
        fn norm_triangle_inequality((f, g, a, p) in field_pair()) {
            let sum: Vec<f64> = f.iter().zip(&g).map(|(x, y)| x + y).collect();
            let lhs = discrete_norm(&sum, &a, p);
            let rhs = discrete_norm(&f, &a, p) + discrete_norm(&g, &a, p);
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }
}
