//! Nodal gradient and Hessian recovery for piecewise-linear fields.
//!
//! Gradients are recovered by area-weighted averaging of the elementwise
//! gradients over each vertex patch. Applying the same averaging to the two
//! recovered gradient components yields nodal second derivatives; the mixed
//! derivative is symmetrized.

use crate::fem::element_gradients;
use crate::geometry::Point;
use crate::mesh::TriMesh;

/// Recovered nodal second derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianField {
    pub uxx: Vec<f64>,
    pub uxy: Vec<f64>,
    pub uyy: Vec<f64>,
}

impl HessianField {
    pub fn zeros(n: usize) -> Self {
        HessianField {
            uxx: vec![0.0; n],
            uxy: vec![0.0; n],
            uyy: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.uxx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uxx.is_empty()
    }

    /// Multiplies every entry by `c`.
    pub fn scale(&mut self, c: f64) {
        for v in self
            .uxx
            .iter_mut()
            .chain(self.uxy.iter_mut())
            .chain(self.uyy.iter_mut())
        {
            *v *= c;
        }
    }
}

/// Area-weighted average of the element gradients around each vertex.
pub fn recover_gradient(mesh: &TriMesh, field: &[f64]) -> Vec<Point> {
    let grads = element_gradients(mesh, field);
    average_to_vertices(mesh, &grads)
}

fn average_to_vertices(mesh: &TriMesh, element_values: &[Point]) -> Vec<Point> {
    let mut acc = vec![[0.0; 2]; mesh.num_vertices()];
    for ((tri, g), &area) in mesh
        .triangles
        .iter()
        .zip(element_values)
        .zip(mesh.triangle_areas())
    {
        for &v in tri {
            acc[v][0] += area * g[0];
            acc[v][1] += area * g[1];
        }
    }
    for (a, &w) in acc.iter_mut().zip(&mesh.patch_areas) {
        a[0] /= w;
        a[1] /= w;
    }
    acc
}

/// Double gradient recovery: recover ∇u, then recover the gradient of each
/// component. `uxy` is the mean of the two mixed derivatives.
pub fn recover_hessian(mesh: &TriMesh, field: &[f64]) -> HessianField {
    let g = recover_gradient(mesh, field);
    let gx: Vec<f64> = g.iter().map(|p| p[0]).collect();
    let gy: Vec<f64> = g.iter().map(|p| p[1]).collect();
    let dgx = recover_gradient(mesh, &gx);
    let dgy = recover_gradient(mesh, &gy);
    HessianField {
        uxx: dgx.iter().map(|p| p[0]).collect(),
        uxy: dgx
            .iter()
            .zip(&dgy)
            .map(|(a, b)| 0.5 * (a[1] + b[0]))
            .collect(),
        uyy: dgy.iter().map(|p| p[1]).collect(),
    }
}

/// Mass-lumped variational Hessian: `uxx_v = −(1/m_v)∫ ∂x u ∂x φ_v` and
/// likewise for the other components, with `m_v = |ω_v|/3`.
///
/// At interior vertices the trace equals the lumped discrete Laplacian, so
/// `det = f` is exactly the fixed point of the Poisson iteration. Boundary
/// rows carry the boundary flux and are not Hessian approximations.
pub fn lumped_hessian(mesh: &TriMesh, field: &[f64]) -> HessianField {
    let grads = element_gradients(mesh, field);
    let mut h = HessianField::zeros(mesh.num_vertices());
    for (t, (tri, g)) in mesh.triangles.iter().zip(&grads).enumerate() {
        let area = mesh.triangle_areas()[t];
        for (b, &v) in mesh.basis_gradients(t).iter().zip(tri) {
            h.uxx[v] -= area * b[0] * g[0];
            h.uyy[v] -= area * b[1] * g[1];
            h.uxy[v] -= 0.5 * area * (b[0] * g[1] + b[1] * g[0]);
        }
    }
    for (v, &w) in mesh.patch_areas.iter().enumerate() {
        let m = w / 3.0;
        h.uxx[v] /= m;
        h.uxy[v] /= m;
        h.uyy[v] /= m;
    }
    h
}

/// Double recovery with the diagonal shifted so that the trace matches the
/// lumped discrete Laplacian at interior vertices.
pub fn trace_corrected_hessian(mesh: &TriMesh, field: &[f64]) -> HessianField {
    let mut h = recover_hessian(mesh, field);
    let lumped = lumped_hessian(mesh, field);
    for v in 0..h.len() {
        if mesh.boundary_mask[v] {
            continue;
        }
        let shift = 0.5 * (lumped.uxx[v] + lumped.uyy[v] - h.uxx[v] - h.uyy[v]);
        h.uxx[v] += shift;
        h.uyy[v] += shift;
    }
    h
}

/// `uxx·uyy − uxy²` at every vertex.
pub fn hessian_determinant(h: &HessianField) -> Vec<f64> {
    h.uxx
        .iter()
        .zip(&h.uyy)
        .zip(&h.uxy)
        .map(|((a, c), b)| a * c - b * b)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(mesh: &TriMesh, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        mesh.vertices.iter().map(|p| f(p[0], p[1])).collect()
    }

    /// Hexagonal lattice patch of `rings` rings around `center`.
    fn hex_lattice(center: Point, side: f64, rings: i32) -> (TriMesh, usize) {
        let mut vertices = Vec::new();
        let mut index = std::collections::HashMap::new();
        let r = rings + 1;
        for j in -r..=r {
            for i in -r..=r {
                // axial coordinates (i, j) -> hex distance
                let k = -i - j;
                if i.abs().max(j.abs()).max(k.abs()) > rings {
                    continue;
                }
                let x = center[0] + side * (i as f64 + 0.5 * j as f64);
                let y = center[1] + side * (3f64.sqrt() / 2.0 * j as f64);
                index.insert((i, j), vertices.len());
                vertices.push([x, y]);
            }
        }
        let mut triangles = Vec::new();
        for (&(i, j), &a) in &index {
            if let (Some(&b), Some(&c)) = (index.get(&(i + 1, j)), index.get(&(i, j + 1))) {
                triangles.push([a, b, c]);
            }
            if let (Some(&b), Some(&c)) = (index.get(&(i + 1, j)), index.get(&(i + 1, j - 1))) {
                triangles.push([a, c, b]);
            }
        }
        triangles.sort_unstable();
        let mesh = TriMesh::with_topological_boundary(vertices, triangles, side).unwrap();
        let c = index[&(0, 0)];
        (mesh, c)
    }

    #[test]
    fn linear_field_gradient_exact() {
        let m = TriMesh::structured_unit_square(6).unwrap();
        let f = sample(&m, |x, y| 3.0 * x + 2.0 * y - 1.0);
        for g in recover_gradient(&m, &f) {
            assert!((g[0] - 3.0).abs() < 1e-12 && (g[1] - 2.0).abs() < 1e-12);
        }
        for g in recover_gradient(&m, &vec![2.0; m.num_vertices()]) {
            assert_eq!(g, [0.0, 0.0]);
        }
    }

    #[test]
    fn quadratic_gradient_exact_on_symmetric_patch() {
        let (a, b) = (0.3, -0.2);
        let (m, c) = hex_lattice([a, b], 0.1, 1);
        let f = sample(&m, |x, _| x * x);
        let g = recover_gradient(&m, &f)[c];
        assert!((g[0] - 2.0 * a).abs() < 1e-13, "{g:?}");
        assert!(g[1].abs() < 1e-13);
    }

    #[test]
    fn quadratic_hessian_exact_at_patch_center() {
        let (m, c) = hex_lattice([0.1, 0.2], 0.05, 2);
        let hq = recover_hessian(&m, &sample(&m, |x, y| x * x + y * y));
        assert!((hq.uxx[c] - 2.0).abs() < 1e-10);
        assert!(hq.uxy[c].abs() < 1e-10);
        assert!((hq.uyy[c] - 2.0).abs() < 1e-10);
        let hxy = recover_hessian(&m, &sample(&m, |x, y| x * y));
        assert!((hxy.uxy[c] - 1.0).abs() < 1e-10);
        assert!(hxy.uxx[c].abs() < 1e-10 && hxy.uyy[c].abs() < 1e-10);

        // Same check on an interior node of the structured square mesh.
        let s = TriMesh::structured_unit_square(10).unwrap();
        let mid = 5 * 11 + 5;
        let hs = recover_hessian(&s, &sample(&s, |x, y| x * x + y * y));
        assert!((hs.uxx[mid] - 2.0).abs() < 1e-10);
        assert!(hs.uxy[mid].abs() < 1e-10);
        assert!((hs.uyy[mid] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn affine_fields_have_zero_hessian() {
        let m = TriMesh::structured_unit_square(8).unwrap();
        let h = recover_hessian(&m, &sample(&m, |x, y| -4.0 * x + 0.5 * y + 7.0));
        for v in h.uxx.iter().chain(&h.uxy).chain(&h.uyy) {
            assert!(v.abs() < 1e-13);
        }
    }

    #[test]
    fn lumped_hessian_interior_behaviour() {
        let m = TriMesh::structured_unit_square(10).unwrap();
        let affine = lumped_hessian(&m, &sample(&m, |x, y| 2.0 * x - y + 0.3));
        let quad = lumped_hessian(&m, &sample(&m, |x, y| x * x + 3.0 * y * y));
        for v in (0..m.num_vertices()).filter(|&v| !m.boundary_mask[v]) {
            assert!(affine.uxx[v].abs() < 1e-11 && affine.uxy[v].abs() < 1e-11);
            assert!(affine.uyy[v].abs() < 1e-11);
            assert!((quad.uxx[v] - 2.0).abs() < 1e-9, "{}", quad.uxx[v]);
            assert!((quad.uyy[v] - 6.0).abs() < 1e-9);
        }
    }

    #[test]
    fn lumped_trace_matches_discrete_laplacian() {
        let (m, _) = hex_lattice([0.0, 0.0], 0.1, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u: Vec<f64> = (0..m.num_vertices())
            .map(|v| {
                if m.boundary_mask[v] {
                    0.0
                } else {
                    rng.random_range(-1.0..1.0)
                }
            })
            .collect();
        let sys = crate::fem::assemble_system(&m).unwrap();
        let ku = sys.stiffness().mul_vec(&sys.restrict(&u));
        let lumped = lumped_hessian(&m, &u);
        let corrected = trace_corrected_hessian(&m, &u);
        for (k, &v) in sys.interior_vertices().iter().enumerate() {
            let lap = -ku[k] / (m.patch_areas[v] / 3.0);
            assert!((lumped.uxx[v] + lumped.uyy[v] - lap).abs() < 1e-9 * lap.abs().max(1.0));
            assert!((corrected.uxx[v] + corrected.uyy[v] - lap).abs() < 1e-9 * lap.abs().max(1.0));
        }
    }

    #[test]
    fn determinant_examples() {
        let h = HessianField {
            uxx: vec![2.0, 1.0],
            uxy: vec![0.0, 1.0],
            uyy: vec![2.0, 1.0],
        };
        assert_eq!(hessian_determinant(&h), vec![4.0, 0.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let (a, b, c): (f64, f64, f64) = (
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            );
            let d = hessian_determinant(&HessianField {
                uxx: vec![a],
                uxy: vec![b],
                uyy: vec![c],
            })[0];
            assert!((d - (a * c - b * b)).abs() <= 1e-14 * (a * c).abs().max(b * b).max(1.0));
        }
    }

    #[test]
    fn scale_multiplies_all_components() {
        let mut h = HessianField {
            uxx: vec![1.0],
            uxy: vec![-2.0],
            uyy: vec![3.0],
        };
        h.scale(2.0);
        assert_eq!((h.uxx[0], h.uxy[0], h.uyy[0]), (2.0, -4.0, 6.0));
        assert!(!h.is_empty());
    }
}
