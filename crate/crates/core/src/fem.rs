//! P1 finite elements: stiffness assembly, zero-Dirichlet Poisson solves and
//! elementwise gradients.
//!
//! The Poisson problem is posed as `Δu = f` in Ω, `u = 0` on ∂Ω. With
//! `K_ij = ∫ ∇φ_i · ∇φ_j` over interior unknowns and the lumped load
//! `b_v = (|ω_v| / 3) f_v`, the discrete system is `K u = −b`.

use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;
use serde::{Deserialize, Serialize};

use crate::error::{MaeError, Result};
use crate::geometry::Point;
use crate::mesh::TriMesh;

const NOT_INTERIOR: usize = usize::MAX;

/// Linear-solver statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub unknowns: usize,
    pub matrix_nonzeros: usize,
    pub factor_ms: f64,
}

/// Compressed sparse rows of the full symmetric stiffness matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[row.clone()].binary_search(&j) {
            Ok(k) => self.values[row.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows())
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(|k| self.values[k] * x[self.col_idx[k]])
                    .sum()
            })
            .collect()
    }

    fn from_sorted_triplets(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// Assembled stiffness matrix on interior unknowns plus its Cholesky factor.
///
/// The factorization is computed once; every subsequent solve reuses it.
#[derive(Debug)]
pub struct PoissonSystem {
    interior_index: Vec<usize>,
    interior_vertices: Vec<usize>,
    lumped_mass: Vec<f64>,
    stiffness: CsrMatrix,
    factor: faer::sparse::linalg::solvers::Llt<usize, f64>,
    mesh_id: u64,
    stats: SolverStats,
}

impl PoissonSystem {
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn num_unknowns(&self) -> usize {
        self.interior_vertices.len()
    }

    /// Mesh vertex of each interior unknown.
    pub fn interior_vertices(&self) -> &[usize] {
        &self.interior_vertices
    }

    /// Interior unknown of a mesh vertex, or `None` on the boundary.
    pub fn unknown_of(&self, vertex: usize) -> Option<usize> {
        match self.interior_index[vertex] {
            NOT_INTERIOR => None,
            k => Some(k),
        }
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn is_for(&self, mesh: &TriMesh) -> bool {
        self.mesh_id == mesh.id()
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    /// Lumped load `b_v = (|ω_v|/3) f_v` restricted to interior unknowns.
    pub fn load_vector(&self, source: &[f64]) -> Vec<f64> {
        self.interior_vertices
            .iter()
            .map(|&v| self.lumped_mass[v] * source[v])
            .collect()
    }

    /// Interior values of a nodal field.
    pub fn restrict(&self, field: &[f64]) -> Vec<f64> {
        self.interior_vertices.iter().map(|&v| field[v]).collect()
    }
}

/// Assembles the P1 stiffness matrix with boundary rows and columns
/// eliminated, and factorizes it.
pub fn assemble_system(mesh: &TriMesh) -> Result<PoissonSystem> {
    let n_vertices = mesh.num_vertices();
    let mut interior_index = vec![NOT_INTERIOR; n_vertices];
    let mut interior_vertices = Vec::new();
    for (v, &on_boundary) in mesh.boundary_mask.iter().enumerate() {
        if !on_boundary {
            interior_index[v] = interior_vertices.len();
            interior_vertices.push(v);
        }
    }
    let n = interior_vertices.len();
    if n == 0 {
        return Err(MaeError::SingularSystem(
            "mesh has no interior vertices".into(),
        ));
    }

    let mut entries = Vec::with_capacity(9 * mesh.num_triangles());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.triangle_areas()[t];
        let grads = mesh.basis_gradients(t);
        for a in 0..3 {
            let i = interior_index[tri[a]];
            if i == NOT_INTERIOR {
                continue;
            }
            for b in 0..3 {
                let j = interior_index[tri[b]];
                if j == NOT_INTERIOR {
                    continue;
                }
                let k = area * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
                entries.push((i, j, k));
            }
        }
    }
    let stiffness = CsrMatrix::from_sorted_triplets(n, entries);

    let start = Instant::now();
    let triplets: Vec<Triplet<usize, usize, f64>> = (0..n)
        .flat_map(|i| {
            let st = &stiffness;
            (st.row_ptr[i]..st.row_ptr[i + 1])
                .filter(move |&k| st.col_idx[k] <= i)
                .map(move |k| Triplet::new(i, st.col_idx[k], st.values[k]))
        })
        .collect();
    let matrix = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| MaeError::SingularSystem(format!("{e:?}")))?;
    let factor = matrix
        .sp_cholesky(Side::Lower)
        .map_err(|e| MaeError::SingularSystem(format!("{e:?}")))?;
    let factor_ms = start.elapsed().as_secs_f64() * 1e3;

    let stats = SolverStats {
        unknowns: n,
        matrix_nonzeros: stiffness.nnz(),
        factor_ms,
    };
    Ok(PoissonSystem {
        interior_index,
        interior_vertices,
        lumped_mass: mesh.patch_areas.iter().map(|a| a / 3.0).collect(),
        stiffness,
        factor,
        mesh_id: mesh.id(),
        stats,
    })
}

/// Solves `Δu = source` with `u = 0` on the boundary.
///
/// Boundary entries of the result are exactly `0.0`.
pub fn solve_poisson(system: &PoissonSystem, source: &[f64]) -> Result<Vec<f64>> {
    if source.len() != system.interior_index.len() {
        return Err(MaeError::InvalidConfig(format!(
            "source has {} entries for {} vertices",
            source.len(),
            system.interior_index.len()
        )));
    }
    if let Some(v) = source.iter().position(|s| !s.is_finite()) {
        return Err(MaeError::InvalidConfig(format!(
            "non-finite source value at vertex {v}"
        )));
    }
    let mut rhs: Vec<f64> = system.load_vector(source).iter().map(|b| -b).collect();
    let n = rhs.len();
    system
        .factor
        .solve_in_place(faer::MatMut::from_column_major_slice_mut(&mut rhs, n, 1));
    if rhs.iter().any(|x| !x.is_finite()) {
        return Err(MaeError::SingularSystem(
            "solution contains non-finite values".into(),
        ));
    }
    let mut u = vec![0.0; system.interior_index.len()];
    for (&v, x) in system.interior_vertices.iter().zip(rhs) {
        u[v] = x;
    }
    Ok(u)
}

/// Gradient of the P1 interpolant of `field` on every triangle.
pub fn element_gradients(mesh: &TriMesh, field: &[f64]) -> Vec<Point> {
    debug_assert_eq!(field.len(), mesh.num_vertices());
    mesh.triangles
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            // Differences against the first vertex make constants exact.
            let g = mesh.basis_gradients(t);
            let d1 = field[tri[1]] - field[tri[0]];
            let d2 = field[tri[2]] - field[tri[0]];
            [d1 * g[1][0] + d2 * g[2][0], d1 * g[1][1] + d2 * g[2][1]]
        })
        .collect()
}
