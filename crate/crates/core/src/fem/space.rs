//! Lagrange spaces on dyadic meshes: complex scalar P1 and constrained real
//! vector P1/P2 with vanishing normal trace.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::mesh::{grid_tag, BoundaryTag, DyadicMesh};

/// Shared immutable mesh for `level`, built once per process.
pub fn shared_mesh(level: u32) -> Result<Arc<DyadicMesh>> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Arc<DyadicMesh>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(m) = cache.lock().unwrap().get(&level) {
        return Ok(m.clone());
    }
    let mesh = Arc::new(DyadicMesh::new(level)?);
    cache.lock().unwrap().insert(level, mesh.clone());
    Ok(mesh)
}

/// Nodal P1 basis values at barycentric point `l`.
#[inline]
pub fn p1_values(l: [f64; 3]) -> [f64; 3] {
    l
}

/// P2 basis values in local order (v0, v1, v2, m01, m12, m20).
#[inline]
pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// P2 basis gradients given barycentric gradients `g`.
#[inline]
pub fn p2_gradients(l: [f64; 3], g: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let v = |i: usize| {
        let s = 4.0 * l[i] - 1.0;
        [s * g[i][0], s * g[i][1]]
    };
    let e = |i: usize, j: usize| {
        [
            4.0 * (l[i] * g[j][0] + l[j] * g[i][0]),
            4.0 * (l[i] * g[j][1] + l[j] * g[i][1]),
        ]
    };
    [v(0), v(1), v(2), e(0, 1), e(1, 2), e(2, 0)]
}

/// Complex P1 space without essential boundary conditions.
#[derive(Clone, Debug)]
pub struct ScalarSpace {
    mesh: Arc<DyadicMesh>,
}

impl ScalarSpace {
    pub fn new(level: u32) -> Result<Self> {
        Ok(ScalarSpace {
            mesh: shared_mesh(level)?,
        })
    }
    pub fn from_mesh(mesh: Arc<DyadicMesh>) -> Self {
        ScalarSpace { mesh }
    }
    pub fn mesh(&self) -> &Arc<DyadicMesh> {
        &self.mesh
    }
    pub fn level(&self) -> u32 {
        self.mesh.level()
    }
    pub fn dim(&self) -> usize {
        self.mesh.num_nodes()
    }
}

/// Real vector Lagrange space of degree 1 or 2 with `B . nu = 0` imposed by
/// eliminating the normal component at boundary Lagrange nodes.
#[derive(Clone, Debug)]
pub struct VectorSpace {
    mesh: Arc<DyadicMesh>,
    degree: u8,
    /// Cells per side of the Lagrange node grid (n for P1, 2n for P2).
    grid: usize,
    tags: Vec<BoundaryTag>,
    /// Full dof `2 * node + comp` to free index, `usize::MAX` if constrained.
    free_index: Vec<usize>,
    free_dofs: Vec<usize>,
}

impl VectorSpace {
    pub fn new(level: u32, degree: u8) -> Result<Self> {
        if degree != 1 && degree != 2 {
            return Err(Error::Config(format!("vector degree {degree} not in {{1,2}}")));
        }
        let mesh = shared_mesh(level)?;
        let grid = mesh.cells() * degree as usize;
        let mut tags = Vec::with_capacity((grid + 1) * (grid + 1));
        for iy in 0..=grid {
            for ix in 0..=grid {
                tags.push(grid_tag(ix, iy, grid));
            }
        }
        let mut free_index = vec![usize::MAX; 2 * tags.len()];
        let mut free_dofs = Vec::new();
        for (node, tag) in tags.iter().enumerate() {
            let mask = component_free(*tag);
            for c in 0..2 {
                if mask[c] {
                    free_index[2 * node + c] = free_dofs.len();
                    free_dofs.push(2 * node + c);
                }
            }
        }
        Ok(VectorSpace {
            mesh,
            degree,
            grid,
            tags,
            free_index,
            free_dofs,
        })
    }

    pub fn mesh(&self) -> &Arc<DyadicMesh> {
        &self.mesh
    }
    pub fn level(&self) -> u32 {
        self.mesh.level()
    }
    pub fn degree(&self) -> u8 {
        self.degree
    }
    pub fn num_lagrange_nodes(&self) -> usize {
        self.tags.len()
    }
    pub fn full_dim(&self) -> usize {
        2 * self.tags.len()
    }
    pub fn dim(&self) -> usize {
        self.free_dofs.len()
    }
    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }
    pub fn free_index(&self, full_dof: usize) -> Option<usize> {
        let k = self.free_index[full_dof];
        (k != usize::MAX).then_some(k)
    }
    pub fn lagrange_tags(&self) -> &[BoundaryTag] {
        &self.tags
    }
    pub fn num_constrained(&self) -> usize {
        self.full_dim() - self.dim()
    }

    pub fn lagrange_point(&self, node: usize) -> [f64; 2] {
        let m = self.grid + 1;
        let h = 1.0 / self.grid as f64;
        [(node % m) as f64 * h, (node / m) as f64 * h]
    }

    /// Lagrange nodes of triangle `t` in local basis order.
    pub fn element_nodes(&self, t: usize) -> ([usize; 6], usize) {
        let tri = self.mesh.triangles()[t];
        if self.degree == 1 {
            return ([tri[0], tri[1], tri[2], 0, 0, 0], 3);
        }
        let n = self.mesh.cells();
        let m = self.grid + 1;
        let g = |v: usize| {
            let (ix, iy) = (v % (n + 1), v / (n + 1));
            (2 * ix, 2 * iy)
        };
        let (a, b, c) = (g(tri[0]), g(tri[1]), g(tri[2]));
        let id = |p: (usize, usize)| p.1 * m + p.0;
        let mid = |p: (usize, usize), q: (usize, usize)| ((p.0 + q.0) / 2, (p.1 + q.1) / 2);
        (
            [
                id(a),
                id(b),
                id(c),
                id(mid(a, b)),
                id(mid(b, c)),
                id(mid(c, a)),
            ],
            6,
        )
    }

    /// Local basis values at barycentric point `l` (first `k` entries valid).
    #[inline]
    pub fn basis_values(&self, l: [f64; 3]) -> [f64; 6] {
        if self.degree == 1 {
            [l[0], l[1], l[2], 0.0, 0.0, 0.0]
        } else {
            p2_values(l)
        }
    }

    #[inline]
    pub fn basis_gradients(&self, l: [f64; 3], g: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
        if self.degree == 1 {
            [g[0], g[1], g[2], [0.0; 2], [0.0; 2], [0.0; 2]]
        } else {
            p2_gradients(l, g)
        }
    }

    /// Scatters free coefficients into a full nodal vector.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        assert_eq!(free.len(), self.dim());
        let mut full = vec![0.0; self.full_dim()];
        for (k, &d) in self.free_dofs.iter().enumerate() {
            full[d] = free[k];
        }
        full
    }

    /// Gathers the free coefficients of a full nodal vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free_dofs.iter().map(|&d| full[d]).collect()
    }
}

/// Which components are unconstrained at a node with the given tag.
pub fn component_free(tag: BoundaryTag) -> [bool; 2] {
    match tag {
        BoundaryTag::Interior => [true, true],
        BoundaryTag::EdgeX1 => [false, true],
        BoundaryTag::EdgeX2 => [true, false],
        BoundaryTag::Corner => [false, false],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_dimension_counts() {
        for degree in [1u8, 2] {
            for level in 1..4 {
                let s = VectorSpace::new(level, degree).unwrap();
                let g = (1usize << level) * degree as usize;
                let constrained = 4 * 2 + 4 * (g - 1);
                assert_eq!(s.num_constrained(), constrained);
                assert_eq!(s.dim(), 2 * (g + 1) * (g + 1) - constrained);
            }
        }
    }

    #[test]
    fn p2_partition_of_unity_and_kronecker() {
        let pts = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.5, 0.5, 0.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
        ];
        for (i, &p) in pts.iter().enumerate() {
            let v = p2_values(p);
            for (j, &vj) in v.iter().enumerate() {
                assert_eq!(vj, if i == j { 1.0 } else { 0.0 });
            }
        }
        let v = p2_values([0.2, 0.3, 0.5]);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn p2_element_nodes_are_midpoints() {
        let s = VectorSpace::new(2, 2).unwrap();
        let mesh = s.mesh().clone();
        for t in 0..mesh.num_triangles() {
            let (nodes, k) = s.element_nodes(t);
            assert_eq!(k, 6);
            let tri = mesh.triangles()[t];
            for i in 0..3 {
                assert_eq!(s.lagrange_point(nodes[i]), mesh.nodes()[tri[i]]);
            }
            let p = |v: usize| mesh.nodes()[v];
            let mid = |a: usize, b: usize| [(p(a)[0] + p(b)[0]) / 2.0, (p(a)[1] + p(b)[1]) / 2.0];
            assert_eq!(s.lagrange_point(nodes[3]), mid(tri[0], tri[1]));
            assert_eq!(s.lagrange_point(nodes[4]), mid(tri[1], tri[2]));
            assert_eq!(s.lagrange_point(nodes[5]), mid(tri[2], tri[0]));
        }
    }
}
