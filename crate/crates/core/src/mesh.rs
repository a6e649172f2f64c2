//! Nested dyadic triangulations of the unit square and LOD patches.
//!
//! Level `j` has `n = 2^j` cells per side. Node `(ix, iy)` has index
//! `iy * (n + 1) + ix`. Every cell is split along its bottom-left to
//! top-right diagonal into a lower-right triangle (local slot 0) and an
//! upper-left triangle (slot 1); triangle index is `2 * (cy * n + cx) + slot`.
//! Red refinement of either triangle type yields four level-`j+1` triangles
//! of the same orientation, so the hierarchy is nested.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

pub const MAX_LEVEL: u32 = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Interior,
    /// On `x1 = 0` or `x1 = 1`, away from corners.
    EdgeX1,
    /// On `x2 = 0` or `x2 = 1`, away from corners.
    EdgeX2,
    Corner,
}

#[derive(Clone, Debug)]
pub struct DyadicMesh {
    level: u32,
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    tags: Vec<BoundaryTag>,
}

/// Boundary classification of grid point `(ix, iy)` on an `n x n` grid.
pub fn grid_tag(ix: usize, iy: usize, n: usize) -> BoundaryTag {
    let bx = ix == 0 || ix == n;
    let by = iy == 0 || iy == n;
    match (bx, by) {
        (true, true) => BoundaryTag::Corner,
        (true, false) => BoundaryTag::EdgeX1,
        (false, true) => BoundaryTag::EdgeX2,
        (false, false) => BoundaryTag::Interior,
    }
}

pub fn build_mesh(level: u32) -> Result<DyadicMesh> {
    DyadicMesh::new(level)
}

impl DyadicMesh {
    pub fn new(level: u32) -> Result<Self> {
        if !(1..=MAX_LEVEL).contains(&level) {
            return Err(Error::Config(format!(
                "mesh level {level} outside 1..={MAX_LEVEL}"
            )));
        }
        let n = 1usize << level;
        let h = 1.0 / n as f64;
        let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
        let mut tags = Vec::with_capacity((n + 1) * (n + 1));
        for iy in 0..=n {
            for ix in 0..=n {
                nodes.push([ix as f64 * h, iy as f64 * h]);
                tags.push(grid_tag(ix, iy, n));
            }
        }
        let id = |ix: usize, iy: usize| iy * (n + 1) + ix;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for cy in 0..n {
            for cx in 0..n {
                triangles.push([id(cx, cy), id(cx + 1, cy), id(cx + 1, cy + 1)]);
                triangles.push([id(cx, cy), id(cx + 1, cy + 1), id(cx, cy + 1)]);
            }
        }
        Ok(DyadicMesh {
            level,
            nodes,
            triangles,
            tags,
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }
    /// Cells per side.
    pub fn cells(&self) -> usize {
        1 << self.level
    }
    pub fn mesh_size(&self) -> f64 {
        1.0 / self.cells() as f64
    }
    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }
    pub fn tags(&self) -> &[BoundaryTag] {
        &self.tags
    }
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }
    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        iy * (self.cells() + 1) + ix
    }

    pub fn node_grid(&self, node: usize) -> (usize, usize) {
        let m = self.cells() + 1;
        (node % m, node / m)
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    /// Triangle containing `p` (points on shared edges resolve to one of them).
    pub fn locate(&self, p: [f64; 2]) -> usize {
        let n = self.cells();
        let nf = n as f64;
        let cx = ((p[0] * nf).floor().max(0.0) as usize).min(n - 1);
        let cy = ((p[1] * nf).floor().max(0.0) as usize).min(n - 1);
        let lx = p[0] * nf - cx as f64;
        let ly = p[1] * nf - cy as f64;
        let slot = if ly <= lx { 0 } else { 1 };
        2 * (cy * n + cx) + slot
    }

    /// Barycentric coordinates of `p` in triangle `t`.
    pub fn barycentric(&self, t: usize, p: [f64; 2]) -> [f64; 3] {
        let n = self.cells() as f64;
        let cell = t / 2;
        let cx = (cell % self.cells()) as f64;
        let cy = (cell / self.cells()) as f64;
        let x = p[0] * n - cx;
        let y = p[1] * n - cy;
        if t % 2 == 0 {
            [1.0 - x, x - y, y]
        } else {
            [1.0 - y, x, y - x]
        }
    }

    /// Gradients of the barycentric coordinates of triangle `t`.
    pub fn barycentric_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let n = self.cells() as f64;
        if t % 2 == 0 {
            [[-n, 0.0], [n, -n], [0.0, n]]
        } else {
            [[0.0, -n], [n, 0.0], [-n, n]]
        }
    }

    pub fn area(&self) -> f64 {
        let h = self.mesh_size();
        0.5 * h * h
    }

    /// Children of triangle `t` on the mesh `levels` levels finer.
    pub fn children(&self, t: usize, levels: u32) -> Vec<usize> {
        let mut current = vec![t];
        let mut n = self.cells();
        for _ in 0..levels {
            let mut next = Vec::with_capacity(current.len() * 4);
            let nf = 2 * n;
            for &s in &current {
                let cell = s / 2;
                let (cx, cy) = (cell % n, cell / n);
                let (fx, fy) = (2 * cx, 2 * cy);
                let tri = |x: usize, y: usize, slot: usize| 2 * (y * nf + x) + slot;
                if s % 2 == 0 {
                    next.extend([
                        tri(fx, fy, 0),
                        tri(fx + 1, fy, 0),
                        tri(fx + 1, fy, 1),
                        tri(fx + 1, fy + 1, 0),
                    ]);
                } else {
                    next.extend([
                        tri(fx, fy, 1),
                        tri(fx, fy + 1, 0),
                        tri(fx, fy + 1, 1),
                        tri(fx + 1, fy + 1, 1),
                    ]);
                }
            }
            current = next;
            n = nf;
        }
        current
    }

    /// Node-to-incident-triangles adjacency.
    pub fn node_triangles(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::with_capacity(6); self.num_nodes()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                adj[v].push(t);
            }
        }
        adj
    }
}

/// Element patch around a coarse node, represented on the fine mesh.
#[derive(Clone, Debug)]
pub struct Patch {
    pub center: usize,
    pub layers: usize,
    /// Coarse triangles covered, sorted.
    pub coarse_elements: Vec<usize>,
    /// Coarse nodes of the closed patch, sorted.
    pub coarse_nodes: Vec<usize>,
    /// Fine triangles covered, sorted.
    pub elements: Vec<usize>,
    /// Fine nodes of the closed patch, sorted.
    pub fine_nodes: Vec<usize>,
    /// `true` when the fine node lies on the patch boundary inside the domain.
    pub on_patch_boundary: Vec<bool>,
}

impl Patch {
    /// Fine nodes carrying unknowns of a local corrector problem.
    pub fn free_fine_nodes(&self) -> Vec<usize> {
        self.fine_nodes
            .iter()
            .zip(&self.on_patch_boundary)
            .filter(|(_, &b)| !b)
            .map(|(&n, _)| n)
            .collect()
    }

    pub fn covers_domain(&self, coarse: &DyadicMesh) -> bool {
        self.coarse_elements.len() == coarse.num_triangles()
    }
}

/// Coarse-element layers around `center`: layer 0 is the support of the
/// coarse hat function, each further layer adds every coarse triangle that
/// shares a vertex with the current patch.
pub fn coarse_patch_elements(
    coarse: &DyadicMesh,
    node_tris: &[Vec<usize>],
    center: usize,
    layers: usize,
) -> BTreeSet<usize> {
    let mut elems: BTreeSet<usize> = node_tris[center].iter().copied().collect();
    for _ in 0..layers {
        if elems.len() == coarse.num_triangles() {
            break;
        }
        let verts: BTreeSet<usize> = elems
            .iter()
            .flat_map(|&t| coarse.triangles()[t])
            .collect();
        for v in verts {
            elems.extend(node_tris[v].iter().copied());
        }
    }
    elems
}

pub fn expand_patch(
    coarse: &DyadicMesh,
    fine: &DyadicMesh,
    center_node: usize,
    layers: usize,
) -> Result<Patch> {
    let node_tris = coarse.node_triangles();
    expand_patch_with(coarse, fine, &node_tris, center_node, layers)
}

/// As [`expand_patch`] with a precomputed coarse node adjacency.
pub fn expand_patch_with(
    coarse: &DyadicMesh,
    fine: &DyadicMesh,
    coarse_node_tris: &[Vec<usize>],
    center_node: usize,
    layers: usize,
) -> Result<Patch> {
    if coarse.level() > fine.level() {
        return Err(Error::LevelMismatch(format!(
            "coarse level {} above fine level {}",
            coarse.level(),
            fine.level()
        )));
    }
    if center_node >= coarse.num_nodes() {
        return Err(Error::InvalidIndex {
            index: center_node,
            limit: coarse.num_nodes(),
        });
    }
    let coarse_elements = coarse_patch_elements(coarse, coarse_node_tris, center_node, layers);
    let diff = fine.level() - coarse.level();
    let mut elements: Vec<usize> = coarse_elements
        .iter()
        .flat_map(|&t| coarse.children(t, diff))
        .collect();
    elements.sort_unstable();

    let coarse_nodes: BTreeSet<usize> = coarse_elements
        .iter()
        .flat_map(|&t| coarse.triangles()[t])
        .collect();

    // a fine node is interior to the patch iff all its incident triangles
    // (within the domain) belong to the patch
    let mut count = vec![0u8; fine.num_nodes()];
    for &t in &elements {
        for &v in &fine.triangles()[t] {
            count[v] += 1;
        }
    }
    let fine_nodes: Vec<usize> = (0..fine.num_nodes()).filter(|&v| count[v] > 0).collect();
    let on_patch_boundary = fine_nodes
        .iter()
        .map(|&v| count[v] as usize != fine_incident_count(fine, v))
        .collect();

    Ok(Patch {
        center: center_node,
        layers,
        coarse_elements: coarse_elements.into_iter().collect(),
        coarse_nodes: coarse_nodes.into_iter().collect(),
        elements,
        fine_nodes,
        on_patch_boundary,
    })
}

/// Number of triangles incident to a node of the structured mesh.
fn fine_incident_count(mesh: &DyadicMesh, v: usize) -> usize {
    let n = mesh.cells();
    let (ix, iy) = mesh.node_grid(v);
    let mut c = 0;
    // cell (ix-1, iy-1): both triangles contain its top-right corner
    if ix > 0 && iy > 0 {
        c += 2;
    }
    // cell (ix, iy): both contain its bottom-left corner
    if ix < n && iy < n {
        c += 2;
    }
    // cell (ix-1, iy): bottom-right corner, only slot 0
    if ix > 0 && iy < n {
        c += 1;
    }
    // cell (ix, iy-1): top-left corner, only slot 1
    if ix < n && iy > 0 {
        c += 1;
    }
    c
}
