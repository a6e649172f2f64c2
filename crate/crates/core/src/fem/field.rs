//! Coefficient fields and exact prolongation between nested levels.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fem::space::{shared_mesh, VectorSpace};
use crate::sparse::Csr;

/// Order parameter as nodal values of a complex P1 function.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    pub level: u32,
    pub values: Vec<Complex64>,
}

/// Vector potential as full nodal values (two per Lagrange node, constrained
/// entries held at zero).
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub level: u32,
    pub degree: u8,
    pub values: Vec<f64>,
}

impl ComplexField {
    pub fn zeros(level: u32) -> Result<Self> {
        let n = shared_mesh(level)?.num_nodes();
        Ok(ComplexField {
            level,
            values: vec![Complex64::new(0.0, 0.0); n],
        })
    }

    pub fn constant(level: u32, c: Complex64) -> Result<Self> {
        let n = shared_mesh(level)?.num_nodes();
        Ok(ComplexField {
            level,
            values: vec![c; n],
        })
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(level: u32, f: impl Fn([f64; 2]) -> Complex64) -> Result<Self> {
        let mesh = shared_mesh(level)?;
        Ok(ComplexField {
            level,
            values: mesh.nodes().iter().map(|&p| f(p)).collect(),
        })
    }

    pub fn eval(&self, p: [f64; 2]) -> Complex64 {
        let mesh = shared_mesh(self.level).expect("valid level");
        let t = mesh.locate(p);
        let l = mesh.barycentric(t, p);
        let tri = mesh.triangles()[t];
        self.values[tri[0]] * l[0] + self.values[tri[1]] * l[1] + self.values[tri[2]] * l[2]
    }

    pub fn prolongate(&self, fine_level: u32) -> Result<ComplexField> {
        if fine_level == self.level {
            return Ok(self.clone());
        }
        let p = scalar_prolongation(self.level, fine_level)?;
        Ok(ComplexField {
            level: fine_level,
            values: p.mul_complex(&self.values),
        })
    }

    pub fn scaled(&self, z: Complex64) -> ComplexField {
        ComplexField {
            level: self.level,
            values: self.values.iter().map(|v| v * z).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

impl VectorField {
    pub fn zeros(level: u32, degree: u8) -> Result<Self> {
        let space = VectorSpace::new(level, degree)?;
        Ok(VectorField {
            level,
            degree,
            values: vec![0.0; space.full_dim()],
        })
    }

    pub fn from_free(space: &VectorSpace, free: &[f64]) -> Self {
        VectorField {
            level: space.level(),
            degree: space.degree(),
            values: space.expand(free),
        }
    }

    /// Lagrange interpolant of `f`, with constrained components dropped.
    pub fn interpolate(level: u32, degree: u8, f: impl Fn([f64; 2]) -> [f64; 2]) -> Result<Self> {
        let space = VectorSpace::new(level, degree)?;
        let mut values = vec![0.0; space.full_dim()];
        for node in 0..space.num_lagrange_nodes() {
            let v = f(space.lagrange_point(node));
            for c in 0..2 {
                if space.free_index(2 * node + c).is_some() {
                    values[2 * node + c] = v[c];
                }
            }
        }
        Ok(VectorField {
            level,
            degree,
            values,
        })
    }

    pub fn space(&self) -> Result<VectorSpace> {
        VectorSpace::new(self.level, self.degree)
    }

    pub fn free_values(&self) -> Result<Vec<f64>> {
        Ok(self.space()?.restrict(&self.values))
    }

    pub fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        let space = self.space().expect("valid field");
        let mesh = space.mesh();
        let t = mesh.locate(p);
        let l = mesh.barycentric(t, p);
        let (nodes, k) = space.element_nodes(t);
        let phi = space.basis_values(l);
        let mut v = [0.0; 2];
        for a in 0..k {
            v[0] += phi[a] * self.values[2 * nodes[a]];
            v[1] += phi[a] * self.values[2 * nodes[a] + 1];
        }
        v
    }

    pub fn prolongate(&self, fine_level: u32) -> Result<VectorField> {
        self.prolongate_to(fine_level, self.degree)
    }

    /// Exact representation in the (level, degree) space containing this one.
    pub fn prolongate_to(&self, level: u32, degree: u8) -> Result<VectorField> {
        if level == self.level && degree == self.degree {
            return Ok(self.clone());
        }
        let p = vector_prolongation(self.level, self.degree, level, degree)?;
        Ok(VectorField {
            level,
            degree,
            values: p.mul_vec(&self.values),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Prolongation matrix between P1 spaces (fine nodes x coarse nodes).
pub fn scalar_prolongation(coarse_level: u32, fine_level: u32) -> Result<Csr<f64>> {
    if fine_level < coarse_level {
        return Err(Error::LevelMismatch(format!(
            "cannot prolongate level {coarse_level} to coarser level {fine_level}"
        )));
    }
    let coarse = shared_mesh(coarse_level)?;
    let fine = shared_mesh(fine_level)?;
    if fine_level == coarse_level {
        return Ok(Csr::identity(coarse.num_nodes()));
    }
    let mut row_ptr = Vec::with_capacity(fine.num_nodes() + 1);
    let mut col_idx = Vec::with_capacity(3 * fine.num_nodes());
    let mut values = Vec::with_capacity(3 * fine.num_nodes());
    row_ptr.push(0);
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(3);
    for &p in fine.nodes() {
        let t = coarse.locate(p);
        let l = coarse.barycentric(t, p);
        let tri = coarse.triangles()[t];
        entries.clear();
        for k in 0..3 {
            if l[k] != 0.0 {
                entries.push((tri[k], l[k]));
            }
        }
        entries.sort_by_key(|e| e.0);
        for &(c, v) in entries.iter() {
            col_idx.push(c);
            values.push(v);
        }
        row_ptr.push(col_idx.len());
    }
    Ok(Csr::from_parts(
        fine.num_nodes(),
        coarse.num_nodes(),
        row_ptr,
        col_idx,
        values,
    ))
}

/// Prolongation between full vector Lagrange dof vectors (component-wise).
pub fn vector_prolongation(
    coarse_level: u32,
    coarse_degree: u8,
    fine_level: u32,
    fine_degree: u8,
) -> Result<Csr<f64>> {
    if fine_level < coarse_level || fine_degree < coarse_degree {
        return Err(Error::LevelMismatch(format!(
            "P{coarse_degree} level {coarse_level} is not contained in P{fine_degree} level {fine_level}"
        )));
    }
    let cs = VectorSpace::new(coarse_level, coarse_degree)?;
    let fs = VectorSpace::new(fine_level, fine_degree)?;
    let coarse = cs.mesh();
    let mut triplets = Vec::with_capacity(2 * 6 * fs.num_lagrange_nodes());
    for node in 0..fs.num_lagrange_nodes() {
        let p = fs.lagrange_point(node);
        let t = coarse.locate(p);
        let l = coarse.barycentric(t, p);
        let (cn, k) = cs.element_nodes(t);
        let phi = cs.basis_values(l);
        for a in 0..k {
            if phi[a] != 0.0 {
                for c in 0..2 {
                    triplets.push((2 * node + c, 2 * cn[a] + c, phi[a]));
                }
            }
        }
    }
    Ok(Csr::from_triplets(fs.full_dim(), cs.full_dim(), &triplets))
}

/// Lifts free coefficients of `coarse` into full nodal values of `fine`.
pub fn lift_matrix(coarse: &VectorSpace, fine: &VectorSpace) -> Result<Csr<f64>> {
    let p = vector_prolongation(coarse.level(), coarse.degree(), fine.level(), fine.degree())?;
    let inject = Csr::from_triplets(
        coarse.full_dim(),
        coarse.dim(),
        &coarse
            .free_dofs()
            .iter()
            .enumerate()
            .map(|(k, &d)| (d, k, 1.0))
            .collect::<Vec<_>>(),
    );
    Ok(p.matmul(&inject))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_scalar_prolongates_to_constant() {
        let c = Complex64::new(0.3, -1.2);
        let f = ComplexField::constant(2, c).unwrap().prolongate(5).unwrap();
        assert!(f.values.iter().all(|v| (v - c).norm() < 1e-15));
    }

    #[test]
    fn hat_prolongation_values() {
        let coarse = shared_mesh(2).unwrap();
        let z = coarse.node_index(2, 1);
        let mut hat = ComplexField::zeros(2).unwrap();
        hat.values[z] = Complex64::new(1.0, 0.0);
        let fine = hat.prolongate(3).unwrap();
        let fm = shared_mesh(3).unwrap();
        for (i, &p) in fm.nodes().iter().enumerate() {
            let (ix, iy) = fm.node_grid(i);
            let v = fine.values[i].re;
            let (dx, dy) = (ix as i64 - 4, iy as i64 - 2);
            let expected = if dx == 0 && dy == 0 {
                1.0
            } else if (dx.abs() <= 1 && dy.abs() <= 1) && (dx == 0 || dy == 0 || dx == dy) {
                0.5
            } else {
                0.0
            };
            assert_eq!(v, expected, "at {p:?}");
        }
    }

    #[test]
    fn p2_prolongation_is_exact_pointwise() {
        let f = VectorField::interpolate(2, 2, |p| [p[0] * p[1] * 0.3, p[1] * (1.0 - p[1])]).unwrap();
        let g = f.prolongate(4).unwrap();
        for k in 0..50 {
            let p = [((k * 37) % 101) as f64 / 101.0, ((k * 53) % 97) as f64 / 97.0];
            let (a, b) = (f.eval(p), g.eval(p));
            assert!((a[0] - b[0]).abs() < 1e-14 && (a[1] - b[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn p1_vector_embeds_into_p2() {
        let f = VectorField::interpolate(3, 1, |p| [0.0, p[0] * (1.0 - p[0]) + 0.5]).unwrap();
        let g = f.prolongate_to(3, 2).unwrap();
        for k in 0..30 {
            let p = [(k as f64 * 0.031) % 1.0, (k as f64 * 0.077) % 1.0];
            assert!((f.eval(p)[1] - g.eval(p)[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn coarsening_is_rejected() {
        assert!(scalar_prolongation(4, 3).is_err());
        assert!(vector_prolongation(3, 2, 4, 1).is_err());
    }
}
