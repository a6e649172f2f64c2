//! Element-loop assembly of the scalar and vector forms.
//!
//! Every form is integrated on the finest mesh among the fields involved:
//! an element of the target space is split into its children on the
//! integration level and the default rule is applied on each child.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fem::field::{ComplexField, VectorField};
use crate::fem::space::{shared_mesh, ScalarSpace, VectorSpace};
use crate::mesh::DyadicMesh;
use crate::quadrature::QuadratureRule;
use crate::sparse::{Csr, HermitianOperator, RealOperator, Scalar};

const SKIP: usize = usize::MAX;

pub(crate) fn rule() -> &'static QuadratureRule {
    static RULE: OnceLock<QuadratureRule> = OnceLock::new();
    RULE.get_or_init(QuadratureRule::default_rule)
}

/// Sparsity pattern of a space together with the element scatter map.
#[derive(Debug)]
pub struct Plan {
    n: usize,
    local: usize,
    dofs: Vec<usize>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    slots: Vec<u32>,
}

impl Plan {
    fn build(n: usize, local: usize, dofs: Vec<usize>) -> Plan {
        let mut pairs = Vec::with_capacity(dofs.len() * local);
        for el in dofs.chunks(local) {
            for &r in el.iter().filter(|&&r| r != SKIP) {
                for &c in el.iter().filter(|&&c| c != SKIP) {
                    pairs.push((r, c, 0.0f64));
                }
            }
        }
        let pattern = Csr::from_triplets(n, n, &pairs);
        drop(pairs);
        let mut slots = Vec::with_capacity(dofs.len() * local);
        for el in dofs.chunks(local) {
            for &r in el {
                for &c in el {
                    slots.push(if r == SKIP || c == SKIP {
                        u32::MAX
                    } else {
                        pattern.position(r, c).expect("pattern entry") as u32
                    });
                }
            }
        }
        Plan {
            n,
            local,
            dofs,
            row_ptr: pattern.row_ptr().to_vec(),
            col_idx: pattern.col_idx().to_vec(),
            slots,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    fn element_dofs(&self, t: usize) -> &[usize] {
        &self.dofs[t * self.local..(t + 1) * self.local]
    }

    fn scatter<T: Scalar>(&self, t: usize, local: &[T], values: &mut [T]) {
        let s = &self.slots[t * self.local * self.local..(t + 1) * self.local * self.local];
        for (k, &p) in s.iter().enumerate() {
            if p != u32::MAX {
                values[p as usize] += local[k];
            }
        }
    }

    fn matrix<T: Scalar>(&self, values: Vec<T>) -> Csr<T> {
        Csr::from_parts(
            self.n,
            self.n,
            self.row_ptr.clone(),
            self.col_idx.clone(),
            values,
        )
    }
}

fn plan_cache() -> &'static Mutex<HashMap<(u32, u8), Arc<Plan>>> {
    static CACHE: OnceLock<Mutex<HashMap<(u32, u8), Arc<Plan>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Assembly plan of the P1 scalar space on `level`.
pub fn scalar_plan(level: u32) -> Result<Arc<Plan>> {
    if let Some(p) = plan_cache().lock().unwrap().get(&(level, 0)) {
        return Ok(p.clone());
    }
    let mesh = shared_mesh(level)?;
    let dofs = mesh.triangles().iter().flatten().copied().collect();
    let plan = Arc::new(Plan::build(mesh.num_nodes(), 3, dofs));
    plan_cache().lock().unwrap().insert((level, 0), plan.clone());
    Ok(plan)
}

/// Assembly plan over the free dofs of a vector space.
pub fn vector_plan(space: &VectorSpace) -> Arc<Plan> {
    let key = (space.level(), space.degree());
    if let Some(p) = plan_cache().lock().unwrap().get(&key) {
        return p.clone();
    }
    let k = if space.degree() == 1 { 3 } else { 6 };
    let mut dofs = Vec::with_capacity(space.mesh().num_triangles() * 2 * k);
    for t in 0..space.mesh().num_triangles() {
        let (nodes, _) = space.element_nodes(t);
        for &node in &nodes[..k] {
            for c in 0..2 {
                dofs.push(space.free_index(2 * node + c).unwrap_or(SKIP));
            }
        }
    }
    let plan = Arc::new(Plan::build(space.dim(), 2 * k, dofs));
    plan_cache().lock().unwrap().insert(key, plan.clone());
    plan
}

/// Quadrature point inside an element of the target space.
#[derive(Clone, Copy, Debug)]
pub struct QPoint {
    pub x: [f64; 2],
    pub w: f64,
    /// Barycentric coordinates in the target element.
    pub l: [f64; 3],
    /// Centroid of the integration cell, used to locate other fields.
    pub cell: [f64; 2],
}

pub(crate) fn element_points(mesh: &DyadicMesh, int_mesh: &DyadicMesh, t: usize, out: &mut Vec<QPoint>) {
    out.clear();
    let r = rule();
    let area = int_mesh.area();
    for e in mesh.children(t, int_mesh.level() - mesh.level()) {
        let tri = int_mesh.triangles()[e];
        let v = [
            int_mesh.nodes()[tri[0]],
            int_mesh.nodes()[tri[1]],
            int_mesh.nodes()[tri[2]],
        ];
        let cell = [
            (v[0][0] + v[1][0] + v[2][0]) / 3.0,
            (v[0][1] + v[1][1] + v[2][1]) / 3.0,
        ];
        for (lam, &w) in r.points.iter().zip(&r.weights) {
            let x = [
                lam[0] * v[0][0] + lam[1] * v[1][0] + lam[2] * v[2][0],
                lam[0] * v[0][1] + lam[1] * v[1][1] + lam[2] * v[2][1],
            ];
            out.push(QPoint {
                x,
                w: 2.0 * area * w,
                l: mesh.barycentric(t, x),
                cell,
            });
        }
    }
}

/// Point evaluation of a P1 complex field and its gradient.
pub(crate) struct ScalarEval<'a> {
    mesh: Arc<DyadicMesh>,
    values: &'a [Complex64],
}

impl<'a> ScalarEval<'a> {
    pub fn new(u: &'a ComplexField) -> Result<Self> {
        let mesh = shared_mesh(u.level)?;
        if u.values.len() != mesh.num_nodes() {
            return Err(Error::Dimension {
                expected: mesh.num_nodes(),
                got: u.values.len(),
            });
        }
        Ok(ScalarEval {
            mesh,
            values: &u.values,
        })
    }

    #[inline]
    pub fn at(&self, q: &QPoint) -> (Complex64, [Complex64; 2]) {
        let t = self.mesh.locate(q.cell);
        let l = self.mesh.barycentric(t, q.x);
        let g = self.mesh.barycentric_gradients(t);
        let tri = self.mesh.triangles()[t];
        let mut v = Complex64::new(0.0, 0.0);
        let mut d = [Complex64::new(0.0, 0.0); 2];
        for k in 0..3 {
            let c = self.values[tri[k]];
            v += c * l[k];
            d[0] += c * g[k][0];
            d[1] += c * g[k][1];
        }
        (v, d)
    }
}

/// Point evaluation of a vector field: value and Jacobian `jac[c][d] = d_d A_c`.
pub(crate) struct VectorEval<'a> {
    space: VectorSpace,
    values: &'a [f64],
}

impl<'a> VectorEval<'a> {
    pub fn new(a: &'a VectorField) -> Result<Self> {
        let space = a.space()?;
        if a.values.len() != space.full_dim() {
            return Err(Error::Dimension {
                expected: space.full_dim(),
                got: a.values.len(),
            });
        }
        Ok(VectorEval {
            space,
            values: &a.values,
        })
    }

    #[inline]
    pub fn at(&self, q: &QPoint) -> ([f64; 2], [[f64; 2]; 2]) {
        let mesh = self.space.mesh();
        let t = mesh.locate(q.cell);
        let l = mesh.barycentric(t, q.x);
        let g = mesh.barycentric_gradients(t);
        let (nodes, k) = self.space.element_nodes(t);
        let phi = self.space.basis_values(l);
        let dphi = self.space.basis_gradients(l, &g);
        let mut v = [0.0; 2];
        let mut jac = [[0.0; 2]; 2];
        for a in 0..k {
            for c in 0..2 {
                let coef = self.values[2 * nodes[a] + c];
                v[c] += coef * phi[a];
                jac[c][0] += coef * dphi[a][0];
                jac[c][1] += coef * dphi[a][1];
            }
        }
        (v, jac)
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidArgument(format!("kappa must be positive, got {kappa}")));
    }
    Ok(())
}

/// Generic scalar P1 assembly with a per-point kernel writing a 3x3 block.
fn assemble_scalar<T: Scalar>(
    level: u32,
    int_level: u32,
    mut kernel: impl FnMut(&QPoint, &[[f64; 2]; 3], &mut [T; 9]),
) -> Result<Csr<T>> {
    let plan = scalar_plan(level)?;
    let mesh = shared_mesh(level)?;
    let int_mesh = shared_mesh(int_level.max(level))?;
    let mut values = vec![T::zero(); plan.nnz()];
    let mut pts = Vec::new();
    for t in 0..mesh.num_triangles() {
        let g = mesh.barycentric_gradients(t);
        element_points(&mesh, &int_mesh, t, &mut pts);
        let mut local = [T::zero(); 9];
        for q in &pts {
            kernel(q, &g, &mut local);
        }
        plan.scatter(t, &local, &mut values);
    }
    Ok(plan.matrix(values))
}

/// Generic vector assembly; the kernel receives the basis values and
/// gradients of the `k` local nodes and writes a `(2k)^2` block indexed by
/// `2a + c`.
fn assemble_vector(
    space: &VectorSpace,
    int_level: u32,
    mut kernel: impl FnMut(&QPoint, &[f64; 6], &[[f64; 2]; 6], usize, &mut [f64; 144]),
) -> Result<Csr<f64>> {
    let plan = vector_plan(space);
    let mesh = space.mesh();
    let int_mesh = shared_mesh(int_level.max(space.level()))?;
    let mut values = vec![0.0; plan.nnz()];
    let mut pts = Vec::new();
    let k = if space.degree() == 1 { 3 } else { 6 };
    let n = 2 * k;
    let mut packed = vec![0.0; n * n];
    for t in 0..mesh.num_triangles() {
        let g = mesh.barycentric_gradients(t);
        element_points(mesh, &int_mesh, t, &mut pts);
        let mut local = [0.0; 144];
        for q in &pts {
            let phi = space.basis_values(q.l);
            let dphi = space.basis_gradients(q.l, &g);
            kernel(q, &phi, &dphi, k, &mut local);
        }
        for i in 0..n {
            packed[i * n..(i + 1) * n].copy_from_slice(&local[i * 12..i * 12 + n]);
        }
        plan.scatter(t, &packed, &mut values);
    }
    Ok(plan.matrix(values))
}

/// Generic vector load assembly over free dofs.
fn assemble_vector_load(
    space: &VectorSpace,
    int_level: u32,
    mut kernel: impl FnMut(&QPoint, &[f64; 6], &[[f64; 2]; 6], usize, &mut [f64; 12]),
) -> Result<Vec<f64>> {
    let plan = vector_plan(space);
    let mesh = space.mesh();
    let int_mesh = shared_mesh(int_level.max(space.level()))?;
    let mut out = vec![0.0; space.dim()];
    let mut pts = Vec::new();
    for t in 0..mesh.num_triangles() {
        let g = mesh.barycentric_gradients(t);
        element_points(mesh, &int_mesh, t, &mut pts);
        let mut local = [0.0; 12];
        for q in &pts {
            let phi = space.basis_values(q.l);
            let dphi = space.basis_gradients(q.l, &g);
            kernel(q, &phi, &dphi, k_of(space), &mut local);
        }
        for (i, &d) in plan.element_dofs(t).iter().enumerate() {
            if d != SKIP {
                out[d] += local[i];
            }
        }
    }
    Ok(out)
}

fn k_of(space: &VectorSpace) -> usize {
    if space.degree() == 1 {
        3
    } else {
        6
    }
}

/// Curl and divergence of the basis field `phi_a e_c`.
#[inline]
fn curl_div(d: [f64; 2], c: usize) -> (f64, f64) {
    if c == 0 {
        (-d[1], d[0])
    } else {
        (d[0], d[1])
    }
}

/// P1 mass matrix `M_ij = int phi_i phi_j`.
pub fn scalar_mass(level: u32) -> Result<Csr<f64>> {
    assemble_scalar(level, level, |q, _, m: &mut [f64; 9]| {
        for i in 0..3 {
            for j in 0..3 {
                m[3 * i + j] += q.w * q.l[i] * q.l[j];
            }
        }
    })
}

/// P1 stiffness matrix `int grad phi_i . grad phi_j`.
pub fn scalar_stiffness(level: u32) -> Result<Csr<f64>> {
    assemble_scalar(level, level, |q, g, m: &mut [f64; 9]| {
        for i in 0..3 {
            for j in 0..3 {
                m[3 * i + j] += q.w * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            }
        }
    })
}

/// Mass weighted by `|u|^2 + shift` at the quadrature points.
pub fn weighted_scalar_mass(level: u32, u: &ComplexField, shift: f64) -> Result<Csr<f64>> {
    let ev = ScalarEval::new(u)?;
    assemble_scalar(level, u.level, |q, _, m: &mut [f64; 9]| {
        let w = q.w * (ev.at(q).0.norm_sqr() + shift);
        for i in 0..3 {
            for j in 0..3 {
                m[3 * i + j] += w * q.l[i] * q.l[j];
            }
        }
    })
}

/// Covariant form matrix with `Re(psi^H K phi) = a_A(phi, psi)`.
pub fn covariant_matrix(level: u32, a: &VectorField, kappa: f64) -> Result<Csr<Complex64>> {
    check_kappa(kappa)?;
    let ev = VectorEval::new(a)?;
    let k2 = 1.0 / (kappa * kappa);
    let ik = 1.0 / kappa;
    assemble_scalar(level, a.level, |q, g, m: &mut [Complex64; 9]| {
        let (av, _) = ev.at(q);
        let a2 = av[0] * av[0] + av[1] * av[1];
        let adg = [
            av[0] * g[0][0] + av[1] * g[0][1],
            av[0] * g[1][0] + av[1] * g[1][1],
            av[0] * g[2][0] + av[1] * g[2][1],
        ];
        for i in 0..3 {
            for j in 0..3 {
                let re = k2 * (g[i][0] * g[j][0] + g[i][1] * g[j][1]) + a2 * q.l[i] * q.l[j];
                let im = ik * (q.l[i] * adg[j] - q.l[j] * adg[i]);
                m[3 * i + j] += Complex64::new(q.w * re, q.w * im);
            }
        }
    })
}

/// Vector mass `int B_i . B_j`.
pub fn vector_mass(space: &VectorSpace) -> Result<Csr<f64>> {
    assemble_vector(space, space.level(), |q, phi, _, k, m| {
        for a in 0..k {
            for b in 0..k {
                let v = q.w * phi[a] * phi[b];
                m[(2 * a) * 12 + 2 * b] += v;
                m[(2 * a + 1) * 12 + 2 * b + 1] += v;
            }
        }
    })
}

/// Vector mass weighted by `w(x) >= 0`.
pub fn weighted_vector_mass_with(
    space: &VectorSpace,
    int_level: u32,
    weight: impl Fn(&QPoint) -> f64,
) -> Result<Csr<f64>> {
    let mut negative = None;
    let out = assemble_vector(space, int_level, |q, phi, _, k, m| {
        let wv = weight(q);
        if wv < 0.0 {
            negative = Some(wv);
        }
        for a in 0..k {
            for b in 0..k {
                let v = q.w * wv * phi[a] * phi[b];
                m[(2 * a) * 12 + 2 * b] += v;
                m[(2 * a + 1) * 12 + 2 * b + 1] += v;
            }
        }
    })?;
    if let Some(w) = negative {
        return Err(Error::InvalidArgument(format!("negative mass weight {w}")));
    }
    Ok(out)
}

/// Vector mass weighted by `|u|^2`.
pub fn weighted_vector_mass(space: &VectorSpace, u: &ComplexField) -> Result<Csr<f64>> {
    let ev = ScalarEval::new(u)?;
    weighted_vector_mass_with(space, u.level, |q| ev.at(q).0.norm_sqr())
}

/// `b(B, C) = int curl B curl C + div B div C`.
pub fn b_matrix(space: &VectorSpace) -> Result<Csr<f64>> {
    assemble_vector(space, space.level(), |q, _, dphi, k, m| {
        for a in 0..k {
            for c in 0..2 {
                let (ca, da) = curl_div(dphi[a], c);
                for b in 0..k {
                    for e in 0..2 {
                        let (cb, db) = curl_div(dphi[b], e);
                        m[(2 * a + c) * 12 + 2 * b + e] += q.w * (ca * cb + da * db);
                    }
                }
            }
        }
    })
}

/// Componentwise H1 seminorm matrix `int grad B_i : grad B_j`.
pub fn vector_stiffness(space: &VectorSpace) -> Result<Csr<f64>> {
    assemble_vector(space, space.level(), |q, _, dphi, k, m| {
        for a in 0..k {
            for b in 0..k {
                let v = q.w * (dphi[a][0] * dphi[b][0] + dphi[a][1] * dphi[b][1]);
                m[(2 * a) * 12 + 2 * b] += v;
                m[(2 * a + 1) * 12 + 2 * b + 1] += v;
            }
        }
    })
}

/// Supercurrent load `J_i = (1/kappa) int Re(i conj(u) grad u) . B_i`.
pub fn current_load(u: &ComplexField, kappa: f64, space: &VectorSpace) -> Result<Vec<f64>> {
    check_kappa(kappa)?;
    let ev = ScalarEval::new(u)?;
    assemble_vector_load(space, u.level, |q, phi, _, k, out| {
        let (v, d) = ev.at(q);
        let j = [
            -(v.conj() * d[0]).im / kappa,
            -(v.conj() * d[1]).im / kappa,
        ];
        for a in 0..k {
            out[2 * a] += q.w * j[0] * phi[a];
            out[2 * a + 1] += q.w * j[1] * phi[a];
        }
    })
}

/// External field load `L_i = int H curl B_i`, integrated on `int_level`.
pub fn external_load(
    h: &dyn Fn([f64; 2]) -> f64,
    space: &VectorSpace,
    int_level: u32,
) -> Result<Vec<f64>> {
    assemble_vector_load(space, int_level, |q, _, dphi, k, out| {
        let hv = q.w * h(q.x);
        for a in 0..k {
            out[2 * a] += hv * curl_div(dphi[a], 0).0;
            out[2 * a + 1] += hv * curl_div(dphi[a], 1).0;
        }
    })
}

type MatrixCache = Mutex<HashMap<(u8, u32, u8), Arc<Csr<f64>>>>;

/// Memoized field-independent matrix: `kind` 0 scalar mass, 1 scalar
/// stiffness, 2 vector mass, 3 curl-div, 4 vector stiffness.
fn cached(kind: u8, level: u32, degree: u8) -> Result<Arc<Csr<f64>>> {
    static CACHE: OnceLock<MatrixCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (kind, level, degree);
    if let Some(m) = cache.lock().unwrap().get(&key) {
        return Ok(m.clone());
    }
    let m = Arc::new(match kind {
        0 => scalar_mass(level)?,
        1 => scalar_stiffness(level)?,
        2 => vector_mass(&VectorSpace::new(level, degree)?)?,
        3 => b_matrix(&VectorSpace::new(level, degree)?)?,
        _ => vector_stiffness(&VectorSpace::new(level, degree)?)?,
    });
    cache.lock().unwrap().insert(key, m.clone());
    Ok(m)
}

pub fn shared_scalar_mass(level: u32) -> Result<Arc<Csr<f64>>> {
    cached(0, level, 0)
}
pub fn shared_scalar_stiffness(level: u32) -> Result<Arc<Csr<f64>>> {
    cached(1, level, 0)
}
pub fn shared_vector_mass(space: &VectorSpace) -> Result<Arc<Csr<f64>>> {
    cached(2, space.level(), space.degree())
}
pub fn shared_b_matrix(space: &VectorSpace) -> Result<Arc<Csr<f64>>> {
    cached(3, space.level(), space.degree())
}
pub fn shared_vector_stiffness(space: &VectorSpace) -> Result<Arc<Csr<f64>>> {
    cached(4, space.level(), space.degree())
}

pub fn assemble_scalar_mass(space: &ScalarSpace) -> Result<HermitianOperator> {
    Ok(HermitianOperator::new(
        scalar_mass(space.level())?.to_complex(),
        format!("scalar mass, level {}", space.level()),
    ))
}

pub fn assemble_covariant_form(
    space: &ScalarSpace,
    a: &VectorField,
    kappa: f64,
) -> Result<HermitianOperator> {
    Ok(HermitianOperator::new(
        covariant_matrix(space.level(), a, kappa)?,
        format!(
            "covariant form, level {}, A on P{} level {}, kappa {kappa}",
            space.level(),
            a.degree,
            a.level
        ),
    ))
}

pub fn assemble_b(space: &VectorSpace) -> Result<RealOperator> {
    Ok(RealOperator::new(
        b_matrix(space)?,
        format!("curl-div form, P{} level {}", space.degree(), space.level()),
    ))
}

/// Weighted vector mass with weight `|u|^2` of the given field.
pub fn assemble_weighted_vector_mass(space: &VectorSpace, u: &ComplexField) -> Result<RealOperator> {
    Ok(RealOperator::new(
        weighted_vector_mass(space, u)?,
        format!("|u|^2-weighted vector mass, P{} level {}", space.degree(), space.level()),
    ))
}

pub fn assemble_current_load(u: &ComplexField, kappa: f64, space: &VectorSpace) -> Result<Vec<f64>> {
    current_load(u, kappa, space)
}

pub fn assemble_external_load(h: &dyn Fn([f64; 2]) -> f64, space: &VectorSpace) -> Result<Vec<f64>> {
    external_load(h, space, space.level())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::dot;
    use std::f64::consts::PI;

    fn ones(level: u32) -> Vec<f64> {
        vec![1.0; shared_mesh(level).unwrap().num_nodes()]
    }

    #[test]
    fn mass_of_constant_is_area() {
        let m = scalar_mass(3).unwrap();
        let o = ones(3);
        assert!((dot(&o, &m.mul_vec(&o)) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mass_of_linear_function() {
        let mesh = shared_mesh(4).unwrap();
        let x: Vec<f64> = mesh.nodes().iter().map(|p| p[0]).collect();
        let m = scalar_mass(4).unwrap();
        assert!((dot(&x, &m.mul_vec(&x)) - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn covariant_form_with_zero_potential() {
        let kappa = 3.0;
        let a = VectorField::zeros(3, 2).unwrap();
        let k = covariant_matrix(3, &a, kappa).unwrap();
        let mesh = shared_mesh(3).unwrap();
        let x: Vec<Complex64> = mesh.nodes().iter().map(|p| Complex64::new(p[0], 0.0)).collect();
        let v = dot(&x, &k.mul_vec(&x)).re;
        assert!((v - 1.0 / 9.0).abs() < 1e-13);
        let o = vec![Complex64::new(1.0, 0.0); mesh.num_nodes()];
        assert!(dot(&o, &k.mul_vec(&o)).re.abs() < 1e-13);
    }

    #[test]
    fn covariant_form_constant_potential_interior() {
        // constant A is representable only away from the boundary; the
        // interpolant is exact on interior elements, so compare there
        let a = VectorField::interpolate(2, 1, |_| [0.3, -0.4]).unwrap();
        let k = covariant_matrix(2, &a, 5.0).unwrap();
        assert!(k.hermitian_defect() < 1e-14);
        let mesh = shared_mesh(2).unwrap();
        let o = vec![Complex64::new(1.0, 0.0); mesh.num_nodes()];
        let v = dot(&o, &k.mul_vec(&o)).re;
        let direct = {
            let ev = VectorEval::new(&a).unwrap();
            let mut s = 0.0;
            let mut pts = Vec::new();
            for t in 0..mesh.num_triangles() {
                element_points(&mesh, &mesh, t, &mut pts);
                for q in &pts {
                    let (av, _) = ev.at(q);
                    s += q.w * (av[0] * av[0] + av[1] * av[1]);
                }
            }
            s
        };
        assert!((v - direct).abs() < 1e-14);
        assert!(v < 0.25 && v > 0.0);
    }

    #[test]
    fn b_form_of_boundary_bubble() {
        for level in [1, 3] {
            let s = VectorSpace::new(level, 2).unwrap();
            let b = b_matrix(&s).unwrap();
            for f in [
                VectorField::interpolate(level, 2, |p| [0.0, p[1] * (1.0 - p[1])]).unwrap(),
                VectorField::interpolate(level, 2, |p| [p[0] * (1.0 - p[0]), 0.0]).unwrap(),
            ] {
                let c = f.free_values().unwrap();
                assert!((dot(&c, &b.mul_vec(&c)) - 1.0 / 3.0).abs() < 1e-13);
            }
            assert!(b.hermitian_defect() < 1e-13);
        }
    }

    #[test]
    fn vector_mass_beta_integral() {
        let s = VectorSpace::new(3, 2).unwrap();
        let m = vector_mass(&s).unwrap();
        let f = VectorField::interpolate(3, 2, |p| [0.0, p[1] * (1.0 - p[1])]).unwrap();
        let c = f.free_values().unwrap();
        assert!((dot(&c, &m.mul_vec(&c)) - 1.0 / 30.0).abs() < 1e-14);
        let u = ComplexField::constant(4, Complex64::new(0.6, 0.8)).unwrap();
        let w = weighted_vector_mass(&s, &u).unwrap();
        assert!((dot(&c, &w.mul_vec(&c)) - 1.0 / 30.0).abs() < 1e-14);
        let z = weighted_vector_mass(&s, &ComplexField::zeros(3).unwrap()).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        assert!(weighted_vector_mass_with(&s, 3, |_| -1.0).is_err());
    }

    #[test]
    fn current_load_vanishes_for_real_or_constant_u() {
        let s = VectorSpace::new(3, 2).unwrap();
        let real = ComplexField::interpolate(4, |p| Complex64::new(p[0] * p[1] - 0.3, 0.0)).unwrap();
        assert!(current_load(&real, 2.0, &s).unwrap().iter().all(|v| v.abs() < 1e-15));
        let c = ComplexField::constant(4, Complex64::new(0.2, -0.7)).unwrap();
        assert!(current_load(&c, 2.0, &s).unwrap().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn external_load_zero_field() {
        let s = VectorSpace::new(2, 1).unwrap();
        assert!(external_load(&|_| 0.0, &s, 2).unwrap().iter().all(|&v| v == 0.0));
        let h = |p: [f64; 2]| 10.0 * (PI * p[0]).sin() * (PI * p[1]).sin();
        let l = external_load(&h, &s, 4).unwrap();
        assert!(l.iter().any(|v| v.abs() > 1e-3));
    }
}
