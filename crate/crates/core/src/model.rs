//! Two-dimensional Ginzburg-Landau energy, its first derivatives, gauge
//! operations, phase alignment and the kappa-weighted norms.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fem::assemble::{
    covariant_matrix, current_load, element_points, external_load, shared_b_matrix,
    shared_scalar_mass, shared_scalar_stiffness, shared_vector_mass, shared_vector_stiffness,
    weighted_scalar_mass, weighted_vector_mass, ScalarEval, VectorEval,
};
use crate::fem::field::{ComplexField, VectorField};
use crate::fem::space::{shared_mesh, VectorSpace};
use crate::sparse::dot;

/// External magnetic field `H(x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExternalField {
    /// `amplitude * sin(pi x1) sin(pi x2)`.
    Sine { amplitude: f64 },
    Constant(f64),
}

impl ExternalField {
    pub fn model() -> Self {
        ExternalField::Sine { amplitude: 10.0 }
    }

    pub fn zero() -> Self {
        ExternalField::Constant(0.0)
    }

    #[inline]
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match *self {
            ExternalField::Sine { amplitude } => amplitude * (PI * x[0]).sin() * (PI * x[1]).sin(),
            ExternalField::Constant(c) => c,
        }
    }

    /// Exact `||H||^2` over the unit square.
    pub fn norm_sq(&self) -> f64 {
        match *self {
            ExternalField::Sine { amplitude } => amplitude * amplitude / 4.0,
            ExternalField::Constant(c) => c * c,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub kappa: f64,
    pub field: ExternalField,
}

impl ModelParams {
    pub fn new(kappa: f64, field: ExternalField) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::Config(format!("kappa must be positive, got {kappa}")));
        }
        Ok(ModelParams { kappa, field })
    }

    /// Model problem with `H = 10 sin(pi x1) sin(pi x2)`.
    pub fn model(kappa: f64) -> Result<Self> {
        Self::new(kappa, ExternalField::model())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub condensation: f64,
    pub field: f64,
    pub div_penalty: f64,
    pub total_gl: f64,
    pub total: f64,
}

fn integration_level(u: &ComplexField, a: &VectorField) -> u32 {
    u.level.max(a.level)
}

/// Energy parts integrated on the finer of the two meshes.
pub fn energy(u: &ComplexField, a: &VectorField, p: &ModelParams) -> Result<EnergyBreakdown> {
    let ue = ScalarEval::new(u)?;
    let ae = VectorEval::new(a)?;
    let mesh = shared_mesh(integration_level(u, a))?;
    let ik = 1.0 / p.kappa;
    let mut e = EnergyBreakdown::default();
    let mut pts = Vec::new();
    for t in 0..mesh.num_triangles() {
        element_points(&mesh, &mesh, t, &mut pts);
        for q in &pts {
            let (v, d) = ue.at(q);
            let (av, jac) = ae.at(q);
            let cov = [
                Complex64::new(0.0, ik) * d[0] + v * av[0],
                Complex64::new(0.0, ik) * d[1] + v * av[1],
            ];
            let m = 1.0 - v.norm_sqr();
            let curl = jac[1][0] - jac[0][1];
            let div = jac[0][0] + jac[1][1];
            let h = p.field.eval(q.x);
            e.kinetic += q.w * (cov[0].norm_sqr() + cov[1].norm_sqr());
            e.condensation += q.w * m * m;
            e.field += q.w * (curl - h) * (curl - h);
            e.div_penalty += q.w * div * div;
        }
    }
    e.kinetic *= 0.5;
    e.condensation *= 0.25;
    e.field *= 0.5;
    e.div_penalty *= 0.5;
    e.total_gl = e.kinetic + e.condensation + e.field;
    e.total = e.total_gl + e.div_penalty;
    Ok(e)
}

/// Residual `r` with `Re(phi^H r) = dE/du [phi]` for every P1 basis `phi` on u's mesh.
pub fn grad_u(u: &ComplexField, a: &VectorField, p: &ModelParams) -> Result<Vec<Complex64>> {
    let k = covariant_matrix(u.level, a, p.kappa)?;
    let n = weighted_scalar_mass(u.level, u, -1.0)?;
    let mut r = k.mul_vec(&u.values);
    for (ri, ni) in r.iter_mut().zip(n.mul_complex(&u.values)) {
        *ri += ni;
    }
    Ok(r)
}

/// Residual over the free dofs of A's space with `r . c = dE/dA [B_c]`.
pub fn grad_a(u: &ComplexField, a: &VectorField, p: &ModelParams) -> Result<Vec<f64>> {
    let space = a.space()?;
    let coeffs = space.restrict(&a.values);
    let w = weighted_vector_mass(&space, u)?;
    let b = shared_b_matrix(&space)?;
    let j = current_load(u, p.kappa, &space)?;
    let field = p.field;
    let l = external_load(&|x| field.eval(x), &space, integration_level(u, a))?;
    let wa = w.mul_vec(&coeffs);
    let ba = b.mul_vec(&coeffs);
    Ok((0..coeffs.len()).map(|i| wa[i] + ba[i] + j[i] - l[i]).collect())
}

/// `(u e^{i kappa phi}, A + grad phi)` with `phi` a real P1 field on the
/// mesh of u (or coarser). The gradient is lifted into A's space by nodal
/// averaging of the elementwise constant gradients.
pub fn gauge_transform(
    u: &ComplexField,
    a: &VectorField,
    phi_level: u32,
    phi: &[f64],
    kappa: f64,
) -> Result<(ComplexField, VectorField)> {
    let pmesh = shared_mesh(phi_level)?;
    if phi.len() != pmesh.num_nodes() {
        return Err(Error::Dimension {
            expected: pmesh.num_nodes(),
            got: phi.len(),
        });
    }
    if phi_level > u.level {
        return Err(Error::LevelMismatch(format!(
            "gauge level {phi_level} finer than u level {}",
            u.level
        )));
    }
    let phic: Vec<Complex64> = phi.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let phi_u = ComplexField {
        level: phi_level,
        values: phic,
    }
    .prolongate(u.level)?;
    let new_u = ComplexField {
        level: u.level,
        values: u
            .values
            .iter()
            .zip(&phi_u.values)
            .map(|(v, f)| v * Complex64::from_polar(1.0, kappa * f.re))
            .collect(),
    };

    let space = a.space()?;
    let mut new_a = a.clone();
    let eps = 1e-9 * pmesh.mesh_size();
    let dirs = [(1.0, 0.3), (-1.0, -0.3), (0.3, 1.0), (-0.3, -1.0), (1.0, 1.1), (-1.1, -1.0), (1.0, -1.0), (-1.0, 1.0)];
    for node in 0..space.num_lagrange_nodes() {
        let x = space.lagrange_point(node);
        let mut tris: Vec<usize> = Vec::with_capacity(8);
        for (dx, dy) in dirs {
            let y = [x[0] + eps * dx, x[1] + eps * dy];
            if (0.0..=1.0).contains(&y[0]) && (0.0..=1.0).contains(&y[1]) {
                let t = pmesh.locate(y);
                if !tris.contains(&t) {
                    tris.push(t);
                }
            }
        }
        let mut g = [0.0; 2];
        for &t in &tris {
            let bg = pmesh.barycentric_gradients(t);
            let tri = pmesh.triangles()[t];
            for k in 0..3 {
                g[0] += phi[tri[k]] * bg[k][0];
                g[1] += phi[tri[k]] * bg[k][1];
            }
        }
        for c in 0..2 {
            if space.free_index(2 * node + c).is_some() {
                new_a.values[2 * node + c] += g[c] / tris.len() as f64;
            }
        }
    }
    Ok((new_u, new_a))
}

/// Rotation `e^{i omega} u` best matching `u_ref` in L2: `omega = arg int u_ref conj(u)`.
pub fn phase_align(u_ref: &ComplexField, u: &ComplexField) -> Result<(f64, ComplexField)> {
    if u_ref.level != u.level {
        return Err(Error::LevelMismatch(format!(
            "phase alignment needs equal levels, got {} and {}",
            u_ref.level, u.level
        )));
    }
    let m = shared_scalar_mass(u.level)?;
    let z = dot(&u.values, &m.mul_complex(&u_ref.values));
    let scale = (l2_norm(u_ref)? * l2_norm(u)?).max(f64::MIN_POSITIVE);
    if z.norm() <= 1e-14 * scale {
        return Err(Error::AlignmentUndefined);
    }
    let omega = z.arg();
    Ok((omega, u.scaled(Complex64::from_polar(1.0, omega))))
}

/// Complex L2 pairing `int a conj(b)`.
pub fn l2_pairing(a: &ComplexField, b: &ComplexField) -> Result<Complex64> {
    if a.level != b.level {
        return Err(Error::LevelMismatch("pairing needs equal levels".into()));
    }
    let m = shared_scalar_mass(a.level)?;
    Ok(dot(&b.values, &m.mul_complex(&a.values)))
}

pub fn l2_norm(u: &ComplexField) -> Result<f64> {
    let m = shared_scalar_mass(u.level)?;
    Ok(m.real_form(&u.values, &u.values).max(0.0).sqrt())
}

/// `||phi||_{H1k}^2 = kappa^-2 ||grad phi||^2 + ||phi||^2`.
pub fn h1k_norm(u: &ComplexField, kappa: f64) -> Result<f64> {
    let m = shared_scalar_mass(u.level)?;
    let s = shared_scalar_stiffness(u.level)?;
    let v = s.real_form(&u.values, &u.values) / (kappa * kappa) + m.real_form(&u.values, &u.values);
    Ok(v.max(0.0).sqrt())
}

fn vector_parts(a: &VectorField) -> Result<(Arc<crate::sparse::Csr<f64>>, Arc<crate::sparse::Csr<f64>>, Vec<f64>)> {
    let space: VectorSpace = a.space()?;
    Ok((
        shared_vector_mass(&space)?,
        shared_vector_stiffness(&space)?,
        space.restrict(&a.values),
    ))
}

pub fn l2_norm_vector(a: &VectorField) -> Result<f64> {
    let (m, _, c) = vector_parts(a)?;
    Ok(dot(&c, &m.mul_vec(&c)).max(0.0).sqrt())
}

/// `||B||_{H1}^2 = ||B||^2 + ||grad B||^2`.
pub fn h1_norm_vector(a: &VectorField) -> Result<f64> {
    let (m, s, c) = vector_parts(a)?;
    Ok((dot(&c, &m.mul_vec(&c)) + dot(&c, &s.mul_vec(&c))).max(0.0).sqrt())
}

/// Product norm `||(phi, B)||_{H1k x H1}`.
pub fn pair_norm(u: &ComplexField, a: &VectorField, kappa: f64) -> Result<f64> {
    Ok((h1k_norm(u, kappa)?.powi(2) + h1_norm_vector(a)?.powi(2)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(seed: u64, level: u32) -> (ComplexField, VectorField) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = ComplexField::interpolate(level, |_| Complex64::new(0.0, 0.0)).unwrap();
        let u = ComplexField {
            values: u
                .values
                .iter()
                .map(|_| Complex64::from_polar(rng.random_range(0.0..1.0), rng.random_range(-PI..PI)))
                .collect(),
            ..u
        };
        let space = VectorSpace::new(level, 2).unwrap();
        let c: Vec<f64> = (0..space.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        (u, VectorField::from_free(&space, &c))
    }

    #[test]
    fn energy_of_trivial_states() {
        let p = ModelParams::model(6.0).unwrap();
        let a = VectorField::zeros(4, 2).unwrap();
        let e0 = energy(&ComplexField::zeros(4).unwrap(), &a, &p).unwrap();
        assert!((e0.condensation - 0.25).abs() < 1e-14);
        assert!((e0.field - 12.5).abs() < 1e-6);
        let e1 = energy(&ComplexField::constant(4, Complex64::new(1.0, 0.0)).unwrap(), &a, &p).unwrap();
        assert!(e1.kinetic.abs() < 1e-15 && e1.condensation.abs() < 1e-15);
        assert!((e1.total_gl - 12.5).abs() < 1e-6);
    }

    #[test]
    fn phase_rotation_leaves_energy_unchanged() {
        let p = ModelParams::model(6.0).unwrap();
        let (u, a) = random_state(1, 3);
        let e = energy(&u, &a, &p).unwrap().total_gl;
        for w in [0.3, -2.0, 3.1] {
            let r = energy(&u.scaled(Complex64::from_polar(1.0, w)), &a, &p).unwrap().total_gl;
            assert!((e - r).abs() <= 1e-12 * (1.0 + e));
        }
    }

    #[test]
    fn gradients_vanish_at_trivial_states() {
        let p = ModelParams::new(4.0, ExternalField::zero()).unwrap();
        let a = VectorField::zeros(3, 1).unwrap();
        for u in [
            ComplexField::constant(3, Complex64::new(1.0, 0.0)).unwrap(),
            ComplexField::zeros(3).unwrap(),
        ] {
            assert!(grad_u(&u, &a, &p).unwrap().iter().all(|v| v.norm() < 1e-14));
            assert!(grad_a(&u, &a, &p).unwrap().iter().all(|v| v.abs() < 1e-14));
        }
        let pm = ModelParams::model(4.0).unwrap();
        let space = a.space().unwrap();
        let l = external_load(&|x| pm.field.eval(x), &space, 3).unwrap();
        let g = grad_a(&ComplexField::zeros(3).unwrap(), &a, &pm).unwrap();
        for (gi, li) in g.iter().zip(&l) {
            assert!((gi + li).abs() < 1e-14);
        }
    }

    #[test]
    fn finite_differences_match_gradients() {
        let p = ModelParams::model(3.0).unwrap();
        let (u, a) = random_state(5, 3);
        let (du, da) = random_state(6, 3);
        let gu = grad_u(&u, &a, &p).unwrap();
        let ga = grad_a(&u, &a, &p).unwrap();
        let dac = da.free_values().unwrap();
        let exact = dot(&du.values, &gu).re + dot(&dac, &ga);
        let fd = |t: f64| {
            let shift = |s: f64| {
                let uu = ComplexField {
                    level: u.level,
                    values: u.values.iter().zip(&du.values).map(|(x, y)| x + y * s).collect(),
                };
                let aa = VectorField {
                    values: a.values.iter().zip(&da.values).map(|(x, y)| x + y * s).collect(),
                    ..a.clone()
                };
                energy(&uu, &aa, &p).unwrap().total
            };
            (shift(t) - shift(-t)) / (2.0 * t)
        };
        let e1 = (fd(1e-3) - exact).abs();
        let e2 = (fd(5e-4) - exact).abs();
        assert!(e1 / e2 > 3.6, "ratio {}", e1 / e2);
    }

    #[test]
    fn phase_align_examples() {
        let (u, _) = random_state(2, 3);
        let (w, al) = phase_align(&u, &u).unwrap();
        assert!(w.abs() < 1e-14);
        assert_eq!(al.values.len(), u.values.len());
        let (w, al) = phase_align(&u, &u.scaled(Complex64::new(0.0, 1.0))).unwrap();
        assert!((w + PI / 2.0).abs() < 1e-12);
        assert!(al.values.iter().zip(&u.values).all(|(x, y)| (x - y).norm() < 1e-12));
        let (w, _) = phase_align(&u, &u.scaled(Complex64::from_polar(1.0, PI / 4.0))).unwrap();
        assert!((w + PI / 4.0).abs() < 1e-12);
        assert!(matches!(
            phase_align(&u, &ComplexField::zeros(3).unwrap()),
            Err(Error::AlignmentUndefined)
        ));
    }

    #[test]
    fn norms_of_simple_fields() {
        let c = ComplexField::constant(3, Complex64::new(0.6, -0.8)).unwrap();
        assert!((h1k_norm(&c, 5.0).unwrap() - 1.0).abs() < 1e-14);
        let x = ComplexField::interpolate(4, |p| Complex64::new(p[0], 0.0)).unwrap();
        assert!((h1k_norm(&x, 5.0).unwrap().powi(2) - (1.0 / 25.0 + 1.0 / 3.0)).abs() < 1e-14);
        let b = VectorField::interpolate(3, 2, |p| [0.0, p[1] * (1.0 - p[1])]).unwrap();
        assert!((l2_norm_vector(&b).unwrap().powi(2) - 1.0 / 30.0).abs() < 1e-14);
    }

    #[test]
    fn constant_gauge_is_phase_rotation() {
        let (u, a) = random_state(3, 3);
        let phi = vec![0.25; shared_mesh(2).unwrap().num_nodes()];
        let (gu, ga) = gauge_transform(&u, &a, 2, &phi, 4.0).unwrap();
        assert_eq!(ga.values, a.values);
        let rot = Complex64::from_polar(1.0, 1.0);
        assert!(gu.values.iter().zip(&u.values).all(|(x, y)| (x - y * rot).norm() < 1e-14));
    }
}
