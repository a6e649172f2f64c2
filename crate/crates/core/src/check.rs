//! Invariant suite: symmetry, derivative, corrector, coercivity,
//! fixed-point and persistence checks on small problems.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fem::assemble::{covariant_matrix, shared_scalar_mass, shared_scalar_stiffness};
use crate::fem::{ComplexField, VectorField, VectorSpace};
use crate::flow::{run, FlowConfig, Init, USpace};
use crate::io::{self, ErrorRow};
use crate::lod::{build_corrector, build_projection, LodOptions};
use crate::model::{energy, grad_a, grad_u, ExternalField, ModelParams};
use crate::sparse::dot;

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn outcome(name: &'static str, passed: bool, detail: String) -> Outcome {
    Outcome { name, passed, detail }
}

/// Random u with nodal values in the unit disc and random bounded A.
pub fn random_state(rng: &mut ChaCha8Rng, level: u32, a_degree: u8) -> Result<(ComplexField, VectorField)> {
    let mut u = ComplexField::zeros(level)?;
    for v in &mut u.values {
        *v = C::from_polar(rng.random_range(0.0..1.0), rng.random_range(-PI..PI));
    }
    let space = VectorSpace::new(level, a_degree)?;
    let free: Vec<f64> = (0..space.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    Ok((u, VectorField::from_free(&space, &free)))
}

/// `|E_GL(e^{i w} u, A) - E_GL(u, A)| <= 1e-12 (1 + E_GL)` on random states.
pub fn phase_invariance(states: usize, rotations: usize, level: u32, kappa: f64, seed: u64) -> Result<Outcome> {
    let p = ModelParams::model(kappa)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..states {
        let (u, a) = random_state(&mut rng, level, 2)?;
        let e = energy(&u, &a, &p)?.total_gl;
        for _ in 0..rotations {
            let w = rng.random_range(-PI..PI);
            let r = energy(&u.scaled(C::from_polar(1.0, w)), &a, &p)?.total_gl;
            worst = worst.max((r - e).abs() / (1.0 + e));
        }
    }
    Ok(outcome(
        "phase invariance",
        worst <= 1e-12,
        format!("max relative energy change {worst:.2e} over {states}x{rotations} rotations"),
    ))
}

const DIRECTION_SCALE: f64 = 100.0;

/// Observed order of central differences of the stabilized energy against
/// the assembled gradients, along random directions.
pub fn gradient_consistency(states: usize, level: u32, kappa: f64, seed: u64) -> Result<Outcome> {
    let p = ModelParams::model(kappa)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps: Vec<f64> = (0..)
        .map(|k| 1e-3 * 0.5f64.powi(k))
        .take_while(|&t| t >= 1e-5)
        .collect();
    let mut worst = f64::INFINITY;
    for _ in 0..states {
        let (u, a) = random_state(&mut rng, level, 2)?;
        let (du, da) = random_state(&mut rng, level, 2)?;
        // large directions keep the t^2 truncation term above rounding down to t = 1e-5
        let du = du.scaled(C::new(DIRECTION_SCALE, 0.0));
        let da = VectorField {
            values: da.values.iter().map(|v| v * DIRECTION_SCALE).collect(),
            ..da
        };
        let exact = dot(&du.values, &grad_u(&u, &a, &p)?).re + dot(&da.free_values()?, &grad_a(&u, &a, &p)?);
        let at = |s: f64| -> Result<f64> {
            let us = ComplexField {
                level,
                values: u.values.iter().zip(&du.values).map(|(x, y)| x + y * s).collect(),
            };
            let as_ = VectorField {
                values: a.values.iter().zip(&da.values).map(|(x, y)| x + y * s).collect(),
                ..a.clone()
            };
            Ok(energy(&us, &as_, &p)?.total)
        };
        let mut errs = Vec::with_capacity(steps.len());
        for &t in &steps {
            errs.push(((at(t)? - at(-t)?) / (2.0 * t) - exact).abs());
        }
        let pts: Vec<(f64, f64)> = steps.iter().copied().zip(errs).collect();
        let order = crate::lab::fit_rate(&pts).unwrap_or(f64::NAN);
        worst = worst.min(order);
    }
    Ok(outcome(
        "gradient consistency",
        worst >= 1.9,
        format!("minimum observed order {worst:.3} over {states} states, steps 1e-3 to 1e-5"),
    ))
}

/// Global correctors on `(coarse, fine)`: `pi_H C phi = 0` and
/// `a(phi - C phi, w) = 0` for random detail functions `w`, for A = 0 and
/// a random bounded A.
pub fn corrector_correctness(coarse: u32, fine: u32, kappa: f64, tests: usize, seed: u64) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let proj = Arc::new(build_projection(coarse, fine)?);
    let (mut kernel, mut galerkin) = (0.0f64, 0.0f64);
    let (_, random_a) = random_state(&mut rng, fine, 2)?;
    for a in [VectorField::zeros(fine, 2)?, random_a] {
        let opts = LodOptions {
            layers: (1usize << fine) + 1,
            ..Default::default()
        };
        let lod = build_corrector(proj.clone(), &a, kappa, opts)?;
        let k = covariant_matrix(fine, &a, kappa)?;
        let m = shared_scalar_mass(fine)?;
        let l2 = |v: &[C]| dot(v, &m.mul_complex(v)).re.sqrt();
        for _ in 0..tests {
            let x: Vec<C> = (0..lod.dim())
                .map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let phi = proj.iota.mul_complex(&x);
            let cx = lod.corrector.mul_vec(&x);
            kernel = kernel.max(l2(&proj.project(&cx)) / l2(&phi));
            let v = lod.basis.mul_vec(&x);
            let w = proj.detail(&(0..proj.fine_dim())
                .map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect::<Vec<_>>());
            galerkin = galerkin.max(dot(&w, &k.mul_vec(&v)).re.abs());
        }
    }
    Ok(outcome(
        "corrector correctness",
        kernel <= 1e-10 && galerkin <= 1e-10,
        format!("max |pi_H C phi|/|phi| {kernel:.2e}, max |a(phi - C phi, w)| {galerkin:.2e}"),
    ))
}

/// Smallest `a(w, w) / |w|^2_{H1k}` over random detail functions.
pub fn coercivity_witness(coarse: u32, fine: u32, kappa: f64, samples: usize, seed: u64) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let proj = build_projection(coarse, fine)?;
    let (_, a) = random_state(&mut rng, fine, 2)?;
    let k = covariant_matrix(fine, &a, kappa)?;
    let m = shared_scalar_mass(fine)?;
    let s = shared_scalar_stiffness(fine)?;
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let raw: Vec<C> = (0..proj.fine_dim())
            .map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let w = proj.detail(&raw);
        let form = dot(&w, &k.mul_vec(&w)).re;
        let norm = dot(&w, &s.mul_complex(&w)).re / (kappa * kappa) + dot(&w, &m.mul_complex(&w)).re;
        worst = worst.min(form / norm);
    }
    Ok(outcome(
        "coercivity on W",
        worst >= 0.5,
        format!("min ratio {worst:.4} over {samples} samples (H = 2^-{coarse}, kappa = {kappa})"),
    ))
}

/// With H = 0, u = 1 and A = 0 the flow stops after one step at zero energy.
pub fn fixed_point(u_space: USpace, a_level: u32) -> Result<Outcome> {
    let p = ModelParams::new(6.0, ExternalField::zero())?;
    let mut cfg = FlowConfig::new(u_space, a_level, 2);
    cfg.init = Init::Constant(C::new(1.0, 0.0));
    let s = run(&cfg, &p)?;
    let e = s.energy_gl();
    Ok(outcome(
        "fixed point",
        s.n == 1 && e.abs() <= 1e-13,
        format!("{u_space:?}: stopped at n = {} with E_GL = {e:.2e}", s.n),
    ))
}

/// GLF1 and CSV round trips, and byte-identical output of repeated runs.
pub fn persistence(seed: u64) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut issues = Vec::new();
    for (level, degree) in [(2, 1), (3, 2)] {
        let (u, a) = random_state(&mut rng, level, degree)?;
        let ub = io::encode_scalar(&u)?;
        let ab = io::encode_vector(&a)?;
        let path = std::path::Path::new("<memory>");
        if io::decode(&ub, path)? != io::Field::Scalar(u) || io::decode(&ab, path)? != io::Field::Vector(a) {
            issues.push(format!("GLF1 round trip on level {level}"));
        }
    }
    let rows: Vec<ErrorRow> = (0..100)
        .map(|i| ErrorRow {
            kappa: rng.random_range(1.0..30.0),
            level: i,
            mesh_size: rng.random(),
            err_l2_u: rng.random::<f64>() * 1e-9,
            err_h1k_u: rng.random(),
            err_l2_a: rng.random(),
            err_h1_a: rng.random(),
            err_energy: rng.random::<f64>() * 1e-15,
        })
        .collect();
    let mut buf = Vec::new();
    io::write_csv(&mut buf, &rows)?;
    if io::read_csv(std::str::from_utf8(&buf).unwrap_or_default())? != rows {
        issues.push("CSV round trip".into());
    }
    let p = ModelParams::model(4.0)?;
    let mut cfg = FlowConfig::new(USpace::P1 { level: 3 }, 3, 2);
    cfg.max_steps = 20;
    cfg.init = Init::Random { seed, level: None };
    let bytes = |cfg: &FlowConfig| -> Result<Vec<u8>> {
        let s = run(cfg, &p)?;
        let mut out = io::encode_scalar(&s.u)?;
        out.extend(io::encode_vector(&s.a)?);
        io::write_energy_csv(&mut out, &s.energies)?;
        Ok(out)
    };
    if bytes(&cfg)? != bytes(&cfg)? {
        issues.push("repeated run differs".into());
    }
    let passed = issues.is_empty();
    Ok(outcome(
        "persistence",
        passed,
        if passed {
            "GLF1 and CSV round trips bitwise, repeated runs byte-identical".into()
        } else {
            issues.join("; ")
        },
    ))
}

/// The full suite at the default sizes.
pub fn suite() -> Vec<(&'static str, Result<Outcome>)> {
    vec![
        ("phase invariance", phase_invariance(10, 10, 4, 6.0, 1)),
        ("gradient consistency", gradient_consistency(5, 4, 6.0, 2)),
        ("corrector correctness", corrector_correctness(2, 4, 8.0, 20, 3)),
        ("coercivity on W", coercivity_witness(5, 6, 6.0, 50, 4)),
        ("fixed point", fixed_point(USpace::P1 { level: 4 }, 4)),
        ("persistence", persistence(5)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        for o in [
            phase_invariance(2, 3, 3, 6.0, 1).unwrap(),
            gradient_consistency(1, 3, 6.0, 2).unwrap(),
            corrector_correctness(1, 3, 4.0, 3, 3).unwrap(),
            coercivity_witness(3, 4, 4.0, 5, 4).unwrap(),
            fixed_point(USpace::P1 { level: 2 }, 2).unwrap(),
            persistence(1).unwrap(),
        ] {
            assert!(o.passed, "{o}");
        }
    }
}
