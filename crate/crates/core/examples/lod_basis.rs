//! Corrected coarse basis: correctors live in the kernel of the coarse L2
//! projection, and localization error shrinks with the number of layers.

use std::sync::Arc;

use gllod::fem::assemble::covariant_matrix;
use gllod::fem::VectorField;
use gllod::lod::{build_corrector, build_projection, LodOptions};
use gllod::sparse::{dot, norm2};
use num_complex::Complex64;

fn main() -> gllod::Result<()> {
    let (coarse, fine, kappa) = (3, 5, 6.0);
    let proj = Arc::new(build_projection(coarse, fine)?);
    let a = VectorField::interpolate(fine, 2, |x| [x[1] * (1.0 - x[1]), -x[0] * (1.0 - x[0])])?;
    let k = covariant_matrix(fine, &a, kappa)?;
    let x: Vec<Complex64> = (0..proj.coarse_dim()).map(|i| Complex64::new(1.0, 0.1 * i as f64)).collect();

    let global = build_corrector(proj.clone(), &a, kappa, LodOptions { layers: 64, ..Default::default() })?;
    let v_global = global.basis.mul_vec(&x);
    println!("|pi_H C x| = {:.2e}", norm2(&proj.apply(&global.corrector.mul_vec(&x))));

    for layers in 1..=4 {
        let local = build_corrector(proj.clone(), &a, kappa, LodOptions { layers, ..Default::default() })?;
        let d: Vec<Complex64> = local.basis.mul_vec(&x).iter().zip(&v_global).map(|(p, q)| p - q).collect();
        let err = dot(&d, &k.mul_vec(&d)).re.sqrt();
        println!("layers {layers}: energy-norm distance to the global basis {err:.3e}");
    }
    Ok(())
}
