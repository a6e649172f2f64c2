//! Energy of simple states, phase invariance and phase alignment.

use gllod::fem::{ComplexField, VectorField};
use gllod::model::{energy, phase_align, ModelParams};
use num_complex::Complex64;

fn main() -> gllod::Result<()> {
    let p = ModelParams::model(6.0)?;
    let a = VectorField::zeros(5, 2)?;
    for (name, u) in [
        ("u = 0", ComplexField::zeros(5)?),
        ("u = 1", ComplexField::constant(5, Complex64::new(1.0, 0.0))?),
    ] {
        let e = energy(&u, &a, &p)?;
        println!(
            "{name}: kinetic {:.4} condensation {:.4} field {:.4} E_GL {:.4}",
            e.kinetic, e.condensation, e.field, e.total_gl
        );
    }

    let u = ComplexField::interpolate(5, |x| Complex64::new(x[0], x[1] - 0.5))?;
    let rotated = u.scaled(Complex64::from_polar(1.0, 1.2));
    let (e0, e1) = (energy(&u, &a, &p)?.total_gl, energy(&rotated, &a, &p)?.total_gl);
    println!("E_GL before and after a phase rotation: {e0:.15} {e1:.15}");
    let (omega, aligned) = phase_align(&u, &rotated)?;
    let gap = aligned.values.iter().zip(&u.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    println!("alignment angle {omega:.6}, max nodal gap after alignment {gap:.1e}");
    Ok(())
}
