//! P1 and P2 spaces: interpolation, prolongation and assembled norms.

use gllod::fem::{ComplexField, VectorField, VectorSpace};
use gllod::model::{h1_norm_vector, l2_norm, l2_norm_vector};
use num_complex::Complex64;

fn main() -> gllod::Result<()> {
    let f = |x: [f64; 2]| Complex64::new(x[0] * x[1], (3.0 * x[0]).sin());
    let fine = ComplexField::interpolate(7, f)?;
    println!("P1 interpolation, L2 error against level 7:");
    for level in 2..6 {
        let coarse = ComplexField::interpolate(level, f)?.prolongate(7)?;
        let diff = ComplexField {
            level: 7,
            values: fine.values.iter().zip(&coarse.values).map(|(a, b)| a - b).collect(),
        };
        println!("  level {level}: {:.3e}", l2_norm(&diff)?);
    }

    for degree in [1u8, 2] {
        let space = VectorSpace::new(4, degree)?;
        let a = VectorField::interpolate(4, degree, |x| [x[1] * (1.0 - x[1]), x[0] * (1.0 - x[0])])?;
        println!(
            "P{degree} potential on level 4: {} free dofs, |A|_L2 = {:.6}, |A|_H1 = {:.6}",
            space.dim(),
            l2_norm_vector(&a)?,
            h1_norm_vector(&a)?
        );
    }
    Ok(())
}
