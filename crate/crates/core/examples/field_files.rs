//! GLF1 field files and CSV error tables.

use gllod::fem::{ComplexField, VectorField};
use gllod::io::{read_csv_file, read_scalar, read_vector, write_csv_file, write_scalar, write_vector, ErrorRow};
use num_complex::Complex64;

fn main() -> gllod::Result<()> {
    let dir = std::env::temp_dir().join("gllod-field-files");
    std::fs::create_dir_all(&dir)?;

    let u = ComplexField::interpolate(4, |x| Complex64::from_polar(x[0], 6.0 * x[1]))?;
    let a = VectorField::interpolate(4, 2, |x| [x[1].sin(), x[0].cos()])?;
    write_scalar(&dir.join("u.glf"), &u)?;
    write_vector(&dir.join("a.glf"), &a)?;
    assert_eq!(read_scalar(&dir.join("u.glf"))?, u);
    assert_eq!(read_vector(&dir.join("a.glf"))?, a);
    println!("fields written to {} and read back bit for bit", dir.display());

    let rows: Vec<ErrorRow> = (2..6)
        .map(|level| {
            let h = 0.5f64.powi(level as i32);
            ErrorRow {
                kappa: 6.0,
                level,
                mesh_size: h,
                err_l2_u: h.powi(4),
                err_h1k_u: h.powi(3),
                err_l2_a: h.powi(3),
                err_h1_a: h.powi(2),
                err_energy: h.powi(6),
            }
        })
        .collect();
    write_csv_file(&dir.join("rates.csv"), &rows)?;
    assert_eq!(read_csv_file(&dir.join("rates.csv"))?, rows);
    print!("{}", std::fs::read_to_string(dir.join("rates.csv"))?);
    Ok(())
}
