//! Rate fitting and SVG rendering of an error table.

use gllod::io::ErrorRow;
use gllod::lab::{fit_rows, Norm, WindowOptions};
use gllod::plot::rates_svg;

fn main() -> gllod::Result<()> {
    let mut rows = Vec::new();
    for kappa in [6.0, 12.0] {
        for level in 2..7u32 {
            let h = 0.5f64.powi(level as i32);
            // cubic decay that flattens out at a floor on the finest level
            let e = (kappa * h).powi(3) + if level == 6 { 2e-3 } else { 0.0 };
            rows.push(ErrorRow {
                kappa,
                level,
                mesh_size: h,
                err_l2_u: e * h,
                err_h1k_u: e,
                err_l2_a: e,
                err_h1_a: e,
                err_energy: e * e,
            });
        }
    }
    for f in fit_rows(&rows, &WindowOptions::default()).iter().filter(|f| f.norm == Norm::H1kU) {
        println!("kappa {}: slope {:.3} over levels {:?}", f.kappa, f.slope, f.window);
    }
    let path = std::env::temp_dir().join("gllod-rates.svg");
    std::fs::write(&path, rates_svg(&rows, Norm::H1kU, &[3.0]))?;
    println!("wrote {}", path.display());
    Ok(())
}
