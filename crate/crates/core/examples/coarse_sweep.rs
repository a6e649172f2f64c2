//! A small H-sweep against a fine P1 reference, with fitted rates.

use gllod::flow::{FlowConfig, Init, LodSchedule, USpace};
use gllod::lab::{sweep, SweepAxis, SweepSpec};

fn main() -> gllod::Result<()> {
    let fine = 5;
    let mut reference = FlowConfig::new(USpace::P1 { level: fine }, fine, 2);
    reference.init = Init::Random { seed: 1, level: Some(2) };
    reference.eps_tol = 1e-11;
    let mut point = FlowConfig::new(USpace::Lod { level: 1, fine_level: fine, layers: 8 }, fine, 2);
    point.eps_tol = 1e-11;
    point.lod_update = LodSchedule { warmup: 1, period: 100 };
    let mut spec = SweepSpec::new(SweepAxis::Coarse, vec![1, 2, 3], point, reference);
    spec.kappas = vec![3.0];

    let report = sweep(&spec)?;
    println!("H        L2(u)      H1k(u)     |dE|");
    for r in &report.rows {
        println!("{:<8} {:.3e}  {:.3e}  {:.3e}", r.mesh_size, r.err_l2_u, r.err_h1k_u, r.err_energy);
    }
    for f in &report.fits {
        println!("{:>6}: slope {:.2} over levels {:?}", f.norm.name(), f.slope, f.window);
    }
    Ok(())
}
