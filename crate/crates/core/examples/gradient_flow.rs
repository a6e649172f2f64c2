//! Energy-diminishing gradient flow with a multiscale space for u.

use gllod::flow::{run, FlowConfig, Init, USpace};
use gllod::model::ModelParams;

fn main() -> gllod::Result<()> {
    let p = ModelParams::model(6.0)?;
    let mut cfg = FlowConfig::new(USpace::Lod { level: 3, fine_level: 5, layers: 3 }, 5, 2);
    cfg.eps_tol = 1e-8;
    cfg.init = Init::Random { seed: 1, level: None };
    let state = run(&cfg, &p)?;
    for (n, e) in state.energy_history().iter().enumerate().step_by(5) {
        println!("step {n:3}: E_GL = {e:.10}");
    }
    println!("stopped after {} steps ({:?}), E_GL = {:.10}", state.n, state.terminated, state.energy_gl());
    for w in &state.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
