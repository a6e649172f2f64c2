//! Drive a run from a key = value configuration, as the command line does.

use gllod::cli;
use gllod::config::RunConfig;

const CONFIG: &str = "\
# no external field: u = 1, A = 0 is a minimizer
kappa = 6
field_amplitude = 0
u_level = 4
a_level = 4
fine_level = 4
lod = off
init = constant
init_value = 1
";

fn main() -> gllod::Result<()> {
    let mut cfg = RunConfig::parse(CONFIG)?;
    cfg.output_dir = std::env::temp_dir().join("gllod-config-solve");
    let mut out = std::io::stdout();
    cli::info(&cfg, &mut out)?;
    let code = cli::solve(&cfg, &mut out)?;
    print!("{}", std::fs::read_to_string(cfg.output_dir.join("energy.csv"))?);
    println!("exit code {code}");
    Ok(())
}
