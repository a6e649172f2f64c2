//! Command-line front end: `solve`, `sweep`, `check`, `plot`, `info`.
//!
//! Exit codes: 0 success, 1 usage, 2 configuration, 3 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fem::VectorSpace;
use crate::flow::{run, Termination, USpace};
use crate::io;
use crate::lab::{sweep, Norm, RateReport};
use crate::lod::{resolution_check, worker_count, LodOptions};
use crate::mesh::DyadicMesh;
use crate::{check, plot};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "gllod", version, about = "Ginzburg-Landau minimizers with LOD spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the gradient flow; writes u.glf, a.glf and energy.csv.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a convergence sweep; writes rates.csv and fits.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the invariant suite.
    Check,
    /// Render an error table or an energy history to SVG.
    Plot {
        csv: PathBuf,
        /// Defaults to the input path with an .svg extension.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Error column: L2_u, H1k_u, L2_A, H1_A or energy.
        #[arg(long, default_value = "H1k_u")]
        norm: String,
        /// Reference slopes (default: rounded fitted slopes).
        #[arg(long)]
        guide: Vec<f64>,
    },
    /// Print the resolved configuration and problem sizes.
    Info {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut out = std::io::stdout().lock();
    match execute(cli.command, &mut out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::ConfigParse { .. } => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

fn load(path: &Path, output: Option<PathBuf>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(o) = output {
        cfg.output_dir = o;
    }
    Ok(cfg)
}

fn execute(cmd: Command, out: &mut impl Write) -> Result<i32> {
    match cmd {
        Command::Solve { config, output } => solve(&load(&config, output)?, out),
        Command::Sweep { config, output } => run_sweep(&load(&config, output)?, out),
        Command::Check => run_check(out),
        Command::Plot { csv, output, norm, guide } => {
            let norm = Norm::ALL
                .into_iter()
                .find(|n| n.name().eq_ignore_ascii_case(&norm))
                .ok_or_else(|| Error::Config(format!("unknown norm {norm:?}")))?;
            let target = output.unwrap_or_else(|| csv.with_extension("svg"));
            run_plot(&csv, &target, norm, &guide, out)
        }
        Command::Info { config } => info(&RunConfig::load(&config)?, out),
    }
}

pub fn solve(cfg: &RunConfig, out: &mut impl Write) -> Result<i32> {
    let p = cfg.params()?;
    let flow = cfg.flow();
    let state = run(&flow, &p)?;
    fs::create_dir_all(&cfg.output_dir)?;
    io::write_scalar(&cfg.output_dir.join("u.glf"), &state.u)?;
    io::write_vector(&cfg.output_dir.join("a.glf"), &state.a)?;
    let mut csv = Vec::new();
    io::write_energy_csv(&mut csv, &state.energies)?;
    fs::write(cfg.output_dir.join("energy.csv"), csv)?;
    for w in &state.warnings {
        writeln!(out, "warning: {w}")?;
    }
    writeln!(
        out,
        "steps {} E_GL {} termination {:?}",
        state.n,
        io::fmt_f64(state.energy_gl()),
        state.terminated
    )?;
    if state.terminated == Some(Termination::Converged) {
        Ok(EXIT_OK)
    } else {
        eprintln!("error: no convergence within {} steps (last energy change above {:e})", flow.max_steps, flow.eps_tol);
        Ok(EXIT_NUMERICAL)
    }
}

fn write_fits(path: &Path, report: &RateReport) -> Result<()> {
    let mut s = String::from("kappa,norm,slope,intercept,window\n");
    for f in &report.fits {
        let window: Vec<String> = f.window.iter().map(u32::to_string).collect();
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            io::fmt_f64(f.kappa),
            f.norm.name(),
            io::fmt_f64(f.slope),
            io::fmt_f64(f.intercept),
            window.join(";")
        ));
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn run_sweep(cfg: &RunConfig, out: &mut impl Write) -> Result<i32> {
    let spec = cfg.sweep_spec()?;
    let report = sweep(&spec)?;
    fs::create_dir_all(&cfg.output_dir)?;
    io::write_csv_file(&cfg.output_dir.join("rates.csv"), &report.rows)?;
    write_fits(&cfg.output_dir.join("fits.csv"), &report)?;
    for (kappa, e) in &report.references {
        writeln!(out, "reference kappa {kappa}: E_GL {}", io::fmt_f64(*e))?;
    }
    for f in &report.fits {
        writeln!(out, "kappa {} {}: slope {:.3} over levels {:?}", f.kappa, f.norm.name(), f.slope, f.window)?;
    }
    for (norm, gap) in &report.collapse {
        writeln!(out, "collapse {}: max relative gap {gap:.3}", norm.name())?;
    }
    for f in &report.failures {
        eprintln!("failed: kappa {} level {}: {}", f.kappa, f.level, f.message);
    }
    Ok(if report.failures.is_empty() { EXIT_OK } else { EXIT_NUMERICAL })
}

pub fn run_check(out: &mut impl Write) -> Result<i32> {
    let mut ok = true;
    for (name, r) in check::suite() {
        match r {
            Ok(o) => {
                ok &= o.passed;
                writeln!(out, "{o}")?;
            }
            Err(e) => {
                ok = false;
                writeln!(out, "FAIL {name}: {e}")?;
            }
        }
    }
    Ok(if ok { EXIT_OK } else { EXIT_NUMERICAL })
}

pub fn run_plot(csv: &Path, target: &Path, norm: Norm, guides: &[f64], out: &mut impl Write) -> Result<i32> {
    let text = fs::read_to_string(csv)?;
    let svg = if text.starts_with(io::ENERGY_HEADER) {
        plot::history_svg(&io::read_energy_csv(&text)?)
    } else {
        plot::rates_svg(&io::read_csv(&text)?, norm, guides)
    };
    fs::write(target, svg)?;
    writeln!(out, "wrote {}", target.display())?;
    Ok(EXIT_OK)
}

pub fn info(cfg: &RunConfig, out: &mut impl Write) -> Result<i32> {
    write!(out, "{}", cfg.render())?;
    let flow = cfg.flow();
    let field_level = flow.u_space.field_level();
    let nodes = |l: u32| -> Result<usize> { Ok(DyadicMesh::new(l)?.num_nodes()) };
    match flow.u_space {
        USpace::P1 { level } => writeln!(out, "# u: P1 on level {level}, {} complex dofs", nodes(level)?)?,
        USpace::Lod { level, fine_level, layers } => {
            writeln!(
                out,
                "# u: LOD on level {level} ({} complex dofs), fine level {fine_level} ({} nodes), {layers} layers",
                nodes(level)?,
                nodes(fine_level)?
            )?;
            let opts = LodOptions {
                layers,
                c_res: flow.lod_c_res,
                strict: false,
            };
            if let Some(w) = resolution_check(level, cfg.kappa, &opts)? {
                writeln!(out, "# warning: {w}")?;
            }
        }
    }
    let space = VectorSpace::new(flow.a_level, flow.a_degree)?;
    writeln!(out, "# A: P{} on level {}, {} free dofs", flow.a_degree, flow.a_level, space.dim())?;
    writeln!(out, "# u field level {field_level}, workers {}", worker_count())?;
    Ok(EXIT_OK)
}
