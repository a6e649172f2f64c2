//! Linearized implicit Euler discretization of the L2 gradient flow.
//!
//! One step solves two decoupled linear systems built from step-n data:
//!
//! ```text
//! (M + tau (K_{A^n} + M_{|u^n|^2 - 1})) u^{n+1} = M u^n            (trial space of u)
//! (M_A + tau (S_b + M_{|u^n|^2})) A^{n+1} = M_A A^n - tau (J(u^n) - L_H)
//! ```
//!
//! In the multiscale case the first system is restricted through the basis
//! `B` and solved matrix-free by conjugate gradients; both systems use a
//! lagged Cholesky preconditioner that is refreshed when iteration counts
//! grow.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use faer::sparse::linalg::solvers::SymbolicLlt;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::assemble::{
    covariant_matrix, current_load, external_load, shared_b_matrix, shared_scalar_mass, shared_vector_mass,
    weighted_scalar_mass, weighted_vector_mass,
};
use crate::fem::{ComplexField, VectorField, VectorSpace};
use crate::io;
use crate::lod::{build_corrector, build_projection, update_corrector, LodOptions, LodSpace};
use crate::model::{energy, EnergyBreakdown, ModelParams};
use crate::solve::{pcg, solve_linear, symbolic_cholesky, Factor};
use crate::sparse::{Csr, HermitianOperator};

type C = Complex64;

/// Iteration count above which a lagged preconditioner is refactored.
const REFRESH_ITERATIONS: usize = 12;
const MAX_PCG_ITERATIONS: usize = 1000;

/// Trial space of the order parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum USpace {
    /// Plain P1 elements on `level`.
    P1 { level: u32 },
    /// Multiscale space on coarse `level` with correctors on `fine_level`.
    Lod { level: u32, fine_level: u32, layers: usize },
}

impl USpace {
    pub fn coarse_level(&self) -> u32 {
        match *self {
            USpace::P1 { level } | USpace::Lod { level, .. } => level,
        }
    }

    /// Level on which u is represented.
    pub fn field_level(&self) -> u32 {
        match *self {
            USpace::P1 { level } => level,
            USpace::Lod { fine_level, .. } => fine_level,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    /// Nodal values `r e^{i theta}` with `r` uniform in [0, 1] and `theta`
    /// uniform in [-pi, pi), drawn on `level` (default: coarse level of u).
    Random { seed: u64, level: Option<u32> },
    Constant(C),
    /// Start from stored fields; A defaults to zero when absent.
    File { u: PathBuf, a: Option<PathBuf> },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LodSchedule {
    /// Rebuild before every step while `n < warmup`.
    pub warmup: usize,
    /// Afterwards rebuild when `n` is a multiple of `period`.
    pub period: usize,
}

impl Default for LodSchedule {
    fn default() -> Self {
        LodSchedule {
            warmup: 10,
            period: 100,
        }
    }
}

impl LodSchedule {
    pub fn due(&self, n: usize) -> bool {
        n < self.warmup || (self.period > 0 && n % self.period == 0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub every: usize,
    pub dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub tau: f64,
    pub eps_tol: f64,
    pub max_steps: usize,
    pub u_space: USpace,
    pub a_level: u32,
    pub a_degree: u8,
    pub init: Init,
    pub lod_update: LodSchedule,
    pub lod_c_res: f64,
    pub lod_strict: bool,
    pub solver_tol: f64,
    pub checkpoint: Option<Checkpoint>,
}

impl FlowConfig {
    pub fn new(u_space: USpace, a_level: u32, a_degree: u8) -> Self {
        FlowConfig {
            tau: 1.0,
            eps_tol: 1e-10,
            max_steps: 10_000,
            u_space,
            a_level,
            a_degree,
            init: Init::Random { seed: 0, level: None },
            lod_update: LodSchedule::default(),
            lod_c_res: 1.0,
            lod_strict: false,
            solver_tol: 1e-12,
            checkpoint: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.eps_tol > 0.0) {
            return Err(Error::Config(format!("eps_tol must be positive, got {}", self.eps_tol)));
        }
        if !(self.solver_tol > 0.0 && self.solver_tol < 1.0) {
            return Err(Error::Config(format!("solver tolerance {} not in (0, 1)", self.solver_tol)));
        }
        if self.a_degree != 1 && self.a_degree != 2 {
            return Err(Error::Config(format!("A degree {} not in {{1,2}}", self.a_degree)));
        }
        if let USpace::Lod { level, fine_level, .. } = self.u_space {
            if level > fine_level || self.a_level > fine_level {
                return Err(Error::Config(format!(
                    "fine level {fine_level} must be the finest (u level {level}, A level {})",
                    self.a_level
                )));
            }
        }
        if let Init::Random { level: Some(l), .. } = self.init {
            if l > self.u_space.field_level() {
                return Err(Error::Config(format!("random init level {l} finer than the u field level")));
            }
        }
        if let Some(c) = &self.checkpoint {
            if c.every == 0 {
                return Err(Error::Config("checkpoint interval must be positive".into()));
            }
        }
        Ok(())
    }

    fn lod_options(&self) -> LodOptions {
        let layers = match self.u_space {
            USpace::Lod { layers, .. } => layers,
            USpace::P1 { .. } => 0,
        };
        LodOptions {
            layers,
            c_res: self.lod_c_res,
            strict: self.lod_strict,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxSteps,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats {
    pub u_iterations: usize,
    pub a_iterations: usize,
    pub lod_rebuilt: bool,
}

#[derive(Clone, Default)]
struct Cache {
    u_precond: Option<Arc<Factor<C>>>,
    u_stale: bool,
    a_symbolic: Option<Arc<SymbolicLlt<usize>>>,
    a_precond: Option<Arc<Factor<f64>>>,
    a_stale: bool,
    external: Option<Arc<Vec<f64>>>,
}

#[derive(Clone)]
pub struct FlowState {
    pub n: usize,
    /// Order parameter on its field level (the fine level for the multiscale space).
    pub u: ComplexField,
    pub a: VectorField,
    /// Energies of the iterates `0..=n`.
    pub energies: Vec<EnergyBreakdown>,
    pub lod: Option<LodSpace>,
    /// Multiscale coefficients of `u` when it lies in the current space.
    pub coeffs: Option<Vec<C>>,
    pub terminated: Option<Termination>,
    pub stats: Vec<StepStats>,
    pub warnings: Vec<String>,
    cache: Cache,
}

impl std::fmt::Debug for FlowState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FlowState")
            .field("n", &self.n)
            .field("energy", &self.energies.last().map(|e| e.total_gl))
            .field("terminated", &self.terminated)
            .finish()
    }
}

impl FlowState {
    pub fn energy_gl(&self) -> f64 {
        self.energies.last().map_or(f64::NAN, |e| e.total_gl)
    }

    /// The total GL energy of every iterate.
    pub fn energy_history(&self) -> Vec<f64> {
        self.energies.iter().map(|e| e.total_gl).collect()
    }
}

fn random_field(level: u32, seed: u64) -> Result<ComplexField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = crate::fem::shared_mesh(level)?.num_nodes();
    let values = (0..n)
        .map(|_| {
            let r: f64 = rng.random();
            let theta = rng.random_range(-PI..PI);
            C::from_polar(r, theta)
        })
        .collect();
    Ok(ComplexField { level, values })
}

/// Transfers a field between nested levels: exact when refining, nodal
/// sampling when coarsening.
pub fn transfer_scalar(u: &ComplexField, level: u32) -> Result<ComplexField> {
    if level >= u.level {
        u.prolongate(level)
    } else {
        ComplexField::interpolate(level, |x| u.eval(x))
    }
}

pub fn transfer_vector(a: &VectorField, level: u32, degree: u8) -> Result<VectorField> {
    if level >= a.level && degree >= a.degree {
        a.prolongate_to(level, degree)
    } else {
        VectorField::interpolate(level, degree, |x| a.eval(x))
    }
}

pub fn init_state(cfg: &FlowConfig, p: &ModelParams) -> Result<FlowState> {
    cfg.validate()?;
    let level = cfg.u_space.field_level();
    let a = VectorField::zeros(cfg.a_level, cfg.a_degree)?;
    let u = match &cfg.init {
        Init::Random { seed, level: l } => {
            let l = l.unwrap_or(cfg.u_space.coarse_level()).min(level);
            random_field(l, *seed)?.prolongate(level)?
        }
        Init::Constant(c) => ComplexField::constant(level, *c)?,
        Init::File { u, a: a_path } => {
            let a = match a_path {
                Some(path) => io::read_vector(path)?,
                None => a,
            };
            return state_from_fields(cfg, p, &io::read_scalar(u)?, &a);
        }
    };
    state_from_fields(cfg, p, &u, &a)
}

/// Initial state from given fields, transferred to the levels of `cfg`.
pub fn state_from_fields(cfg: &FlowConfig, p: &ModelParams, u: &ComplexField, a: &VectorField) -> Result<FlowState> {
    cfg.validate()?;
    let u = transfer_scalar(u, cfg.u_space.field_level())?;
    let a = transfer_vector(a, cfg.a_level, cfg.a_degree)?;
    if !u.is_finite() || a.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("initial state is not finite".into()));
    }
    let e0 = energy(&u, &a, p)?;
    Ok(FlowState {
        n: 0,
        u,
        a,
        energies: vec![e0],
        lod: None,
        coeffs: None,
        terminated: None,
        stats: Vec::new(),
        warnings: Vec::new(),
        cache: Cache::default(),
    })
}

fn indefinite(context: &str, tau: f64) -> Error {
    Error::Singular {
        context: format!("{context}; the system may be indefinite for tau = {tau}, try a smaller step size"),
    }
}

/// Fine matrix `M + tau (K_A + M_{|u|^2 - 1})` on `level`.
fn u_matrix(level: u32, u: &ComplexField, a: &VectorField, kappa: f64, tau: f64) -> Result<Csr<C>> {
    let m = shared_scalar_mass(level)?;
    let k = covariant_matrix(level, a, kappa)?;
    let n = weighted_scalar_mass(level, u, -1.0)?;
    let one = C::new(1.0, 0.0);
    let t = C::new(tau, 0.0);
    let kn = k.linear_combination(t, &n.to_complex(), t)?;
    m.to_complex().linear_combination(one, &kn, one)
}

struct USolve {
    u: ComplexField,
    coeffs: Option<Vec<C>>,
    iterations: usize,
    precond: Option<Arc<Factor<C>>>,
}

fn solve_u(state: &FlowState, cfg: &FlowConfig, p: &ModelParams) -> Result<USolve> {
    let level = state.u.level;
    let f = u_matrix(level, &state.u, &state.a, p.kappa, cfg.tau)?;
    let mass = shared_scalar_mass(level)?;
    let mu = mass.mul_complex(&state.u.values);
    let Some(lod) = &state.lod else {
        let op = HermitianOperator::new(f, "order parameter update");
        let x = solve_linear(&op, &mu, cfg.solver_tol).map_err(|e| match e {
            Error::Singular { context } => indefinite(&context, cfg.tau),
            e => e,
        })?;
        return Ok(USolve {
            u: ComplexField { level, values: x },
            coeffs: None,
            iterations: 1,
            precond: None,
        });
    };
    let rhs = lod.restrict(&mu);
    let mut x = match &state.coeffs {
        Some(c) => c.clone(),
        None => lod.projection.apply(&state.u.values),
    };
    let apply = |v: &[C]| lod.restrict(&f.mul_vec(&lod.basis.mul_vec(v)));
    let fresh = || -> Result<Arc<Factor<C>>> {
        let s = f.congruence(&lod.basis);
        Factor::cholesky(&s, "multiscale order parameter system")
            .map(Arc::new)
            .map_err(|_| indefinite("multiscale order parameter system", cfg.tau))
    };
    let mut precond = match (&state.cache.u_precond, state.cache.u_stale) {
        (Some(pc), false) => pc.clone(),
        _ => fresh()?,
    };
    let start = x.clone();
    let stats = match pcg(apply, |r| precond.solve(r), &rhs, &mut x, cfg.solver_tol, MAX_PCG_ITERATIONS) {
        Ok(s) => s,
        Err(_) => {
            precond = fresh()?;
            x = start;
            pcg(apply, |r| precond.solve(r), &rhs, &mut x, cfg.solver_tol, MAX_PCG_ITERATIONS).map_err(|e| match e {
                Error::Singular { context } => indefinite(&context, cfg.tau),
                e => e,
            })?
        }
    };
    Ok(USolve {
        u: lod.to_fine(&x),
        coeffs: Some(x),
        iterations: stats.iterations,
        precond: Some(precond),
    })
}

struct ASolve {
    a: VectorField,
    iterations: usize,
    symbolic: Arc<SymbolicLlt<usize>>,
    precond: Arc<Factor<f64>>,
    external: Arc<Vec<f64>>,
}

fn solve_a(state: &FlowState, cfg: &FlowConfig, p: &ModelParams) -> Result<ASolve> {
    let space: VectorSpace = state.a.space()?;
    let int_level = state.u.level.max(state.a.level);
    let external = match &state.cache.external {
        Some(l) => l.clone(),
        None => {
            let field = p.field;
            Arc::new(external_load(&|x| field.eval(x), &space, int_level)?)
        }
    };
    let m = shared_vector_mass(&space)?;
    let b = shared_b_matrix(&space)?;
    let w = weighted_vector_mass(&space, &state.u)?;
    let g = b.linear_combination(cfg.tau, &w, cfg.tau)?.linear_combination(1.0, &m, 1.0)?;
    let coeffs = space.restrict(&state.a.values);
    let j = current_load(&state.u, p.kappa, &space)?;
    let ma = m.mul_vec(&coeffs);
    let rhs: Vec<f64> = (0..coeffs.len())
        .map(|i| ma[i] - cfg.tau * (j[i] - external[i]))
        .collect();
    let symbolic = match &state.cache.a_symbolic {
        Some(s) => s.clone(),
        None => Arc::new(symbolic_cholesky(&g)?),
    };
    let fresh = || -> Result<Arc<Factor<f64>>> {
        Factor::cholesky_with(&symbolic, &g, "vector potential system").map(Arc::new)
    };
    let mut precond = match (&state.cache.a_precond, state.cache.a_stale) {
        (Some(pc), false) => pc.clone(),
        _ => fresh()?,
    };
    let mut x = coeffs.clone();
    let stats = match pcg(|v| g.mul_vec(v), |r| precond.solve(r), &rhs, &mut x, cfg.solver_tol, MAX_PCG_ITERATIONS) {
        Ok(s) => s,
        Err(_) => {
            precond = fresh()?;
            x = coeffs;
            pcg(|v| g.mul_vec(v), |r| precond.solve(r), &rhs, &mut x, cfg.solver_tol, MAX_PCG_ITERATIONS)?
        }
    };
    Ok(ASolve {
        a: VectorField::from_free(&space, &x),
        iterations: stats.iterations,
        symbolic,
        precond,
        external,
    })
}

/// Rebuilds the multiscale space from the current potential when the schedule asks for it.
fn refresh_space(state: &mut FlowState, cfg: &FlowConfig, p: &ModelParams) -> Result<bool> {
    let USpace::Lod { level, fine_level, .. } = cfg.u_space else {
        return Ok(false);
    };
    if state.lod.is_some() && !cfg.lod_update.due(state.n) {
        return Ok(false);
    }
    let space = match &state.lod {
        Some(old) => update_corrector(old, &state.a)?,
        None => {
            let proj = Arc::new(build_projection(level, fine_level)?);
            let s = build_corrector(proj, &state.a, p.kappa, cfg.lod_options())?;
            state.warnings.extend(s.warnings.iter().cloned());
            s
        }
    };
    state.lod = Some(space);
    state.cache.u_stale = true;
    Ok(true)
}

/// One flow step from `state`.
pub fn step(state: &FlowState, cfg: &FlowConfig, p: &ModelParams) -> Result<FlowState> {
    let mut next = state.clone();
    let rebuilt = refresh_space(&mut next, cfg, p)?;
    let (us, as_) = std::thread::scope(|s| {
        let a_job = s.spawn(|| solve_a(&next, cfg, p));
        let u = solve_u(&next, cfg, p);
        (u, a_job.join().expect("vector potential solve"))
    });
    let (us, as_) = (us?, as_?);
    if !us.u.is_finite() || as_.a.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite iterate at step {}", state.n + 1)));
    }
    next.u = us.u;
    next.coeffs = us.coeffs;
    next.a = as_.a;
    next.n += 1;
    next.energies.push(energy(&next.u, &next.a, p)?);
    next.stats.push(StepStats {
        u_iterations: us.iterations,
        a_iterations: as_.iterations,
        lod_rebuilt: rebuilt,
    });
    next.cache.u_stale = us.iterations > REFRESH_ITERATIONS;
    next.cache.u_precond = us.precond;
    next.cache.a_stale = as_.iterations > REFRESH_ITERATIONS;
    next.cache.a_symbolic = Some(as_.symbolic);
    next.cache.a_precond = Some(as_.precond);
    next.cache.external = Some(as_.external);
    Ok(next)
}

fn write_checkpoint(state: &FlowState, c: &Checkpoint) -> Result<()> {
    std::fs::create_dir_all(&c.dir)?;
    io::write_scalar(&c.dir.join(format!("step{:06}_u.glf", state.n)), &state.u)?;
    io::write_vector(&c.dir.join(format!("step{:06}_a.glf", state.n)), &state.a)
}

/// Iterates from `state` until the energy increment drops to `eps_tol` or
/// `max_steps` is reached.
pub fn run_from(mut state: FlowState, cfg: &FlowConfig, p: &ModelParams) -> Result<FlowState> {
    cfg.validate()?;
    while state.n < cfg.max_steps {
        state = step(&state, cfg, p)?;
        if let Some(c) = &cfg.checkpoint {
            if state.n % c.every == 0 {
                write_checkpoint(&state, c)?;
            }
        }
        let k = state.energies.len();
        let de = (state.energies[k - 1].total_gl - state.energies[k - 2].total_gl).abs();
        if de <= cfg.eps_tol {
            state.terminated = Some(Termination::Converged);
            return Ok(state);
        }
    }
    state.terminated = Some(Termination::MaxSteps);
    Ok(state)
}

pub fn run(cfg: &FlowConfig, p: &ModelParams) -> Result<FlowState> {
    run_from(init_state(cfg, p)?, cfg, p)
}
