//! Convergence experiments: reference runs, phase-aligned errors, log-log
//! rate fits and kappa-collapse checks.

use std::path::{Path, PathBuf};
use std::thread;

use crate::error::{Error, Result};
use crate::fem::{ComplexField, VectorField};
use crate::flow::{run, run_from, state_from_fields, FlowConfig, Termination, USpace};
use crate::io::{self, ErrorRow};
use crate::lod::worker_count;
use crate::model::{energy, h1_norm_vector, h1k_norm, l2_norm, l2_norm_vector, phase_align, ExternalField, ModelParams};

/// A converged flow run used as the exact solution of a sweep.
#[derive(Clone, Debug)]
pub struct Reference {
    pub kappa: f64,
    pub config: FlowConfig,
    pub u: ComplexField,
    pub a: VectorField,
    pub energy_gl: f64,
    pub steps: usize,
    /// FNV-1a hash of the model parameters and flow configuration.
    pub hash: u64,
}

/// 64-bit FNV-1a, used to key stored references.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

pub fn config_hash(p: &ModelParams, cfg: &FlowConfig) -> u64 {
    fnv1a(format!("{p:?}|{cfg:?}").as_bytes())
}

fn reference_paths(dir: &Path, hash: u64) -> (PathBuf, PathBuf, PathBuf) {
    let stem = format!("ref_{hash:016x}");
    (
        dir.join(format!("{stem}_u.glf")),
        dir.join(format!("{stem}_a.glf")),
        dir.join(format!("{stem}.txt")),
    )
}

/// Runs (or loads from `store`) the converged reference for `cfg`.
pub fn run_reference(p: &ModelParams, cfg: &FlowConfig, store: Option<&Path>) -> Result<Reference> {
    let hash = config_hash(p, cfg);
    if let Some(dir) = store {
        let (up, ap, meta) = reference_paths(dir, hash);
        if up.exists() && ap.exists() && meta.exists() {
            let u = io::read_scalar(&up)?;
            let a = io::read_vector(&ap)?;
            let steps = std::fs::read_to_string(&meta)?
                .lines()
                .find_map(|l| l.strip_prefix("steps=").and_then(|v| v.trim().parse().ok()))
                .unwrap_or(0);
            let energy_gl = energy(&u, &a, p)?.total_gl;
            return Ok(Reference {
                kappa: p.kappa,
                config: cfg.clone(),
                u,
                a,
                energy_gl,
                steps,
                hash,
            });
        }
    }
    let state = run(cfg, p)?;
    if state.terminated != Some(Termination::Converged) {
        return Err(Error::Numerical(format!(
            "reference for kappa = {} did not converge in {} steps",
            p.kappa, cfg.max_steps
        )));
    }
    let r = Reference {
        kappa: p.kappa,
        config: cfg.clone(),
        energy_gl: state.energy_gl(),
        steps: state.n,
        u: state.u,
        a: state.a,
        hash,
    };
    if let Some(dir) = store {
        std::fs::create_dir_all(dir)?;
        let (up, ap, meta) = reference_paths(dir, hash);
        io::write_scalar(&up, &r.u)?;
        io::write_vector(&ap, &r.a)?;
        std::fs::write(
            meta,
            format!("kappa={}\nsteps={}\nenergy_gl={}\nconfig={:?}\n", r.kappa, r.steps, io::fmt_f64(r.energy_gl), cfg),
        )?;
    }
    Ok(r)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorRecord {
    pub l2_u: f64,
    pub h1k_u: f64,
    pub l2_a: f64,
    pub h1_a: f64,
    pub energy: f64,
}

fn difference(a: &ComplexField, b: &ComplexField) -> ComplexField {
    ComplexField {
        level: a.level,
        values: a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect(),
    }
}

/// Errors of a candidate pair against the reference after prolongation
/// and phase alignment of u.
pub fn compute_errors(u: &ComplexField, a: &VectorField, energy_gl: f64, reference: &Reference) -> Result<ErrorRecord> {
    if u.level > reference.u.level || a.level > reference.a.level || a.degree > reference.a.degree {
        return Err(Error::LevelMismatch(format!(
            "candidate (u level {}, A level {} degree {}) is not nested in the reference (u level {}, A level {} degree {})",
            u.level, a.level, a.degree, reference.u.level, reference.a.level, reference.a.degree
        )));
    }
    let uf = u.prolongate(reference.u.level)?;
    let (_, aligned) = phase_align(&reference.u, &uf)?;
    let du = difference(&reference.u, &aligned);
    let af = a.prolongate_to(reference.a.level, reference.a.degree)?;
    let da = VectorField {
        level: af.level,
        degree: af.degree,
        values: reference.a.values.iter().zip(&af.values).map(|(x, y)| x - y).collect(),
    };
    Ok(ErrorRecord {
        l2_u: l2_norm(&du)?,
        h1k_u: h1k_norm(&du, reference.kappa)?,
        l2_a: l2_norm_vector(&da)?,
        h1_a: h1_norm_vector(&da)?,
        energy: (energy_gl - reference.energy_gl).abs(),
    })
}

/// Least-squares line through `(log size, log error)`: `(slope, intercept)`.
pub fn fit_line(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(format!("rate fit needs at least 2 points, got {}", points.len())));
    }
    if let Some(&(h, e)) = points.iter().find(|(h, e)| !(*h > 0.0 && *e > 0.0)) {
        return Err(Error::InvalidArgument(format!("rate fit needs positive data, got ({h}, {e})")));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("rate fit needs distinct mesh sizes".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<f64> {
    fit_line(points).map(|f| f.0)
}

/// Thresholds of the asymptotic-window heuristic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowOptions {
    /// Points with error above this multiple of the coarsest error are pre-asymptotic.
    pub pre_asymptotic: f64,
    /// Points with error below this multiple of a detected floor are stagnated.
    pub floor_factor: f64,
    /// A floor is detected when the finest segment's local slope is below
    /// this fraction of the steepest earlier segment.
    pub stagnation: f64,
}

impl Default for WindowOptions {
    fn default() -> Self {
        WindowOptions {
            pre_asymptotic: 0.5,
            floor_factor: 3.0,
            stagnation: 1.0 / 3.0,
        }
    }
}

/// Indices (into `points`, ordered coarse to fine) of the asymptotic window.
///
/// If fewer than two points survive both cuts, the floor cut is dropped,
/// then the whole curve is used.
pub fn asymptotic_window(points: &[(f64, f64)], opts: &WindowOptions) -> Vec<usize> {
    let n = points.len();
    let all: Vec<usize> = (0..n).collect();
    if n < 3 {
        return all;
    }
    let local = |i: usize| (points[i].1 / points[i + 1].1).ln() / (points[i].0 / points[i + 1].0).ln();
    let steepest = (0..n - 2).map(local).fold(f64::NEG_INFINITY, f64::max);
    let floor = (steepest > 0.0 && local(n - 2) < opts.stagnation * steepest).then(|| points[n - 1].1);
    let e0 = points[0].1;
    let pre: Vec<usize> = all.iter().copied().filter(|&i| points[i].1 <= opts.pre_asymptotic * e0).collect();
    let both: Vec<usize> = pre
        .iter()
        .copied()
        .filter(|&i| floor.is_none_or(|f| points[i].1 >= opts.floor_factor * f))
        .collect();
    [both, pre].into_iter().find(|w| w.len() >= 2).unwrap_or(all)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Norm {
    L2U,
    H1kU,
    L2A,
    H1A,
    Energy,
}

impl Norm {
    pub const ALL: [Norm; 5] = [Norm::L2U, Norm::H1kU, Norm::L2A, Norm::H1A, Norm::Energy];

    pub fn of(self, r: &ErrorRow) -> f64 {
        match self {
            Norm::L2U => r.err_l2_u,
            Norm::H1kU => r.err_h1k_u,
            Norm::L2A => r.err_l2_a,
            Norm::H1A => r.err_h1_a,
            Norm::Energy => r.err_energy,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Norm::L2U => "L2_u",
            Norm::H1kU => "H1k_u",
            Norm::L2A => "L2_A",
            Norm::H1A => "H1_A",
            Norm::Energy => "energy",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    /// Coarse level of u.
    Coarse,
    /// Level of the vector potential.
    Potential,
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub levels: Vec<u32>,
    pub kappas: Vec<f64>,
    pub field: ExternalField,
    /// Template for the sweep points; the swept level is overwritten.
    pub point: FlowConfig,
    /// Reference configuration (kappa-independent).
    pub reference: FlowConfig,
    /// Start every sweep point from the reference fields.
    pub warm_start: bool,
    pub window: WindowOptions,
    /// Directory for stored references.
    pub store: Option<PathBuf>,
    pub workers: usize,
}

impl SweepSpec {
    pub fn new(axis: SweepAxis, levels: Vec<u32>, point: FlowConfig, reference: FlowConfig) -> Self {
        SweepSpec {
            axis,
            levels,
            kappas: vec![6.0],
            field: ExternalField::model(),
            point,
            reference,
            warm_start: true,
            window: WindowOptions::default(),
            store: None,
            workers: worker_count(),
        }
    }

    /// Flow configuration of the point at `level`.
    pub fn point_config(&self, level: u32) -> FlowConfig {
        let mut cfg = self.point.clone();
        match self.axis {
            SweepAxis::Coarse => {
                cfg.u_space = match cfg.u_space {
                    USpace::P1 { .. } => USpace::P1 { level },
                    USpace::Lod { fine_level, layers, .. } => USpace::Lod { level, fine_level, layers },
                }
            }
            SweepAxis::Potential => cfg.a_level = level,
        }
        cfg
    }

    fn check_nesting(&self) -> Result<()> {
        let r = &self.reference;
        for &l in &self.levels {
            let c = self.point_config(l);
            c.validate()?;
            let finer = c.u_space.field_level() <= r.u_space.field_level()
                && c.a_level <= r.a_level
                && c.a_degree <= r.a_degree;
            let strictly = match self.axis {
                SweepAxis::Coarse => c.u_space.coarse_level() < r.u_space.coarse_level(),
                SweepAxis::Potential => c.a_level < r.a_level,
            };
            if !finer || !strictly {
                return Err(Error::Config(format!("sweep level {l} is not strictly coarser than the reference")));
            }
        }
        Ok(())
    }

    fn mesh_size(level: u32) -> f64 {
        1.0 / (1u64 << level) as f64
    }

    /// Scaling exponent of the kappa-collapse for `norm`.
    pub fn collapse_exponent(&self, norm: Norm) -> Option<i32> {
        match (self.axis, norm) {
            (SweepAxis::Coarse, Norm::H1kU) => Some(3),
            (SweepAxis::Coarse, Norm::L2U) => Some(4),
            (SweepAxis::Potential, Norm::H1A | Norm::L2A) => Some(0),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateFit {
    pub kappa: f64,
    pub norm: Norm,
    pub slope: f64,
    pub intercept: f64,
    /// Levels in the asymptotic window.
    pub window: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepFailure {
    pub kappa: f64,
    pub level: u32,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub axis: SweepAxis,
    /// Ordered by (kappa, level), i.e. by decreasing mesh size per kappa.
    pub rows: Vec<ErrorRow>,
    pub fits: Vec<RateFit>,
    /// Max relative pairwise gap of the scaled curves per norm.
    pub collapse: Vec<(Norm, f64)>,
    pub references: Vec<(f64, f64)>,
    pub failures: Vec<SweepFailure>,
}

impl RateReport {
    pub fn fit(&self, kappa: f64, norm: Norm) -> Option<&RateFit> {
        self.fits.iter().find(|f| f.kappa == kappa && f.norm == norm)
    }

    pub fn slope(&self, kappa: f64, norm: Norm) -> Option<f64> {
        self.fit(kappa, norm).map(|f| f.slope)
    }

    pub fn collapse_gap(&self, norm: Norm) -> Option<f64> {
        self.collapse.iter().find(|c| c.0 == norm).map(|c| c.1)
    }

    pub fn rows_for(&self, kappa: f64) -> Vec<ErrorRow> {
        self.rows.iter().filter(|r| r.kappa == kappa).copied().collect()
    }
}

/// Fits every (kappa, norm) curve of `rows` over its asymptotic window.
pub fn fit_rows(rows: &[ErrorRow], opts: &WindowOptions) -> Vec<RateFit> {
    let mut kappas: Vec<f64> = rows.iter().map(|r| r.kappa).collect();
    kappas.dedup();
    let mut fits = Vec::new();
    for &kappa in &kappas {
        let mut curve: Vec<&ErrorRow> = rows.iter().filter(|r| r.kappa == kappa).collect();
        curve.sort_by(|a, b| b.mesh_size.total_cmp(&a.mesh_size));
        for norm in Norm::ALL {
            let pts: Vec<(f64, f64)> = curve.iter().map(|r| (r.mesh_size, norm.of(r))).collect();
            if pts.len() < 2 || pts.iter().any(|p| !(p.1 > 0.0)) {
                continue;
            }
            let window = asymptotic_window(&pts, opts);
            let sel: Vec<(f64, f64)> = window.iter().map(|&i| pts[i]).collect();
            if let Ok((slope, intercept)) = fit_line(&sel) {
                fits.push(RateFit {
                    kappa,
                    norm,
                    slope,
                    intercept,
                    window: window.iter().map(|&i| curve[i].level).collect(),
                });
            }
        }
    }
    fits
}

/// Max relative gap `|a - b| / max(a, b)` between the `kappa^-s` scaled
/// curves of every pair of kappas, over levels shared by both windows.
pub fn collapse_gap(rows: &[ErrorRow], fits: &[RateFit], norm: Norm, exponent: i32) -> Option<f64> {
    let curves: Vec<&RateFit> = fits.iter().filter(|f| f.norm == norm).collect();
    let value = |kappa: f64, level: u32| {
        rows.iter()
            .find(|r| r.kappa == kappa && r.level == level)
            .map(|r| norm.of(r) * kappa.powi(-exponent))
    };
    let mut gap: Option<f64> = None;
    for (i, a) in curves.iter().enumerate() {
        for b in &curves[i + 1..] {
            for &l in a.window.iter().filter(|l| b.window.contains(l)) {
                if let (Some(x), Some(y)) = (value(a.kappa, l), value(b.kappa, l)) {
                    let g = (x - y).abs() / x.max(y);
                    gap = Some(gap.map_or(g, |m: f64| m.max(g)));
                }
            }
        }
    }
    gap
}

fn run_point(spec: &SweepSpec, reference: &Reference, p: &ModelParams, level: u32) -> Result<ErrorRow> {
    let cfg = spec.point_config(level);
    let state = if spec.warm_start {
        let s0 = state_from_fields(&cfg, p, &reference.u, &reference.a)?;
        run_from(s0, &cfg, p)?
    } else {
        run(&cfg, p)?
    };
    if state.terminated != Some(Termination::Converged) {
        return Err(Error::Numerical(format!("no convergence in {} steps", cfg.max_steps)));
    }
    let e = compute_errors(&state.u, &state.a, state.energy_gl(), reference)?;
    Ok(ErrorRow {
        kappa: p.kappa,
        level,
        mesh_size: SweepSpec::mesh_size(level),
        err_l2_u: e.l2_u,
        err_h1k_u: e.h1k_u,
        err_l2_a: e.l2_a,
        err_h1_a: e.h1_a,
        err_energy: e.energy,
    })
}

/// Runs the sweep: one reference per kappa, then every sweep point
/// (concurrently up to `spec.workers`), then fits and collapse gaps.
pub fn sweep(spec: &SweepSpec) -> Result<RateReport> {
    spec.check_nesting()?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut references = Vec::new();
    for &kappa in &spec.kappas {
        let p = ModelParams::new(kappa, spec.field)?;
        let reference = run_reference(&p, &spec.reference, spec.store.as_deref())?;
        references.push((kappa, reference.energy_gl));
        let workers = spec.workers.clamp(1, spec.levels.len().max(1));
        let chunk = spec.levels.len().div_ceil(workers).max(1);
        let results: Vec<(u32, Result<ErrorRow>)> = thread::scope(|s| {
            let handles: Vec<_> = spec
                .levels
                .chunks(chunk)
                .map(|levels| {
                    let (reference, p) = (&reference, &p);
                    s.spawn(move || levels.iter().map(|&l| (l, run_point(spec, reference, p, l))).collect::<Vec<_>>())
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("sweep worker")).collect()
        });
        for (level, r) in results {
            match r {
                Ok(row) => rows.push(row),
                Err(e) => failures.push(SweepFailure {
                    kappa,
                    level,
                    message: e.to_string(),
                }),
            }
        }
    }
    rows.sort_by(|a, b| a.kappa.total_cmp(&b.kappa).then(a.level.cmp(&b.level)));
    let fits = fit_rows(&rows, &spec.window);
    let collapse = Norm::ALL
        .iter()
        .filter_map(|&n| spec.collapse_exponent(n).and_then(|s| collapse_gap(&rows, &fits, n, s)).map(|g| (n, g)))
        .collect();
    Ok(RateReport {
        axis: spec.axis,
        rows,
        fits,
        collapse,
        references,
        failures,
    })
}
