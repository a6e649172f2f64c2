//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Criteria 7, 8, 9 and 11 run desk-scale sweeps; the whole test takes
//! 45 to 50 minutes on one core. Criterion 10 runs at full scale and is ignored by default.

use std::io::Write;
use std::path::Path;

use gllod::check;
use gllod::cli;
use gllod::config::RunConfig;
use gllod::flow::{run, FlowConfig, Init, LodSchedule, USpace};
use gllod::lab::{config_hash, sweep, Norm, RateReport, SweepAxis, SweepSpec};
use gllod::model::ModelParams;

const FINE: u32 = 7;
const LAYERS: usize = 14;

struct Ledger {
    lines: Vec<(u32, bool, String)>,
}

impl Ledger {
    fn record(&mut self, id: u32, passed: bool, detail: String) {
        // straight to the stderr handle so the lines survive output capture
        let _ = writeln!(std::io::stderr(), "criterion {id:2} {}: {detail}", if passed { "PASS" } else { "FAIL" });
        self.lines.push((id, passed, detail));
    }

    fn outcome(&mut self, id: u32, o: gllod::Result<check::Outcome>) {
        match o {
            Ok(o) => self.record(id, o.passed, o.detail),
            Err(e) => self.record(id, false, format!("error: {e}")),
        }
    }
}

fn fine_reference() -> FlowConfig {
    let mut cfg = FlowConfig::new(USpace::P1 { level: FINE }, FINE, 2);
    cfg.init = Init::Random { seed: 1, level: Some(3) };
    cfg.eps_tol = 1e-13;
    cfg
}

fn coarse_sweep(u_space: USpace, kappas: &[f64], store: &Path) -> gllod::Result<RateReport> {
    let mut point = FlowConfig::new(u_space, FINE, 2);
    point.eps_tol = 1e-10;
    point.lod_update = LodSchedule { warmup: 1, period: 100 };
    let mut spec = SweepSpec::new(SweepAxis::Coarse, vec![2, 3, 4, 5], point, fine_reference());
    spec.kappas = kappas.to_vec();
    spec.store = Some(store.to_path_buf());
    sweep(&spec)
}

fn potential_sweep(store: &Path) -> gllod::Result<RateReport> {
    // the reference starts from the stored fine P1 minimizer for kappa = 6
    let p = ModelParams::model(6.0)?;
    let hash = config_hash(&p, &fine_reference());
    let u_space = USpace::Lod {
        level: 5,
        fine_level: FINE,
        layers: LAYERS,
    };
    let mut reference = FlowConfig::new(u_space, FINE, 2);
    reference.init = Init::File {
        u: store.join(format!("ref_{hash:016x}_u.glf")),
        a: Some(store.join(format!("ref_{hash:016x}_a.glf"))),
    };
    reference.eps_tol = 1e-13;
    reference.lod_update = LodSchedule { warmup: 1, period: 100 };
    let mut point = reference.clone();
    point.eps_tol = 1e-10;
    let mut spec = SweepSpec::new(SweepAxis::Potential, vec![2, 3, 4, 5, 6], point, reference);
    spec.kappas = vec![6.0];
    spec.store = Some(store.to_path_buf());
    sweep(&spec)
}

fn slope_line(r: &RateReport, kappa: f64, norm: Norm) -> (f64, String) {
    match r.fit(kappa, norm) {
        Some(f) => (f.slope, format!("{} slope {:.3} over levels {:?}", norm.name(), f.slope, f.window)),
        None => (f64::NAN, format!("{} slope unavailable", norm.name())),
    }
}

fn table(r: &RateReport) -> String {
    r.rows
        .iter()
        .map(|x| {
            format!(
                "    kappa {} level {}: L2u {:.3e} H1ku {:.3e} L2A {:.3e} H1A {:.3e} dE {:.3e}",
                x.kappa, x.level, x.err_l2_u, x.err_h1k_u, x.err_l2_a, x.err_h1_a, x.err_energy
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn energy_monotonicity() -> gllod::Result<(bool, String)> {
    let p = ModelParams::model(6.0)?;
    let mut cfg = FlowConfig::new(
        USpace::Lod {
            level: 5,
            fine_level: 6,
            layers: 4,
        },
        6,
        2,
    );
    cfg.eps_tol = 1e-8;
    cfg.init = Init::Random { seed: 1, level: Some(3) };
    let s = run(&cfg, &p)?;
    let h = s.energy_history();
    let worst = h[5..].windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    Ok((
        worst <= 1e-12 && s.terminated.is_some_and(|t| t == gllod::flow::Termination::Converged),
        format!("{} steps, largest increase after step 5: {worst:.2e}, final E_GL {:.8}", s.n, s.energy_gl()),
    ))
}

fn cli_determinism(dir: &Path) -> gllod::Result<bool> {
    let text = "kappa = 4\nu_level = 2\na_level = 4\nfine_level = 4\nlayers = 2\nmax_steps = 15\nseed = 9\n";
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let mut cfg = RunConfig::parse(text)?;
        cfg.output_dir = dir.join(run);
        cli::solve(&cfg, &mut std::io::sink())?;
        let files: Vec<Vec<u8>> = ["u.glf", "a.glf", "energy.csv"]
            .iter()
            .map(|f| std::fs::read(cfg.output_dir.join(f)))
            .collect::<std::io::Result<_>>()?;
        outputs.push(files);
    }
    Ok(outputs[0] == outputs[1])
}

#[test]
fn acceptance() {
    let store = tempfile::tempdir().unwrap();
    let mut ledger = Ledger { lines: Vec::new() };

    ledger.outcome(1, check::phase_invariance(10, 10, 4, 6.0, 11));
    ledger.outcome(2, check::gradient_consistency(5, 4, 6.0, 12));
    ledger.outcome(3, check::corrector_correctness(2, 4, 8.0, 20, 13));
    ledger.outcome(4, check::coercivity_witness(5, FINE, 6.0, 50, 14));
    let fixed: Vec<gllod::Result<check::Outcome>> = vec![
        check::fixed_point(USpace::P1 { level: 4 }, 4),
        check::fixed_point(
            USpace::Lod {
                level: 2,
                fine_level: 4,
                layers: 8,
            },
            4,
        ),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for f in fixed {
        match f {
            Ok(o) => {
                ok &= o.passed;
                detail.push(o.detail);
            }
            Err(e) => {
                ok = false;
                detail.push(e.to_string());
            }
        }
    }
    ledger.record(5, ok, detail.join("; "));

    match energy_monotonicity() {
        Ok((ok, d)) => ledger.record(6, ok, d),
        Err(e) => ledger.record(6, false, format!("error: {e}")),
    }

    let lod = coarse_sweep(
        USpace::Lod {
            level: 2,
            fine_level: FINE,
            layers: LAYERS,
        },
        &[6.0, 12.0],
        store.path(),
    );
    let p1 = coarse_sweep(USpace::P1 { level: 2 }, &[6.0], store.path());
    match (&lod, &p1) {
        (Ok(lod), Ok(p1)) => {
            let _ = writeln!(std::io::stderr(), "LOD H-sweep:\n{}\nP1 H-sweep:\n{}", table(lod), table(p1));
            let (h1, d1) = slope_line(lod, 6.0, Norm::H1kU);
            let (l2, d2) = slope_line(lod, 6.0, Norm::L2U);
            let (b1, d3) = slope_line(p1, 6.0, Norm::H1kU);
            ledger.record(
                7,
                h1 >= 2.5 && l2 >= 3.3 && (0.6..=1.4).contains(&b1) && lod.failures.is_empty() && p1.failures.is_empty(),
                format!("LOD {d1}, LOD {d2}; P1 {d3}"),
            );
        }
        (a, b) => ledger.record(7, false, format!("sweep error: {:?} {:?}", a.as_ref().err(), b.as_ref().err())),
    }

    match potential_sweep(store.path()) {
        Ok(r) => {
            let _ = writeln!(std::io::stderr(), "h-sweep:\n{}", table(&r));
            let (h1, d1) = slope_line(&r, 6.0, Norm::H1A);
            let (l2, d2) = slope_line(&r, 6.0, Norm::L2A);
            ledger.record(
                8,
                (1.6..=2.4).contains(&h1) && (2.5..=3.5).contains(&l2) && r.failures.is_empty(),
                format!("{d1}, {d2}"),
            );
        }
        Err(e) => ledger.record(8, false, format!("sweep error: {e}")),
    }

    match &lod {
        Ok(lod) => {
            let (s, d) = slope_line(lod, 6.0, Norm::Energy);
            ledger.record(9, s >= 5.0, d);
        }
        Err(e) => ledger.record(9, false, format!("sweep error: {e}")),
    }

    // not counted either way; see the ignored test below
    let _ = writeln!(
        std::io::stderr(),
        "criterion 10 SKIP: full-scale run, cargo test --release --test acceptance -- --ignored"
    );

    match &lod {
        Ok(lod) => match lod.collapse_gap(Norm::H1kU) {
            Some(g) => ledger.record(11, g <= 0.5, format!("max relative gap of kappa^-3 scaled H1k curves {g:.3}")),
            None => ledger.record(11, false, "no shared window levels".into()),
        },
        Err(e) => ledger.record(11, false, format!("sweep error: {e}")),
    }

    let persistence = check::persistence(21);
    let cli_ok = cli_determinism(store.path());
    match (persistence, cli_ok) {
        (Ok(o), Ok(c)) => ledger.record(12, o.passed && c, format!("{}; CLI outputs byte-identical: {c}", o.detail)),
        (a, b) => ledger.record(12, false, format!("error: {:?} {:?}", a.err(), b.err())),
    }

    let failed: Vec<u32> = ledger.lines.iter().filter(|l| !l.1).map(|l| l.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
#[ignore = "full-scale run, hours on one core"]
fn criterion_10_full_scale_energy() {
    let p = ModelParams::model(6.0).unwrap();
    let mut cfg = FlowConfig::new(
        USpace::Lod {
            level: 7,
            fine_level: 9,
            layers: 10,
        },
        9,
        2,
    );
    cfg.eps_tol = 1e-10;
    cfg.init = Init::Random { seed: 1, level: Some(3) };
    let s = run(&cfg, &p).unwrap();
    let e = s.energy_gl();
    let passed = (e - 0.393563).abs() <= 5e-3;
    let _ = writeln!(std::io::stderr(), "criterion 10 {}: E_GL {e:.6} after {} steps (target 0.393563 +- 5e-3)", if passed { "PASS" } else { "FAIL" }, s.n);
    assert!(passed);
}
