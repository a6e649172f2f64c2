//! Flat `key = value` run configuration.
//!
//! ```text
//! # model problem, kappa = 6
//! kappa = 6
//! u_level = 5
//! a_level = 6
//! fine_level = 6
//! lod = on
//! layers = 4
//! ```
//!
//! Blank lines and `#` comments are ignored. Unknown or repeated keys are
//! errors reported with their line number.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::flow::{Checkpoint, FlowConfig, Init, LodSchedule, USpace};
use crate::lab::{SweepAxis, SweepSpec, WindowOptions};
use crate::model::{ExternalField, ModelParams};

#[derive(Clone, Debug, PartialEq)]
pub enum InitKind {
    Random,
    Constant(Complex64),
    File { u: PathBuf, a: Option<PathBuf> },
}

/// Discretization of one run: u space, A space and oversampling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Levels {
    pub u_level: u32,
    pub a_level: u32,
    pub fine_level: u32,
    pub lod: bool,
    pub layers: usize,
    pub a_degree: u8,
}

impl Levels {
    pub fn u_space(&self) -> USpace {
        if self.lod {
            USpace::Lod {
                level: self.u_level,
                fine_level: self.fine_level,
                layers: self.layers,
            }
        } else {
            USpace::P1 { level: self.u_level }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSettings {
    pub axis: SweepAxis,
    pub levels: Vec<u32>,
    pub kappas: Vec<f64>,
    pub reference: Levels,
    pub ref_eps_tol: f64,
    pub warm_start: bool,
    pub window: WindowOptions,
    pub store: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub kappa: f64,
    pub field_amplitude: f64,
    pub levels: Levels,
    pub tau: f64,
    pub eps_tol: f64,
    pub max_steps: usize,
    pub seed: u64,
    pub init: InitKind,
    pub init_level: Option<u32>,
    pub lod_update: LodSchedule,
    pub solver_tol: f64,
    pub checkpoint_every: Option<usize>,
    pub output_dir: PathBuf,
    pub sweep: Option<SweepSettings>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kappa: 6.0,
            field_amplitude: 10.0,
            levels: Levels {
                u_level: 5,
                a_level: 6,
                fine_level: 6,
                lod: true,
                layers: 4,
                a_degree: 2,
            },
            tau: 1.0,
            eps_tol: 1e-10,
            max_steps: 10_000,
            seed: 0,
            init: InitKind::Random,
            init_level: None,
            lod_update: LodSchedule::default(),
            solver_tol: 1e-12,
            checkpoint_every: None,
            output_dir: PathBuf::from("out"),
            sweep: None,
        }
    }
}

const KEYS: &[&str] = &[
    "kappa",
    "field_amplitude",
    "u_level",
    "a_level",
    "fine_level",
    "lod",
    "layers",
    "a_degree",
    "tau",
    "eps_tol",
    "max_steps",
    "seed",
    "init",
    "init_value",
    "init_u",
    "init_a",
    "init_level",
    "lod_warmup",
    "lod_period",
    "solver_tol",
    "checkpoint_every",
    "output_dir",
    "sweep_axis",
    "sweep_levels",
    "sweep_kappas",
    "ref_u_level",
    "ref_a_level",
    "ref_fine_level",
    "ref_lod",
    "ref_layers",
    "ref_eps_tol",
    "warm_start",
    "window_pre",
    "window_floor",
    "window_stagnation",
    "reference_dir",
];

struct Entries {
    map: HashMap<String, (usize, String)>,
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::ConfigParse { line, msg: msg.into() }
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content
                .split_once('=')
                .ok_or_else(|| perr(line, format!("expected key = value, found {content:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(perr(line, format!("unknown key {k:?}")));
            }
            if v.is_empty() {
                return Err(perr(line, format!("empty value for {k:?}")));
            }
            if let Some((first, _)) = map.insert(k.to_string(), (line, v.to_string())) {
                return Err(perr(line, format!("key {k:?} already set on line {first}")));
            }
        }
        Ok(Entries { map })
    }

    fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.map.get(key) {
            None => Ok(default),
            Some((line, v)) => v.parse().map_err(|e| perr(*line, format!("{key}: {v:?}: {e}"))),
        }
    }

    fn line(&self, key: &str) -> usize {
        self.map.get(key).map_or(0, |e| e.0)
    }

    fn text(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|e| e.1.as_str())
    }

    fn switch(&self, key: &str, default: bool) -> Result<bool> {
        match self.map.get(key) {
            None => Ok(default),
            Some((line, v)) => match v.as_str() {
                "on" | "true" | "yes" | "1" => Ok(true),
                "off" | "false" | "no" | "0" => Ok(false),
                _ => Err(perr(*line, format!("{key}: expected on/off, found {v:?}"))),
            },
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some((line, v)) = self.map.get(key) else {
            return Ok(None);
        };
        let items: Result<Vec<T>> = v
            .split(',')
            .map(|s| s.trim().parse().map_err(|e| perr(*line, format!("{key}: {s:?}: {e}"))))
            .collect();
        items.map(Some)
    }
}

fn parse_complex(s: &str) -> std::result::Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
    match parts.as_slice() {
        [re] => Ok(Complex64::new(num(re)?, 0.0)),
        [re, im] => Ok(Complex64::new(num(re)?, num(im)?)),
        _ => Err(format!("expected re or re,im, found {s:?}")),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let e = Entries::parse(text)?;
        let d = RunConfig::default();
        let levels = Levels {
            u_level: e.get("u_level", d.levels.u_level)?,
            a_level: e.get("a_level", d.levels.a_level)?,
            fine_level: e.get("fine_level", d.levels.fine_level)?,
            lod: e.switch("lod", d.levels.lod)?,
            layers: e.get("layers", d.levels.layers)?,
            a_degree: e.get("a_degree", d.levels.a_degree)?,
        };
        let init = match e.text("init").unwrap_or("random") {
            "random" => InitKind::Random,
            "constant" => {
                let v = e.text("init_value").unwrap_or("1");
                InitKind::Constant(parse_complex(v).map_err(|m| perr(e.line("init_value"), format!("init_value: {m}")))?)
            }
            "file" => InitKind::File {
                u: PathBuf::from(
                    e.text("init_u")
                        .ok_or_else(|| perr(e.line("init"), "init = file needs init_u"))?,
                ),
                a: e.text("init_a").map(PathBuf::from),
            },
            other => return Err(perr(e.line("init"), format!("init: expected random, constant or file, found {other:?}"))),
        };
        let sweep = if e.has("sweep_axis") || e.has("sweep_levels") {
            let axis = match e.text("sweep_axis").unwrap_or("coarse") {
                "coarse" | "H" => SweepAxis::Coarse,
                "potential" | "h" => SweepAxis::Potential,
                other => return Err(perr(e.line("sweep_axis"), format!("sweep_axis: expected coarse or potential, found {other:?}"))),
            };
            let reference = Levels {
                u_level: e.get("ref_u_level", levels.fine_level)?,
                a_level: e.get("ref_a_level", levels.fine_level)?,
                fine_level: e.get("ref_fine_level", levels.fine_level)?,
                lod: e.switch("ref_lod", false)?,
                layers: e.get("ref_layers", levels.layers)?,
                a_degree: levels.a_degree,
            };
            let dw = WindowOptions::default();
            Some(SweepSettings {
                axis,
                levels: e
                    .list("sweep_levels")?
                    .ok_or_else(|| perr(e.line("sweep_axis"), "sweep needs sweep_levels"))?,
                kappas: e.list("sweep_kappas")?.unwrap_or_else(|| vec![e.get("kappa", d.kappa).unwrap_or(d.kappa)]),
                reference,
                ref_eps_tol: e.get("ref_eps_tol", e.get("eps_tol", d.eps_tol)?)?,
                warm_start: e.switch("warm_start", true)?,
                window: WindowOptions {
                    pre_asymptotic: e.get("window_pre", dw.pre_asymptotic)?,
                    floor_factor: e.get("window_floor", dw.floor_factor)?,
                    stagnation: e.get("window_stagnation", dw.stagnation)?,
                },
                store: e.text("reference_dir").map(PathBuf::from),
            })
        } else {
            None
        };
        let cfg = RunConfig {
            kappa: e.get("kappa", d.kappa)?,
            field_amplitude: e.get("field_amplitude", d.field_amplitude)?,
            levels,
            tau: e.get("tau", d.tau)?,
            eps_tol: e.get("eps_tol", d.eps_tol)?,
            max_steps: e.get("max_steps", d.max_steps)?,
            seed: e.get("seed", d.seed)?,
            init,
            init_level: if e.has("init_level") { Some(e.get("init_level", 0)?) } else { None },
            lod_update: LodSchedule {
                warmup: e.get("lod_warmup", d.lod_update.warmup)?,
                period: e.get("lod_period", d.lod_update.period)?,
            },
            solver_tol: e.get("solver_tol", d.solver_tol)?,
            checkpoint_every: if e.has("checkpoint_every") { Some(e.get("checkpoint_every", 0)?) } else { None },
            output_dir: e.text("output_dir").map_or(d.output_dir, PathBuf::from),
            sweep,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|err| Error::Config(format!("cannot read {}: {err}", path.display())))?;
        Self::parse(&text)
    }

    pub fn params(&self) -> Result<ModelParams> {
        let field = if self.field_amplitude == 0.0 {
            ExternalField::zero()
        } else {
            ExternalField::Sine {
                amplitude: self.field_amplitude,
            }
        };
        ModelParams::new(self.kappa, field)
    }

    fn flow_for(&self, levels: &Levels) -> FlowConfig {
        let mut f = FlowConfig::new(levels.u_space(), levels.a_level, levels.a_degree);
        f.tau = self.tau;
        f.eps_tol = self.eps_tol;
        f.max_steps = self.max_steps;
        f.init = match &self.init {
            InitKind::Random => Init::Random {
                seed: self.seed,
                level: self.init_level,
            },
            InitKind::Constant(c) => Init::Constant(*c),
            InitKind::File { u, a } => Init::File { u: u.clone(), a: a.clone() },
        };
        f.lod_update = self.lod_update;
        f.solver_tol = self.solver_tol;
        f.checkpoint = self.checkpoint_every.map(|every| Checkpoint {
            every,
            dir: self.output_dir.join("checkpoints"),
        });
        f
    }

    pub fn flow(&self) -> FlowConfig {
        self.flow_for(&self.levels)
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let s = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config("no sweep settings (sweep_axis / sweep_levels)".into()))?;
        let mut point = self.flow();
        point.checkpoint = None;
        let mut reference = self.flow_for(&s.reference);
        reference.eps_tol = s.ref_eps_tol;
        reference.checkpoint = None;
        let mut spec = SweepSpec::new(s.axis, s.levels.clone(), point, reference);
        spec.kappas = s.kappas.clone();
        spec.field = self.params()?.field;
        spec.warm_start = s.warm_start;
        spec.window = s.window;
        spec.store = s.store.clone();
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        self.flow().validate()?;
        if let Some(s) = &self.sweep {
            if s.levels.is_empty() || s.kappas.is_empty() {
                return Err(Error::Config("sweep needs at least one level and one kappa".into()));
            }
            for &k in &s.kappas {
                ModelParams::new(k, ExternalField::zero())?;
            }
            self.sweep_spec()?.reference.validate()?;
        }
        Ok(())
    }

    /// Canonical `key = value` rendering; parses back to an equal config.
    pub fn render(&self) -> String {
        let l = &self.levels;
        let mut s = String::new();
        let onoff = |b: bool| if b { "on" } else { "off" };
        let _ = writeln!(s, "kappa = {}", self.kappa);
        let _ = writeln!(s, "field_amplitude = {}", self.field_amplitude);
        let _ = writeln!(s, "u_level = {}", l.u_level);
        let _ = writeln!(s, "a_level = {}", l.a_level);
        let _ = writeln!(s, "fine_level = {}", l.fine_level);
        let _ = writeln!(s, "lod = {}", onoff(l.lod));
        let _ = writeln!(s, "layers = {}", l.layers);
        let _ = writeln!(s, "a_degree = {}", l.a_degree);
        let _ = writeln!(s, "tau = {}", self.tau);
        let _ = writeln!(s, "eps_tol = {:e}", self.eps_tol);
        let _ = writeln!(s, "max_steps = {}", self.max_steps);
        let _ = writeln!(s, "seed = {}", self.seed);
        match &self.init {
            InitKind::Random => {
                let _ = writeln!(s, "init = random");
            }
            InitKind::Constant(c) => {
                let _ = writeln!(s, "init = constant\ninit_value = {},{}", c.re, c.im);
            }
            InitKind::File { u, a } => {
                let _ = writeln!(s, "init = file\ninit_u = {}", u.display());
                if let Some(a) = a {
                    let _ = writeln!(s, "init_a = {}", a.display());
                }
            }
        }
        if let Some(v) = self.init_level {
            let _ = writeln!(s, "init_level = {v}");
        }
        let _ = writeln!(s, "lod_warmup = {}", self.lod_update.warmup);
        let _ = writeln!(s, "lod_period = {}", self.lod_update.period);
        let _ = writeln!(s, "solver_tol = {:e}", self.solver_tol);
        if let Some(v) = self.checkpoint_every {
            let _ = writeln!(s, "checkpoint_every = {v}");
        }
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        if let Some(w) = &self.sweep {
            let join = |v: Vec<String>| v.join(",");
            let axis = match w.axis {
                SweepAxis::Coarse => "coarse",
                SweepAxis::Potential => "potential",
            };
            let _ = writeln!(s, "sweep_axis = {axis}");
            let _ = writeln!(s, "sweep_levels = {}", join(w.levels.iter().map(u32::to_string).collect()));
            let _ = writeln!(s, "sweep_kappas = {}", join(w.kappas.iter().map(f64::to_string).collect()));
            let _ = writeln!(s, "ref_u_level = {}", w.reference.u_level);
            let _ = writeln!(s, "ref_a_level = {}", w.reference.a_level);
            let _ = writeln!(s, "ref_fine_level = {}", w.reference.fine_level);
            let _ = writeln!(s, "ref_lod = {}", onoff(w.reference.lod));
            let _ = writeln!(s, "ref_layers = {}", w.reference.layers);
            let _ = writeln!(s, "ref_eps_tol = {:e}", w.ref_eps_tol);
            let _ = writeln!(s, "warm_start = {}", onoff(w.warm_start));
            let _ = writeln!(s, "window_pre = {}", w.window.pre_asymptotic);
            let _ = writeln!(s, "window_floor = {}", w.window.floor_factor);
            let _ = writeln!(s, "window_stagnation = {}", w.window.stagnation);
            if let Some(d) = &w.store {
                let _ = writeln!(s, "reference_dir = {}", d.display());
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = RunConfig::parse("# test\nkappa = 12\n\nlod = off\nu_level = 4 # trailing\n").unwrap();
        assert_eq!(c.kappa, 12.0);
        assert!(!c.levels.lod);
        assert_eq!(c.flow().u_space, USpace::P1 { level: 4 });
        assert_eq!(c.eps_tol, 1e-10);
    }

    #[test]
    fn errors_carry_line_numbers() {
        for (text, line) in [
            ("kappa = 6\nbogus = 1\n", 2),
            ("kappa = 6\n\ntau = fast\n", 3),
            ("kappa = 6\nkappa = 7\n", 2),
            ("tau\n", 1),
            ("lod = maybe\n", 1),
        ] {
            match RunConfig::parse(text) {
                Err(Error::ConfigParse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn semantic_errors_are_config_errors() {
        assert!(matches!(RunConfig::parse("kappa = -1\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("u_level = 7\nfine_level = 6\n"), Err(Error::Config(_))));
    }

    #[test]
    fn render_roundtrip() {
        let text = "kappa = 8\nfield_amplitude = 0\ninit = constant\ninit_value = 0.5,-0.25\nsweep_axis = potential\n\
                    sweep_levels = 2,3\nsweep_kappas = 6,12\nref_a_level = 5\nfine_level = 5\nu_level = 3\na_level = 4\n\
                    reference_dir = refs\ncheckpoint_every = 7\n";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.init, InitKind::Constant(Complex64::new(0.5, -0.25)));
        assert_eq!(RunConfig::parse(&c.render()).unwrap(), c);
        let spec = c.sweep_spec().unwrap();
        assert_eq!(spec.kappas, vec![6.0, 12.0]);
        assert_eq!(spec.point_config(3).a_level, 3);
    }
}
