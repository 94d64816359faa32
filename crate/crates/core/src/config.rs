//! Run configuration from `key = value` files (`#` starts a comment).
//!
//! One file carries the model, the simulation and the solver settings; keys
//! under `run.` are output bookkeeping and are skipped, so any run manifest
//! can be fed back in as a config.

use std::collections::BTreeMap;
use std::path::Path;

use crate::ck::{ConstraintMode, SolverConfig};
use crate::error::{Error, Result};
use crate::io::Manifest;
use crate::langevin::{InitCondition, SimConfig};
use crate::model::{ConfinementSpec, DisorderMode, ModelSpec};

const SCALAR_KEYS: &[&str] = &[
    "m",
    "beta",
    "N",
    "confinement.kind",
    "kappa",
    "r",
    "z",
    "disorder.mode",
    "seed",
    "dt",
    "T",
    "snapshot_stride",
    "realizations",
    "init",
    "variance",
    "blowup_threshold",
    "record_af",
    "h",
    "K0",
    "corrector_tol",
    "corrector_max_iter",
    "mode",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub sim: SimConfig,
    pub solver: SolverConfig,
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.sim.base_seed
    }

    /// Echo of every setting in config syntax.
    pub fn to_manifest(&self) -> Manifest {
        let mut m = Manifest::new();
        let model = &self.model;
        m.set("m", model.max_order());
        for (k, a) in model.a.iter().enumerate() {
            m.set(format!("a_{}", k + 1), a);
        }
        m.set("beta", model.beta).set("N", model.n);
        match model.confinement {
            ConfinementSpec::Polynomial { kappa, r } => {
                m.set("confinement.kind", "polynomial").set("kappa", kappa).set("r", r);
            }
            ConfinementSpec::ConstantFprime { z } => {
                m.set("confinement.kind", "constant-fprime").set("z", z);
            }
        }
        m.set("disorder.mode", model.disorder_mode.as_str());
        let sim = &self.sim;
        m.set("seed", sim.base_seed)
            .set("dt", sim.dt)
            .set("T", sim.t_max)
            .set("snapshot_stride", sim.snapshot_stride)
            .set("realizations", sim.n_realizations);
        match sim.init {
            InitCondition::UniformSphere => {
                m.set("init", "sphere");
            }
            InitCondition::IidGaussian { variance } => {
                m.set("init", "gaussian").set("variance", variance);
            }
        }
        if let Some(b) = sim.blowup_threshold {
            m.set("blowup_threshold", b);
        }
        m.set("record_af", sim.record_af);
        let sol = &self.solver;
        m.set("h", sol.h)
            .set("K0", sol.k0)
            .set("corrector_tol", sol.corrector_tol)
            .set("corrector_max_iter", sol.corrector_max_iter)
            .set("mode", sol.mode.as_str());
        m
    }
}

struct Entries<'a> {
    map: BTreeMap<String, (String, usize)>,
    path: &'a Path,
}

impl Entries<'_> {
    fn err(&self, key: &str, msg: String) -> Error {
        let line = self.map.get(key).map_or(0, |(_, l)| *l);
        Error::Parse { path: self.path.to_path_buf(), line, msg: format!("{key}: {msg}") }
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.map.get(key) {
            None => Ok(None),
            Some((raw, _)) => raw.parse().map(Some).map_err(|e: T::Err| self.err(key, e.to_string())),
        }
    }

    fn get_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }
}

fn is_coefficient_key(key: &str) -> Option<usize> {
    key.strip_prefix("a_")?.parse().ok().filter(|&p| p >= 1)
}

/// Parses config text; `path` is used for error messages only.
pub fn parse_config(text: &str, path: &Path) -> Result<RunConfig> {
    let mut map = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let perr = |msg: String| Error::Parse { path: path.to_path_buf(), line: k + 1, msg };
        let (key, value) = line.split_once('=').ok_or_else(|| perr("expected key = value".into()))?;
        let (key, value) = (key.trim(), value.trim());
        if key.starts_with("run.") {
            continue;
        }
        if !SCALAR_KEYS.contains(&key) && is_coefficient_key(key).is_none() {
            return Err(perr(format!("unknown key {key:?}")));
        }
        if map.insert(key.to_string(), (value.to_string(), k + 1)).is_some() {
            return Err(perr(format!("duplicate key {key:?}")));
        }
    }
    let e = Entries { map, path };

    let highest = e.map.keys().filter_map(|k| is_coefficient_key(k)).max().unwrap_or(0);
    let m: usize = e.get_or("m", highest)?;
    if m == 0 {
        return Err(e.err("m", "no interaction coefficients given".into()));
    }
    if highest > m {
        return Err(e.err(&format!("a_{highest}"), format!("order exceeds m = {m}")));
    }
    let mut a = vec![0.0; m];
    for (p, slot) in a.iter_mut().enumerate() {
        *slot = e.get_or(&format!("a_{}", p + 1), 0.0)?;
    }

    let kind: String = e.get_or("confinement.kind", "polynomial".to_string())?;
    let confinement = match kind.as_str() {
        "polynomial" => {
            let ConfinementSpec::Polynomial { kappa, r } = ConfinementSpec::default() else {
                unreachable!()
            };
            ConfinementSpec::Polynomial { kappa: e.get_or("kappa", kappa)?, r: e.get_or("r", r)? }
        }
        "constant-fprime" => ConfinementSpec::ConstantFprime {
            z: e.get("z")?.ok_or_else(|| e.err("z", "required for constant-fprime".into()))?,
        },
        other => return Err(e.err("confinement.kind", format!("unknown kind {other:?}"))),
    };
    let model = ModelSpec::new(a, e.get_or("beta", 1.0)?, confinement, e.get_or("N", 100)?)?
        .with_disorder_mode(e.get_or("disorder.mode", DisorderMode::Exact)?);

    let d = SimConfig::default();
    let init_kind: String = e.get_or("init", "sphere".to_string())?;
    let init = match init_kind.as_str() {
        "sphere" => InitCondition::UniformSphere,
        "gaussian" => InitCondition::IidGaussian { variance: e.get_or("variance", 1.0)? },
        other => return Err(e.err("init", format!("expected sphere|gaussian, got {other:?}"))),
    };
    let t_max: f64 = e.get_or("T", d.t_max)?;
    let sim = SimConfig {
        dt: e.get_or("dt", d.dt)?,
        t_max,
        snapshot_stride: e.get_or("snapshot_stride", d.snapshot_stride)?,
        n_realizations: e.get_or("realizations", d.n_realizations)?,
        base_seed: e.get_or("seed", d.base_seed)?,
        init,
        blowup_threshold: e.get("blowup_threshold")?,
        record_af: e.get_or("record_af", d.record_af)?,
    };

    let s = SolverConfig::default();
    let solver = SolverConfig {
        h: e.get_or("h", s.h)?,
        t_max,
        k0: e.get_or("K0", s.k0)?,
        corrector_tol: e.get_or("corrector_tol", s.corrector_tol)?,
        corrector_max_iter: e.get_or("corrector_max_iter", s.corrector_max_iter)?,
        mode: e.get_or("mode", s.mode)?,
    };
    Ok(RunConfig { model, sim, solver })
}

pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|err| {
        if err.kind() == std::io::ErrorKind::NotFound {
            Error::InvalidConfig(format!("config file {} not found", path.display()))
        } else {
            Error::Io(err)
        }
    })?;
    parse_config(&text, path)
}

/// Applies command-line overrides that mirror config keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub realizations: Option<usize>,
    pub mode: Option<ConstraintMode>,
    pub disorder: Option<DisorderMode>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.sim.base_seed = s;
        }
        if let Some(r) = self.realizations {
            cfg.sim.n_realizations = r;
        }
        if let Some(m) = self.mode {
            cfg.solver.mode = m;
        }
        if let Some(d) = self.disorder {
            cfg.model.disorder_mode = d;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# pure p=3
a_3 = 1
beta = 1.0
N = 200
kappa = 5
r = 2
seed = 7   # base seed
T = 1.5
h = 0.0025
realizations = 32
";

    #[test]
    fn parses_sample() {
        let cfg = parse_config(SAMPLE, Path::new("s.cfg")).unwrap();
        assert_eq!(cfg.model.a, vec![0.0, 0.0, 1.0]);
        assert_eq!(cfg.model.n, 200);
        assert_eq!(cfg.seed(), 7);
        assert_eq!(cfg.sim.t_max, 1.5);
        assert_eq!(cfg.solver.t_max, 1.5);
        assert_eq!(cfg.solver.h, 0.0025);
        assert_eq!(cfg.sim.n_realizations, 32);
        assert_eq!(cfg.model.confinement, ConfinementSpec::Polynomial { kappa: 5.0, r: 2 });
    }

    #[test]
    fn manifest_echo_round_trips() {
        let cfg = parse_config(SAMPLE, Path::new("s.cfg")).unwrap();
        let mut m = cfg.to_manifest();
        m.set("run.kind", "solution");
        let back = parse_config(&m.render(), Path::new("m.txt")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_input() {
        let bad = [
            "a_3 = 1\nfoo = 2\n",
            "a_3 = 1\na_3 = 2\n",
            "a_3 = 1\nm = 2\n",
            "beta = 1\n",
            "a_1 = x\n",
            "a_1 = 1\nconfinement.kind = constant-fprime\n",
            "a_1 = 1\ninit = cube\n",
            "a_1 = 1\nmode = squishy\n",
            "just words\n",
        ];
        for text in bad {
            assert!(parse_config(text, Path::new("b.cfg")).is_err(), "{text:?}");
        }
    }

    #[test]
    fn error_carries_line_number() {
        let err = parse_config("a_1 = 1\n\nbeta = nope\n", Path::new("b.cfg")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = parse_config(SAMPLE, Path::new("s.cfg")).unwrap();
        Overrides {
            seed: Some(1),
            realizations: Some(4),
            mode: Some(ConstraintMode::Hard),
            disorder: Some(DisorderMode::Decoupled),
        }
        .apply(&mut cfg);
        assert_eq!(cfg.seed(), 1);
        assert_eq!(cfg.sim.n_realizations, 4);
        assert_eq!(cfg.solver.mode, ConstraintMode::Hard);
        assert_eq!(cfg.model.disorder_mode, DisorderMode::Decoupled);
    }
}
