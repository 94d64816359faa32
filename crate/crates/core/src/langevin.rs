//! Euler–Maruyama integration of the N-dimensional Langevin system
//!
//! ```text
//! dx = [G(x) - f'(|x|^2/N) x] dt + dB
//! ```
//!
//! and accumulation of the empirical two-time observables on a snapshot grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::SquareGrid;
use crate::model::{ConfinementSpec, DisorderTensor, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitCondition {
    /// `x_i ~ N(0, variance)` independently.
    IidGaussian { variance: f64 },
    /// Uniform on the sphere `|x|^2 = N`.
    UniformSphere,
}

impl Default for InitCondition {
    fn default() -> Self {
        InitCondition::UniformSphere
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    /// Horizon `T`.
    pub t_max: f64,
    pub snapshot_stride: usize,
    pub n_realizations: usize,
    pub base_seed: u64,
    pub init: InitCondition,
    /// Defaults to `50 max(1, K_N(0))` when unset.
    pub blowup_threshold: Option<f64>,
    /// Also record `A_N` and `F_N`.
    pub record_af: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            t_max: 1.0,
            snapshot_stride: 50,
            n_realizations: 1,
            base_seed: 0,
            init: InitCondition::default(),
            blowup_threshold: None,
            record_af: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidConfig(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_max >= 0.0) || !self.t_max.is_finite() {
            return Err(Error::InvalidConfig(format!("T must be >= 0, got {}", self.t_max)));
        }
        let ratio = self.t_max / self.dt;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "T = {} is not an integer multiple of dt = {}",
                self.t_max, self.dt
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::InvalidConfig("snapshot_stride must be >= 1".into()));
        }
        if self.n_realizations == 0 {
            return Err(Error::InvalidConfig("realizations must be >= 1".into()));
        }
        if let InitCondition::IidGaussian { variance } = self.init {
            if !(variance > 0.0) {
                return Err(Error::InvalidConfig(format!("init variance must be > 0, got {variance}")));
            }
        }
        if let Some(b) = self.blowup_threshold {
            if !(b > 0.0) {
                return Err(Error::InvalidConfig(format!("blowup_threshold must be > 0, got {b}")));
            }
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    /// Snapshot spacing `stride * dt`.
    pub fn snapshot_spacing(&self) -> f64 {
        self.snapshot_stride as f64 * self.dt
    }

    /// `floor(T / Delta) + 1`.
    pub fn n_snapshots(&self) -> usize {
        self.n_steps() / self.snapshot_stride + 1
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        let delta = self.snapshot_spacing();
        (0..self.n_snapshots()).map(|m| m as f64 * delta).collect()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the disorder used by realization `r`.
pub fn disorder_seed(base_seed: u64, r: usize) -> u64 {
    splitmix64(splitmix64(base_seed) ^ (2 * r as u64))
}

/// Seed of the initial condition and driving noise of realization `r`.
pub fn trajectory_seed(base_seed: u64, r: usize) -> u64 {
    splitmix64(splitmix64(base_seed) ^ (2 * r as u64 + 1))
}

/// State `x_t`, accumulated Brownian path `B_t` and the noise generator.
#[derive(Debug, Clone)]
pub struct TrajectoryState {
    pub x: Vec<f64>,
    pub b: Vec<f64>,
    pub t: f64,
    rng: ChaCha8Rng,
    drift: Vec<f64>,
    noise: Vec<f64>,
}

impl PartialEq for TrajectoryState {
    fn eq(&self, other: &Self) -> bool {
        self.x == other.x && self.b == other.b && self.t == other.t
    }
}

impl TrajectoryState {
    /// Draws `x_0` (independent of the disorder) and sets `B_0 = 0`.
    pub fn init(init: InitCondition, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSpec("N must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        match init {
            InitCondition::IidGaussian { variance } => {
                let sd = variance.sqrt();
                x.iter_mut().for_each(|v| *v *= sd);
            }
            InitCondition::UniformSphere => {
                let norm = crate::model::dot(&x, &x).sqrt();
                if norm == 0.0 {
                    x.fill(1.0);
                } else {
                    let scale = (n as f64).sqrt() / norm;
                    x.iter_mut().for_each(|v| *v *= scale);
                }
            }
        }
        Ok(TrajectoryState {
            b: vec![0.0; n],
            drift: vec![0.0; n],
            noise: vec![0.0; n],
            x,
            t: 0.0,
            rng,
        })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// `K_N = |x|^2 / N`.
    pub fn k(&self) -> f64 {
        crate::model::dot(&self.x, &self.x) / self.n() as f64
    }

    /// One step with fresh standard normal increments.
    pub fn step(&mut self, conf: &ConfinementSpec, j: &DisorderTensor, dt: f64) -> Result<()> {
        let mut noise = std::mem::take(&mut self.noise);
        for v in noise.iter_mut() {
            *v = self.rng.sample(StandardNormal);
        }
        let r = self.step_with_noise(conf, j, dt, &noise);
        self.noise = noise;
        r
    }

    /// One step driven by the given standard normal vector `xi`:
    /// `x += [G(x) - f'(K) x] dt + xi sqrt(dt)`, `B += xi sqrt(dt)`.
    pub fn step_with_noise(
        &mut self,
        conf: &ConfinementSpec,
        j: &DisorderTensor,
        dt: f64,
        xi: &[f64],
    ) -> Result<()> {
        if xi.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: xi.len() });
        }
        j.grad_into(&self.x, &mut self.drift)?;
        self.advance(conf, dt, xi);
        Ok(())
    }

    /// Applies a step using the gradient already held in `self.drift`.
    fn advance(&mut self, conf: &ConfinementSpec, dt: f64, xi: &[f64]) {
        let fp = conf.f_prime(self.k());
        let sq = dt.sqrt();
        for i in 0..self.x.len() {
            let dw = xi[i] * sq;
            self.x[i] += (self.drift[i] - fp * self.x[i]) * dt + dw;
            self.b[i] += dw;
        }
        self.t += dt;
    }

    fn check_blowup(&self, threshold: f64) -> Result<()> {
        let k = self.k();
        if !k.is_finite() || k > threshold {
            return Err(Error::BlowUp { time: self.t, k, threshold });
        }
        Ok(())
    }
}

/// Snapshot-grid measurements of one or more trajectories.
///
/// Entries are means over `n_realizations`; the `*_m2` grids hold the summed
/// squared deviations used for the variance of the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalObservables {
    pub times: Vec<f64>,
    pub c: SquareGrid,
    pub chi: SquareGrid,
    pub k: Vec<f64>,
    pub a: Option<SquareGrid>,
    pub f: Option<SquareGrid>,
    pub n_realizations: usize,
    c_m2: SquareGrid,
    chi_m2: SquareGrid,
}

impl EmpiricalObservables {
    /// Builds from stored snapshots (row `m` of each is the vector at time `m`).
    fn from_snapshots(
        times: Vec<f64>,
        xs: &[Vec<f64>],
        bs: &[Vec<f64>],
        gs: Option<&[Vec<f64>]>,
    ) -> Self {
        let m = times.len();
        let nf = xs[0].len() as f64;
        let dot = crate::model::dot;
        let mut c = SquareGrid::zeros(m);
        for s in 0..m {
            for t in 0..=s {
                let v = dot(&xs[s], &xs[t]) / nf;
                c.set(s, t, v);
                c.set(t, s, v);
            }
        }
        let chi = SquareGrid::from_fn(m, |s, t| dot(&xs[s], &bs[t]) / nf);
        let (a, f) = match gs {
            Some(gs) => (
                Some(SquareGrid::from_fn(m, |s, t| dot(&gs[s], &xs[t]) / nf)),
                Some(SquareGrid::from_fn(m, |s, t| dot(&gs[s], &bs[t]) / nf)),
            ),
            None => (None, None),
        };
        EmpiricalObservables {
            k: c.diagonal(),
            times,
            c,
            chi,
            a,
            f,
            n_realizations: 1,
            c_m2: SquareGrid::zeros(m),
            chi_m2: SquareGrid::zeros(m),
        }
    }

    /// Assembles observables from already-averaged grids (e.g. read from disk).
    pub fn from_parts(
        times: Vec<f64>,
        c: SquareGrid,
        chi: SquareGrid,
        n_realizations: usize,
        c_var: Option<SquareGrid>,
        chi_var: Option<SquareGrid>,
    ) -> Result<Self> {
        let m = times.len();
        for g in [Some(&c), Some(&chi), c_var.as_ref(), chi_var.as_ref()].into_iter().flatten() {
            if g.len() != m {
                return Err(Error::GridMismatch(format!(
                    "grid has {} times, expected {m}",
                    g.len()
                )));
            }
        }
        let n_real = n_realizations.max(1);
        let to_m2 = |var: Option<SquareGrid>| -> SquareGrid {
            match var {
                Some(mut v) if n_real > 1 => {
                    let factor = (n_real * (n_real - 1)) as f64;
                    v.as_mut_slice().iter_mut().for_each(|x| *x *= factor);
                    v
                }
                _ => SquareGrid::zeros(m),
            }
        };
        Ok(EmpiricalObservables {
            k: c.diagonal(),
            c_m2: to_m2(c_var),
            chi_m2: to_m2(chi_var),
            times,
            c,
            chi,
            a: None,
            f: None,
            n_realizations: n_real,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn variance_of_mean(&self, m2: &SquareGrid) -> SquareGrid {
        let n = self.n_realizations;
        let mut v = m2.clone();
        let denom = if n > 1 { (n * (n - 1)) as f64 } else { f64::INFINITY };
        v.as_mut_slice().iter_mut().for_each(|x| *x /= denom);
        v
    }

    /// Variance of the mean of `C` across realizations (zero for one run).
    pub fn c_variance(&self) -> SquareGrid {
        self.variance_of_mean(&self.c_m2)
    }

    pub fn chi_variance(&self) -> SquareGrid {
        self.variance_of_mean(&self.chi_m2)
    }

    /// Merges `other` into `self` (pairwise mean/M2 update).
    fn merge(&mut self, other: &EmpiricalObservables) {
        let na = self.n_realizations as f64;
        let nb = other.n_realizations as f64;
        let n = na + nb;
        let merge_grid = |mean: &mut SquareGrid, m2: Option<&mut SquareGrid>, om: &SquareGrid, om2: Option<&SquareGrid>| {
            let ms = mean.as_mut_slice();
            match (m2, om2) {
                (Some(m2), Some(om2)) => {
                    for (((m, q), &o), &oq) in
                        ms.iter_mut().zip(m2.as_mut_slice()).zip(om.as_slice()).zip(om2.as_slice())
                    {
                        let delta = o - *m;
                        *m += delta * nb / n;
                        *q += oq + delta * delta * na * nb / n;
                    }
                }
                _ => {
                    for (m, &o) in ms.iter_mut().zip(om.as_slice()) {
                        *m += (o - *m) * nb / n;
                    }
                }
            }
        };
        merge_grid(&mut self.c, Some(&mut self.c_m2), &other.c, Some(&other.c_m2));
        merge_grid(&mut self.chi, Some(&mut self.chi_m2), &other.chi, Some(&other.chi_m2));
        match (&mut self.a, &other.a) {
            (Some(a), Some(oa)) => merge_grid(a, None, oa, None),
            _ => self.a = None,
        }
        match (&mut self.f, &other.f) {
            (Some(f), Some(of)) => merge_grid(f, None, of, None),
            _ => self.f = None,
        }
        self.k = self.c.diagonal();
        self.n_realizations += other.n_realizations;
    }
}

/// Integrates one trajectory of realization `realization` under disorder `j`.
pub fn run_trajectory(
    model: &ModelSpec,
    j: &DisorderTensor,
    config: &SimConfig,
    realization: usize,
) -> Result<EmpiricalObservables> {
    config.validate()?;
    if j.n() != model.n {
        return Err(Error::DimensionMismatch { expected: model.n, got: j.n() });
    }
    let mut state =
        TrajectoryState::init(config.init, model.n, trajectory_seed(config.base_seed, realization))?;
    let threshold = config.blowup_threshold.unwrap_or(50.0 * state.k().max(1.0));
    let times = config.snapshot_times();
    let n_steps = config.n_steps();
    let stride = config.snapshot_stride;
    let n_snap = times.len();

    let mut xs = Vec::with_capacity(n_snap);
    let mut bs = Vec::with_capacity(n_snap);
    let mut gs: Vec<Vec<f64>> = Vec::with_capacity(if config.record_af { n_snap } else { 0 });
    let conf = &model.confinement;

    for step in 0..n_steps {
        let snapshot = step % stride == 0 && xs.len() < n_snap;
        if snapshot {
            xs.push(state.x.clone());
            bs.push(state.b.clone());
        }
        let mut noise = std::mem::take(&mut state.noise);
        for v in noise.iter_mut() {
            *v = state.rng.sample(StandardNormal);
        }
        j.grad_into(&state.x, &mut state.drift)?;
        if snapshot && config.record_af {
            gs.push(state.drift.clone());
        }
        state.advance(conf, config.dt, &noise);
        state.noise = noise;
        state.check_blowup(threshold)?;
    }
    while xs.len() < n_snap {
        xs.push(state.x.clone());
        bs.push(state.b.clone());
        if config.record_af {
            gs.push(j.grad(&state.x)?);
        }
    }
    Ok(EmpiricalObservables::from_snapshots(
        times,
        &xs,
        &bs,
        config.record_af.then_some(gs.as_slice()),
    ))
}

/// Entrywise mean and variance of the mean over a list of runs.
pub fn average_realizations(list: &[EmpiricalObservables]) -> Result<EmpiricalObservables> {
    let (first, rest) = list
        .split_first()
        .ok_or_else(|| Error::GridMismatch("no observables to average".into()))?;
    let mut acc = first.clone();
    for o in rest {
        if o.times.len() != acc.times.len()
            || o.times.iter().zip(&acc.times).any(|(a, b)| (a - b).abs() > 1e-12)
        {
            return Err(Error::GridMismatch("snapshot times differ".into()));
        }
        acc.merge(o);
    }
    Ok(acc)
}

/// Runs `config.n_realizations` independent disorder + noise realizations
/// and averages them. Realizations run in parallel; merging is in index
/// order so the result does not depend on scheduling.
pub fn simulate(model: &ModelSpec, config: &SimConfig) -> Result<EmpiricalObservables> {
    model.validate()?;
    config.validate()?;
    let runs: Vec<EmpiricalObservables> = (0..config.n_realizations)
        .into_par_iter()
        .map(|r| {
            let j = DisorderTensor::sample(model, disorder_seed(config.base_seed, r))?;
            run_trajectory(model, &j, config, r)
        })
        .collect::<Result<_>>()?;
    average_realizations(&runs)
}

/// `D(s,t) = -f'(K(t)) C(s,t) + A(t,s)`, `E(s,t) = -f'(K(s)) chi(s,t) + F(s,t)`
/// with `K` the realization-averaged diagonal.
pub fn derived_de(obs: &EmpiricalObservables, model: &ModelSpec) -> Result<(SquareGrid, SquareGrid)> {
    let (a, f) = match (&obs.a, &obs.f) {
        (Some(a), Some(f)) => (a, f),
        _ => return Err(Error::MissingAf),
    };
    let m = obs.len();
    let fp: Vec<f64> = obs.k.iter().map(|&k| model.confinement.f_prime(k)).collect();
    let d = SquareGrid::from_fn(m, |s, t| -fp[t] * obs.c.get(s, t) + a.get(t, s));
    let e = SquareGrid::from_fn(m, |s, t| -fp[s] * obs.chi.get(s, t) + f.get(s, t));
    Ok((d, e))
}
