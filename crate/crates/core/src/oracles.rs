//! Independent reference computations: Catalan numbers and non-crossing
//! pairings, the Catalan generating series for the p=2 response, the
//! beta=0 closed forms, and a Monte-Carlo check of the field covariance.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{DisorderMode, DisorderTensor, ModelSpec};

pub const MAX_CATALAN: usize = 30;
pub const MAX_ENUMERATION: usize = 6;
pub const MAX_SERIES_ORDER: usize = 4;
/// Deepest order evaluated by nested quadrature for a non-constant kernel.
pub const MAX_QUADRATURE_ORDER: usize = 2;
pub const QUADRATURE_POINTS: usize = 64;

/// Catalan number `(2n)! / (n! (n+1)!)`.
pub fn catalan(n: usize) -> Result<u64> {
    if n > MAX_CATALAN {
        return Err(Error::TooLarge { what: "catalan n", n, max: MAX_CATALAN });
    }
    let mut c: u128 = 1;
    for k in 0..n as u128 {
        c = c * 2 * (2 * k + 1) / (k + 2);
    }
    Ok(c as u64)
}

/// Fixed-point-free, crossing-free involution of `{0, .., 2n-1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NcInvolution {
    pub n: usize,
    /// `pairing[i]` is the partner of `i`.
    pub pairing: Vec<usize>,
}

impl NcInvolution {
    /// Left endpoints `{ i : i < sigma(i) }`.
    pub fn cr(&self) -> Vec<usize> {
        (0..2 * self.n).filter(|&i| i < self.pairing[i]).collect()
    }

    pub fn is_involution(&self) -> bool {
        self.pairing.len() == 2 * self.n
            && self
                .pairing
                .iter()
                .enumerate()
                .all(|(i, &j)| j < self.pairing.len() && j != i && self.pairing[j] == i)
    }

    /// No `a < b < c < d` with `sigma(a) = c` and `sigma(b) = d`.
    pub fn is_non_crossing(&self) -> bool {
        let arcs: Vec<(usize, usize)> = self.cr().into_iter().map(|i| (i, self.pairing[i])).collect();
        arcs.iter().all(|&(a, c)| {
            arcs.iter().all(|&(b, d)| !(a < b && b < c && c < d))
        })
    }

    /// 1-based pairs, as usually written.
    pub fn pairs_one_based(&self) -> Vec<(usize, usize)> {
        self.cr().into_iter().map(|i| (i + 1, self.pairing[i] + 1)).collect()
    }
}

/// All non-crossing perfect matchings of `2n` points, `n <= 6`.
pub fn nc_pairings_enumerate(n: usize) -> Result<Vec<NcInvolution>> {
    if n > MAX_ENUMERATION {
        return Err(Error::TooLarge { what: "pairing size n", n, max: MAX_ENUMERATION });
    }
    Ok(nc_blocks(0, 2 * n)
        .into_iter()
        .map(|arcs| {
            let mut pairing = vec![0; 2 * n];
            for (a, b) in arcs {
                pairing[a] = b;
                pairing[b] = a;
            }
            NcInvolution { n, pairing }
        })
        .collect())
}

/// Non-crossing matchings of `lo..hi`: `lo` is paired with some `k`, the
/// inside `lo+1..k` and the outside `k+1..hi` are matched independently.
fn nc_blocks(lo: usize, hi: usize) -> Vec<Vec<(usize, usize)>> {
    if lo >= hi {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for k in (lo + 1..hi).step_by(2) {
        let outside = nc_blocks(k + 1, hi);
        for inner in nc_blocks(lo + 1, k) {
            for outer in &outside {
                let mut arcs = Vec::with_capacity((hi - lo) / 2);
                arcs.push((lo, k));
                arcs.extend_from_slice(&inner);
                arcs.extend_from_slice(outer);
                out.push(arcs);
            }
        }
    }
    out
}

/// Kernel `k(u, v) = nu''(C(u, v))` entering the pairing series.
pub enum NcKernel<'a> {
    Constant(f64),
    Field(&'a (dyn Fn(f64, f64) -> f64 + Sync)),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    /// `(2 tau)^{2(n+1)} sup|k|^{n+1} / (2n+2)!` for the first omitted order.
    pub truncation_bound: f64,
}

/// Truncated series
/// `1 + sum_{n <= n_max} int_{t <= t_1 <= .. <= t_2n <= s} sum_{sigma in NC_n}
///  prod_{i in cr(sigma)} k(t_sigma(i), t_i)`.
///
/// `sup_abs` bounds `|k|` on the simplex; for a constant kernel it is taken
/// from the constant.
pub fn h_series_nc(kernel: NcKernel<'_>, s: f64, t: f64, n_max: usize, sup_abs: Option<f64>) -> Result<SeriesValue> {
    if n_max > MAX_SERIES_ORDER {
        return Err(Error::TooLarge { what: "series order n_max", n: n_max, max: MAX_SERIES_ORDER });
    }
    let tau = s - t;
    if tau < 0.0 {
        return Err(Error::InvalidConfig(format!("series needs s >= t, got s={s}, t={t}")));
    }
    let (value, sup) = match kernel {
        NcKernel::Constant(c) => {
            let mut sum = 1.0;
            // simplex volume tau^{2n} / (2n)!
            let mut vol = 1.0;
            for n in 1..=n_max {
                vol *= tau * tau / ((2 * n - 1) * (2 * n)) as f64;
                sum += catalan(n)? as f64 * c.powi(n as i32) * vol;
            }
            (sum, sup_abs.unwrap_or(c.abs()))
        }
        NcKernel::Field(f) => {
            if n_max > MAX_QUADRATURE_ORDER {
                return Err(Error::TooLarge {
                    what: "series order with a non-constant kernel",
                    n: n_max,
                    max: MAX_QUADRATURE_ORDER,
                });
            }
            let sup = sup_abs.ok_or_else(|| {
                Error::InvalidConfig("a bound on |k| is needed for a non-constant kernel".into())
            })?;
            let mut sum = 1.0;
            for n in 1..=n_max {
                let pairings = nc_pairings_enumerate(n)?;
                let integrand = |times: &[f64]| -> f64 {
                    pairings
                        .iter()
                        .map(|sig| {
                            sig.cr()
                                .into_iter()
                                .map(|i| f(times[sig.pairing[i]], times[i]))
                                .product::<f64>()
                        })
                        .sum()
                };
                sum += simplex_integral(&integrand, t, s, 2 * n, QUADRATURE_POINTS);
            }
            (sum, sup)
        }
    };
    let m = n_max + 1;
    let mut fact = 1.0;
    for k in 1..=2 * m {
        fact *= k as f64;
    }
    let bound = (2.0 * tau).powi(2 * m as i32) * sup.powi(m as i32) / fact;
    Ok(SeriesValue { value, truncation_bound: bound })
}

/// `int_{lo <= t_1 <= .. <= t_dim <= hi} g(t_1..t_dim)` by nested trapezoid
/// rules with `points` intervals per level.
fn simplex_integral(g: &(dyn Fn(&[f64]) -> f64 + Sync), lo: f64, hi: f64, dim: usize, points: usize) -> f64 {
    let mut times = vec![0.0; dim];
    nested(g, lo, hi, dim, points, &mut times)
}

fn nested(g: &(dyn Fn(&[f64]) -> f64 + Sync), lo: f64, hi: f64, level: usize, points: usize, times: &mut [f64]) -> f64 {
    if level == 0 {
        return g(times);
    }
    let width = hi - lo;
    if width <= 0.0 {
        return 0.0;
    }
    let step = width / points as f64;
    let mut acc = 0.0;
    for k in 0..=points {
        let u = lo + k as f64 * step;
        times[level - 1] = u;
        let w = if k == 0 || k == points { 0.5 } else { 1.0 };
        // the innermost variables live below u
        let inner = nested(g, lo, u, level - 1, points, times);
        acc += w * inner;
    }
    acc * step
}

/// `h(tau) = sum_n C_n tau^{2n} / (2n)! = I_1(2 tau) / tau`, the exponential
/// moment generating function of the semicircle law on `[-2, 2]`.
pub fn bessel_h(tau: f64) -> f64 {
    let x = tau * tau;
    let mut term = 1.0; // tau^{2n} / (n! (n+1)!)
    let mut sum = 1.0;
    for n in 0..10_000u32 {
        term *= x / (f64::from(n + 1) * f64::from(n + 2));
        sum += term;
        if term <= f64::EPSILON * 1e-2 * sum && f64::from(n) > tau {
            break;
        }
    }
    sum
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaZeroValues {
    pub r: f64,
    pub c: f64,
    /// `K(s)`.
    pub k: f64,
}

/// Closed forms of the limit equations with all memory terms switched off
/// and `f' = z`: `R = e^{-z(s-t)}`, `K(s) = 1/(2z) + (K0 - 1/(2z)) e^{-2zs}`,
/// `C(s,t) = e^{-z(s-t)} K(t)`.
pub fn beta_zero_solution(z: f64, k0: f64, s: f64, t: f64) -> Result<BetaZeroValues> {
    if !(z > 0.0) {
        return Err(Error::InvalidConfig(format!("beta=0 closed form needs z > 0, got {z}")));
    }
    if s < t {
        return Err(Error::InvalidConfig(format!("beta=0 closed form needs s >= t, got s={s}, t={t}")));
    }
    let k_at = |u: f64| 0.5 / z + (k0 - 0.5 / z) * (-2.0 * z * u).exp();
    let r = (-z * (s - t)).exp();
    Ok(BetaZeroValues { r, c: r * k_at(t), k: k_at(s) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelEntry {
    pub point: usize,
    pub i: usize,
    pub j: usize,
    pub empirical: f64,
    pub stderr: f64,
    pub predicted: f64,
}

impl KernelEntry {
    /// Deviation in standard errors.
    pub fn z_score(&self) -> f64 {
        (self.empirical - self.predicted) / self.stderr
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelCheckReport {
    pub n: usize,
    pub n_samples: usize,
    pub entries: Vec<KernelEntry>,
}

impl KernelCheckReport {
    pub fn max_abs_z(&self) -> f64 {
        self.entries.iter().map(|e| e.z_score().abs()).fold(0.0, f64::max)
    }
}

/// Averages `G^i(x) G^j(y)` over `n_samples` independent disorders for each
/// `(x, y)` in `points` and compares with the analytic covariance kernel.
pub fn kernel_mc_check(
    model: &ModelSpec,
    n_samples: usize,
    points: &[(Vec<f64>, Vec<f64>)],
    seed: u64,
) -> Result<KernelCheckReport> {
    const MAX_N: usize = 16;
    if model.disorder_mode != DisorderMode::Exact {
        return Err(Error::RequiresExactDisorder);
    }
    if model.n > MAX_N {
        return Err(Error::TooLarge { what: "kernel check N", n: model.n, max: MAX_N });
    }
    if n_samples < 2 {
        return Err(Error::InvalidConfig("kernel check needs at least 2 samples".into()));
    }
    let n = model.n;
    for (x, y) in points {
        for v in [x, y] {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: v.len() });
            }
        }
    }
    let cells = points.len() * n * n;
    let chunk = 4096;
    let chunks: Vec<(Vec<f64>, Vec<f64>)> = (0..n_samples.div_ceil(chunk))
        .into_par_iter()
        .map(|c| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut sum = vec![0.0; cells];
            let mut sq = vec![0.0; cells];
            for s in c * chunk..((c + 1) * chunk).min(n_samples) {
                let dis = DisorderTensor::sample(model, crate::langevin::disorder_seed(seed, s))?;
                for (p, (x, y)) in points.iter().enumerate() {
                    let gx = dis.grad(x)?;
                    let gy = dis.grad(y)?;
                    for i in 0..n {
                        for j in 0..n {
                            let v = gx[i] * gy[j];
                            let idx = (p * n + i) * n + j;
                            sum[idx] += v;
                            sq[idx] += v * v;
                        }
                    }
                }
            }
            Ok((sum, sq))
        })
        .collect::<Result<_>>()?;
    let mut sum = vec![0.0; cells];
    let mut sq = vec![0.0; cells];
    for (s, q) in &chunks {
        for k in 0..cells {
            sum[k] += s[k];
            sq[k] += q[k];
        }
    }
    let ns = n_samples as f64;
    let nu = model.nu();
    let mut entries = Vec::with_capacity(cells);
    for (p, (x, y)) in points.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                let idx = (p * n + i) * n + j;
                let mean = sum[idx] / ns;
                let var = (sq[idx] / ns - mean * mean).max(0.0) * ns / (ns - 1.0);
                entries.push(KernelEntry {
                    point: p,
                    i,
                    j,
                    empirical: mean,
                    stderr: (var / ns).sqrt(),
                    predicted: crate::model::covariance_kernel_with(&nu, n, x, y, i, j)?,
                });
            }
        }
    }
    Ok(KernelCheckReport { n, n_samples, entries })
}
