//! Causal solver for the limiting two-time system
//!
//! ```text
//! d_s R(s,t) = -f'(K(s)) R(s,t) + int_t^s R(u,t) R(s,u) nu''(C(s,u)) du
//! d_s C(s,t) = -f'(K(s)) C(s,t) + int_0^s C(u,t) R(s,u) nu''(C(s,u)) du
//!                               + int_0^t nu'(C(s,u)) R(t,u) du
//! d_s K(s)   = -2 f'(K(s)) K(s) + 1 + 2 int_0^s psi(C(s,u)) R(s,u) du
//! ```
//!
//! with `R(s,s) = 1`, `C(s,s) = K(s)`, on the triangle `0 <= t <= s <= T`.
//! `nu` carries the `beta^2` factor. Rows are built one at a time: an
//! explicit Euler predictor followed by fixed-point sweeps of the implicit
//! trapezoid rule in `s`, with trapezoid quadrature for every memory integral.

mod refine;
mod residual;

pub use refine::{grid_refine_compare, RefinementRow};
pub use residual::{residual_integral_system, ResidualReport};

use crate::error::{Error, Result};
use crate::grid::TriGrid;
use crate::model::{ModelSpec, NuPolynomial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConstraintMode {
    /// Soft confinement through `f'(K(s))`.
    #[default]
    Soft,
    /// Hard sphere: `K = 1`, `f'(K(s))` replaced by the multiplier `z(s)`.
    Hard,
}

impl ConstraintMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConstraintMode::Soft => "soft",
            ConstraintMode::Hard => "hard",
        }
    }
}

impl std::str::FromStr for ConstraintMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(ConstraintMode::Soft),
            "hard" => Ok(ConstraintMode::Hard),
            other => Err(Error::InvalidConfig(format!("mode must be soft|hard, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub h: f64,
    pub t_max: f64,
    /// `K(0) = C(0,0)`; ignored in hard mode.
    pub k0: f64,
    pub corrector_tol: f64,
    pub corrector_max_iter: usize,
    pub mode: ConstraintMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            h: 0.005,
            t_max: 1.0,
            k0: 1.0,
            corrector_tol: 1e-10,
            corrector_max_iter: 50,
            mode: ConstraintMode::Soft,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::InvalidConfig(format!("h must be > 0, got {}", self.h)));
        }
        if !(self.t_max >= self.h) || !self.t_max.is_finite() {
            return Err(Error::InvalidConfig(format!("T must be >= h, got T = {}", self.t_max)));
        }
        let ratio = self.t_max / self.h;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio {
            return Err(Error::InvalidConfig(format!(
                "T = {} is not an integer multiple of h = {}",
                self.t_max, self.h
            )));
        }
        if self.mode == ConstraintMode::Soft && !(self.k0 > 0.0 && self.k0.is_finite()) {
            return Err(Error::InvalidConfig(format!("K0 must be > 0, got {}", self.k0)));
        }
        if !(self.corrector_tol > 0.0) {
            return Err(Error::InvalidConfig("corrector_tol must be > 0".into()));
        }
        if self.corrector_max_iter == 0 {
            return Err(Error::InvalidConfig("corrector_max_iter must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of grid times `round(T/h) + 1`.
    pub fn n_times(&self) -> usize {
        (self.t_max / self.h).round() as usize + 1
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverDiagnostics {
    /// Corrector sweeps used per row (row 0 has none).
    pub sweeps: Vec<usize>,
    /// Last sweep's maximal update per row.
    pub final_update: Vec<f64>,
}

impl SolverDiagnostics {
    pub fn max_sweeps(&self) -> usize {
        self.sweeps.iter().copied().max().unwrap_or(0)
    }

    pub fn total_sweeps(&self) -> usize {
        self.sweeps.iter().sum()
    }

    pub fn max_final_update(&self) -> f64 {
        self.final_update.iter().copied().fold(0.0, f64::max)
    }
}

/// Coupled `(R, C, K, chi)` on the triangular grid.
///
/// Off-triangle reads: `R` is zero, `C` mirrors, `chi(s,t) = chi(s,s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CkSolution {
    pub r: TriGrid,
    pub c: TriGrid,
    pub k: Vec<f64>,
    pub chi: TriGrid,
    pub mode: ConstraintMode,
    /// Hard mode multiplier `z(s)`.
    pub zlag: Option<Vec<f64>>,
    pub diagnostics: SolverDiagnostics,
}

impl CkSolution {
    pub fn h(&self) -> f64 {
        self.r.h()
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.r.times()
    }

    pub fn r_at(&self, i: usize, j: usize) -> f64 {
        self.r.get_causal(i, j)
    }

    pub fn c_at(&self, i: usize, j: usize) -> f64 {
        self.c.get_sym(i, j)
    }

    pub fn chi_at(&self, i: usize, j: usize) -> f64 {
        self.chi.get(i, j.min(i))
    }

    /// Effective confinement `f'(K(s))` (soft) or `z(s)` (hard) at each node.
    pub fn confinement_rate(&self, model: &ModelSpec) -> Vec<f64> {
        match (&self.zlag, self.mode) {
            (Some(z), ConstraintMode::Hard) => z.clone(),
            _ => self.k.iter().map(|&k| model.confinement.f_prime(k)).collect(),
        }
    }

    /// `H(s,t) = R(s,t) exp(int_t^s rate(u) du)`, trapezoid in `u`.
    pub fn response_envelope(&self, model: &ModelSpec) -> TriGrid {
        let rate = self.confinement_rate(model);
        let h = self.h();
        let n = self.len();
        let mut cum = vec![0.0; n];
        for i in 1..n {
            cum[i] = cum[i - 1] + 0.5 * h * (rate[i - 1] + rate[i]);
        }
        let mut out = TriGrid::zeros(h, n);
        for i in 0..n {
            for j in 0..=i {
                out.set(i, j, self.r.get(i, j) * (cum[i] - cum[j]).exp());
            }
        }
        out
    }

    /// Truncates to the first `n` grid times.
    pub fn truncated(&self, n: usize) -> CkSolution {
        let n = n.min(self.len());
        CkSolution {
            r: self.r.truncated(n),
            c: self.c.truncated(n),
            k: self.k[..n].to_vec(),
            chi: self.chi.truncated(n),
            mode: self.mode,
            zlag: self.zlag.as_ref().map(|z| z[..n].to_vec()),
            diagnostics: self.diagnostics.clone(),
        }
    }
}

/// Trapezoid weight sum `h (sum g_a..g_b - (g_a + g_b)/2)` over `a..=b`.
#[inline]
pub(crate) fn trapezoid(h: f64, values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut first = None;
    let mut last = 0.0;
    let mut count = 0usize;
    for v in values {
        if first.is_none() {
            first = Some(v);
        }
        sum += v;
        last = v;
        count += 1;
    }
    if count < 2 {
        return 0.0;
    }
    h * (sum - 0.5 * (first.unwrap_or(0.0) + last))
}

/// Cumulative trapezoid of `R(s, .)` along its second argument.
pub fn chi_from_r(r: &TriGrid) -> TriGrid {
    let h = r.h();
    let n = r.len();
    let mut chi = TriGrid::zeros(h, n);
    for i in 0..n {
        let row = r.row(i);
        let out = chi.row_mut(i);
        out[0] = 0.0;
        for j in 1..=i {
            out[j] = out[j - 1] + 0.5 * h * (row[j - 1] + row[j]);
        }
    }
    chi
}

struct RowWork {
    f_r: Vec<f64>,
    f_c: Vec<f64>,
    f_k: f64,
    rate: f64,
}

struct Solver<'a> {
    nu: NuPolynomial,
    model: &'a ModelSpec,
    mode: ConstraintMode,
    h: f64,
    r: TriGrid,
    c: TriGrid,
    k: Vec<f64>,
    z: Vec<f64>,
}

impl Solver<'_> {
    /// Memory integral `int_0^s psi(C(s,u)) R(s,u) du` on row `i`.
    fn psi_integral(&self, i: usize) -> f64 {
        let (rr, cr) = (self.r.row(i), self.c.row(i));
        trapezoid(self.h, (0..=i).map(|u| self.nu.psi(cr[u]) * rr[u]))
    }

    /// Confinement rate for row `i` given its current values.
    fn rate(&self, i: usize) -> f64 {
        match self.mode {
            ConstraintMode::Soft => self.model.confinement.f_prime(self.k[i]),
            ConstraintMode::Hard => 0.5 + self.psi_integral(i),
        }
    }

    /// Right-hand sides of the `R`, `C` and `K` equations on row `i`,
    /// columns `0..i` (the diagonal is pinned by the boundary conditions
    /// except for `C`, whose one-sided derivative is needed by the next row).
    fn derivatives(&self, i: usize) -> RowWork {
        let h = self.h;
        let (rr, cr) = (self.r.row(i), self.c.row(i));
        // R(i,u) nu''(C(i,u)) is shared by the R and first C memory integrals
        let w: Vec<f64> = (0..=i).map(|u| rr[u] * self.nu.d2(cr[u])).collect();
        let rate = self.rate(i);
        let mut f_r = vec![0.0; i + 1];
        let mut f_c = vec![0.0; i + 1];
        for j in 0..=i {
            let mem_r = trapezoid(h, (j..=i).map(|u| self.r.get(u, j) * w[u]));
            f_r[j] = -rate * rr[j] + mem_r;

            let mem_c1 = trapezoid(h, (0..=i).map(|u| self.c.get_sym(u, j) * w[u]));
            let rj = self.r.row(j);
            let mem_c2 = trapezoid(h, (0..=j).map(|u| self.nu.d1(cr[u]) * rj[u]));
            f_c[j] = -rate * cr[j] + mem_c1 + mem_c2;
        }
        let f_k = match self.mode {
            ConstraintMode::Soft => -2.0 * rate * self.k[i] + 1.0 + 2.0 * self.psi_integral(i),
            ConstraintMode::Hard => 0.0,
        };
        RowWork { f_r, f_c, f_k, rate }
    }

    fn set_diagonal(&mut self, i: usize) {
        self.r.set(i, i, 1.0);
        let k = self.k[i];
        self.c.set(i, i, k);
    }
}

/// Solves the limit equations on `[0, T]` with step `h`.
pub fn solve_ck(model: &ModelSpec, config: &SolverConfig) -> Result<CkSolution> {
    model.validate()?;
    config.validate()?;
    let nu = model.nu();
    if nu.coefficients().iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("nu coefficients".into()));
    }
    let n = config.n_times();
    let h = config.h;
    let k0 = match config.mode {
        ConstraintMode::Soft => config.k0,
        ConstraintMode::Hard => 1.0,
    };
    let mut s = Solver {
        nu,
        model,
        mode: config.mode,
        h,
        r: TriGrid::zeros(h, n),
        c: TriGrid::zeros(h, n),
        k: vec![k0; n],
        z: vec![0.0; n],
    };
    s.set_diagonal(0);
    let mut diagnostics = SolverDiagnostics { sweeps: vec![0], final_update: vec![0.0] };

    let mut prev = s.derivatives(0);
    s.z[0] = prev.rate;

    for i in 1..n {
        let p = i - 1;
        // predictor: explicit Euler from row p
        for j in 0..=p {
            let r = s.r.get(p, j) + h * prev.f_r[j];
            let c = s.c.get(p, j) + h * prev.f_c[j];
            s.r.set(i, j, r);
            s.c.set(i, j, c);
        }
        if config.mode == ConstraintMode::Soft {
            s.k[i] = s.k[p] + h * prev.f_k;
        }
        s.set_diagonal(i);

        let mut sweeps = 0;
        let mut update = f64::INFINITY;
        while sweeps < config.corrector_max_iter {
            let cur = s.derivatives(i);
            sweeps += 1;
            update = 0.0;
            for j in 0..=p {
                let r = s.r.get(p, j) + 0.5 * h * (prev.f_r[j] + cur.f_r[j]);
                let c = s.c.get(p, j) + 0.5 * h * (prev.f_c[j] + cur.f_c[j]);
                update = update.max((r - s.r.get(i, j)).abs()).max((c - s.c.get(i, j)).abs());
                s.r.set(i, j, r);
                s.c.set(i, j, c);
            }
            if config.mode == ConstraintMode::Soft {
                let k = s.k[p] + 0.5 * h * (prev.f_k + cur.f_k);
                update = update.max((k - s.k[i]).abs());
                s.k[i] = k;
            }
            s.set_diagonal(i);
            if !update.is_finite() {
                return Err(Error::NonFinite(format!("solver row {i} (t = {})", i as f64 * h)));
            }
            if update <= config.corrector_tol {
                break;
            }
        }
        if update > config.corrector_tol {
            return Err(Error::CorrectorDiverged { row: i, residual: update, iterations: sweeps });
        }
        diagnostics.sweeps.push(sweeps);
        diagnostics.final_update.push(update);
        prev = s.derivatives(i);
        s.z[i] = prev.rate;
    }

    let chi = chi_from_r(&s.r);
    Ok(CkSolution {
        chi,
        zlag: (config.mode == ConstraintMode::Hard).then(|| s.z.clone()),
        r: s.r,
        c: s.c,
        k: s.k,
        mode: config.mode,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConfinementSpec;
    use crate::oracles::{beta_zero_solution, bessel_h};

    fn beta_zero(z: f64) -> ModelSpec {
        ModelSpec::new(vec![1.0], 0.0, ConfinementSpec::ConstantFprime { z }, 1).unwrap()
    }

    fn sup_error_beta_zero(h: f64) -> f64 {
        let (z, k0) = (1.0, 1.6);
        let cfg = SolverConfig { h, t_max: 2.0, k0, ..SolverConfig::default() };
        let sol = solve_ck(&beta_zero(z), &cfg).unwrap();
        let mut err: f64 = 0.0;
        for i in 0..sol.len() {
            for j in 0..=i {
                let v = beta_zero_solution(z, k0, i as f64 * h, j as f64 * h).unwrap();
                err = err
                    .max((sol.r.get(i, j) - v.r).abs())
                    .max((sol.c.get(i, j) - v.c).abs());
            }
            let v = beta_zero_solution(z, k0, i as f64 * h, 0.0).unwrap();
            err = err.max((sol.k[i] - v.k).abs());
        }
        err
    }

    #[test]
    fn beta_zero_matches_closed_form_at_second_order() {
        let e1 = sup_error_beta_zero(0.02);
        let e2 = sup_error_beta_zero(0.01);
        assert!(e1 < 10.0 * 0.02 * 0.02, "{e1}");
        let order = (e1 / e2).log2();
        assert!(order > 1.9, "observed order {order}");
    }

    #[test]
    fn chi_of_exponential_response() {
        let z = 0.8;
        let h = 0.01;
        let cfg = SolverConfig { h, t_max: 1.5, ..SolverConfig::default() };
        let sol = solve_ck(&beta_zero(z), &cfg).unwrap();
        for i in 0..sol.len() {
            let s = i as f64 * h;
            let exact = (1.0 - (-z * s).exp()) / z;
            assert!((sol.chi_at(i, i) - exact).abs() < 2.0 * h * h);
            assert_eq!(sol.chi_at(i, 0), 0.0);
            assert_eq!(sol.chi_at(i, i + 3), sol.chi_at(i, i));
        }
    }

    #[test]
    fn chi_of_unit_grid_is_time() {
        let h = 0.1;
        let mut r = TriGrid::zeros(h, 6);
        for i in 0..6 {
            r.row_mut(i).fill(1.0);
        }
        let chi = chi_from_r(&r);
        for i in 0..6 {
            for j in 0..=i {
                assert!((chi.get(i, j) - j as f64 * h).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn structural_invariants() {
        let model = ModelSpec::pure(3, 1.0, ConfinementSpec::default(), 1).unwrap();
        let cfg = SolverConfig { h: 0.02, t_max: 1.0, ..SolverConfig::default() };
        let sol = solve_ck(&model, &cfg).unwrap();
        for i in 0..sol.len() {
            assert_eq!(sol.r_at(i, i), 1.0);
            assert_eq!(sol.k[i], sol.c_at(i, i));
            assert_eq!(sol.r_at(i, i + 1), 0.0);
            for j in 0..sol.len() {
                assert_eq!(sol.c_at(i, j), sol.c_at(j, i));
            }
        }
        // contraction ~ h/2 * d(2 f'(K) K)/dK ~ 0.2 here, so ~15 sweeps to 1e-10
        assert!(sol.diagnostics.max_sweeps() <= 20, "{}", sol.diagnostics.max_sweeps());
    }

    #[test]
    fn hard_mode_pins_k() {
        let model = ModelSpec::pure(3, 1.0, ConfinementSpec::default(), 1).unwrap();
        let cfg = SolverConfig {
            h: 0.02,
            t_max: 1.0,
            k0: 3.0,
            mode: ConstraintMode::Hard,
            ..SolverConfig::default()
        };
        let sol = solve_ck(&model, &cfg).unwrap();
        assert!(sol.k.iter().all(|&k| k == 1.0));
        let z = sol.zlag.as_ref().unwrap();
        assert_eq!(z[0], 0.5);
        assert!(z.iter().all(|&v| v >= 0.5));
    }

    #[test]
    fn pure_two_envelope_is_bessel() {
        let model = ModelSpec::pure(2, 1.0, ConfinementSpec::default(), 1).unwrap();
        let h = 0.01;
        let cfg = SolverConfig { h, t_max: 1.0, ..SolverConfig::default() };
        let sol = solve_ck(&model, &cfg).unwrap();
        let env = sol.response_envelope(&model);
        let mut err: f64 = 0.0;
        for i in 0..sol.len() {
            for j in 0..=i {
                err = err.max((env.get(i, j) - bessel_h((i - j) as f64 * h)).abs());
            }
        }
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn first_step_matches_initial_slope() {
        let model = ModelSpec::pure(3, 1.0, ConfinementSpec::default(), 1).unwrap();
        let k0 = 1.3;
        let expected = -2.0 * model.confinement.f_prime(k0) * k0 + 1.0;
        let err = |h: f64| {
            let cfg = SolverConfig { h, t_max: 0.1, k0, ..SolverConfig::default() };
            let sol = solve_ck(&model, &cfg).unwrap();
            (sol.k[1] - sol.k[0]) / h - expected
        };
        let (e1, e2) = (err(0.004), err(0.002));
        let ratio = e1 / e2;
        assert!((1.8..=2.2).contains(&ratio), "{e1} {e2}");
    }

    #[test]
    fn config_validation() {
        let model = beta_zero(1.0);
        let bad = [
            SolverConfig { h: 0.0, ..SolverConfig::default() },
            SolverConfig { t_max: 0.001, h: 0.01, ..SolverConfig::default() },
            SolverConfig { t_max: 1.003, h: 0.01, ..SolverConfig::default() },
            SolverConfig { k0: -1.0, ..SolverConfig::default() },
            SolverConfig { corrector_max_iter: 0, ..SolverConfig::default() },
        ];
        for cfg in bad {
            assert!(solve_ck(&model, &cfg).is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn corrector_failure_is_reported() {
        let model = ModelSpec::pure(3, 1.0, ConfinementSpec::default(), 1).unwrap();
        let cfg = SolverConfig { h: 0.05, t_max: 0.5, corrector_max_iter: 1, corrector_tol: 1e-14, ..SolverConfig::default() };
        assert!(matches!(
            solve_ck(&model, &cfg),
            Err(Error::CorrectorDiverged { row: 1, iterations: 1, .. })
        ));
    }
}
