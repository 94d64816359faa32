//! Model definition: interaction coefficients, the covariance polynomial
//! `nu`, the confinement potential and the Gaussian disorder.

mod disorder;

pub use disorder::{grad_field, multiset_rank, multiset_weight, DisorderTensor};

use crate::error::{Error, Result};

/// Largest interaction order kept densely symmetric in exact disorder mode.
pub const MAX_EXACT_ORDER: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConfinementSpec {
    /// `f(rho) = kappa (rho - 1)^r`, `r` even.
    Polynomial { kappa: f64, r: u32 },
    /// `f'(rho) = z` for every `rho`; only meaningful for analytic checks.
    ConstantFprime { z: f64 },
}

impl Default for ConfinementSpec {
    fn default() -> Self {
        ConfinementSpec::Polynomial { kappa: 5.0, r: 2 }
    }
}

impl ConfinementSpec {
    pub fn f_prime(&self, rho: f64) -> f64 {
        match *self {
            ConfinementSpec::Polynomial { kappa, r } => {
                kappa * f64::from(r) * (rho - 1.0).powi(r as i32 - 1)
            }
            ConfinementSpec::ConstantFprime { z } => z,
        }
    }

    /// Checks the growth condition against the maximal interaction order.
    pub fn validate(&self, max_order: usize) -> Result<()> {
        match *self {
            ConfinementSpec::Polynomial { kappa, r } => {
                if !(kappa > 0.0) || !kappa.is_finite() {
                    return Err(Error::InvalidSpec(format!("kappa must be > 0, got {kappa}")));
                }
                if r < 2 || r % 2 != 0 {
                    return Err(Error::InvalidSpec(format!(
                        "confinement exponent r must be an even integer >= 2, got {r}"
                    )));
                }
                if 2 * r as usize <= max_order {
                    return Err(Error::InvalidSpec(format!(
                        "confinement exponent r = {r} must exceed m/2 = {}",
                        max_order as f64 / 2.0
                    )));
                }
                Ok(())
            }
            ConfinementSpec::ConstantFprime { z } => {
                if z.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidSpec(format!("constant f' must be finite, got {z}")))
                }
            }
        }
    }
}

/// How the couplings are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DisorderMode {
    /// Fully symmetric couplings keyed by index multiset (p <= 3).
    #[default]
    Exact,
    /// Independent non-symmetric tensors per output index. Reproduces the
    /// diagonal part of the field covariance only.
    Decoupled,
}

impl DisorderMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DisorderMode::Exact => "exact",
            DisorderMode::Decoupled => "decoupled",
        }
    }
}

impl std::str::FromStr for DisorderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(DisorderMode::Exact),
            "decoupled" => Ok(DisorderMode::Decoupled),
            other => Err(Error::InvalidConfig(format!(
                "disorder mode must be exact|decoupled, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    /// `a[p-1]` is the coefficient of the order-`p` interaction.
    pub a: Vec<f64>,
    pub beta: f64,
    pub confinement: ConfinementSpec,
    pub n: usize,
    pub disorder_mode: DisorderMode,
}

impl ModelSpec {
    pub fn new(a: Vec<f64>, beta: f64, confinement: ConfinementSpec, n: usize) -> Result<Self> {
        let spec = ModelSpec {
            a,
            beta,
            confinement,
            n,
            disorder_mode: DisorderMode::Exact,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Pure order-`p` model with `a_p = 1`.
    pub fn pure(p: usize, beta: f64, confinement: ConfinementSpec, n: usize) -> Result<Self> {
        let mut a = vec![0.0; p.max(1)];
        a[p.max(1) - 1] = 1.0;
        Self::new(a, beta, confinement, n)
    }

    pub fn with_disorder_mode(mut self, mode: DisorderMode) -> Self {
        self.disorder_mode = mode;
        self
    }

    /// Maximal interaction order `m`.
    pub fn max_order(&self) -> usize {
        self.a.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.is_empty() {
            return Err(Error::InvalidSpec("m must be >= 1".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidSpec("N must be >= 1".into()));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidSpec(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        if self.a.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidSpec("coefficients a_p must be finite".into()));
        }
        if self.a.iter().all(|&a| a == 0.0) {
            return Err(Error::InvalidSpec("at least one a_p must be non-zero".into()));
        }
        self.confinement.validate(self.max_order())
    }

    /// Coefficients with the inverse temperature absorbed: `beta * a_p`.
    pub fn scaled_coefficients(&self) -> Vec<f64> {
        self.a.iter().map(|a| self.beta * a).collect()
    }

    pub fn nu(&self) -> NuPolynomial {
        NuPolynomial::from_spec(self)
    }

    /// Field covariance `E[G^i(x) G^j(y)]` for the exact symmetric disorder:
    /// `(x_j y_i / N) nu''(m) + 1{i=j} nu'(m)` with `m = x.y / N`.
    pub fn covariance_kernel(&self, x: &[f64], y: &[f64], i: usize, j: usize) -> Result<f64> {
        covariance_kernel_with(&self.nu(), self.n, x, y, i, j)
    }
}

pub(crate) fn covariance_kernel_with(
    nu: &NuPolynomial,
    n: usize,
    x: &[f64],
    y: &[f64],
    i: usize,
    j: usize,
) -> Result<f64> {
    for v in [x, y] {
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
    }
    for idx in [i, j] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, dim: n });
        }
    }
    let nf = n as f64;
    let overlap = dot(x, y) / nf;
    let mut k = x[j] * y[i] / nf * nu.eval(overlap, 2);
    if i == j {
        k += nu.eval(overlap, 1);
    }
    Ok(k)
}

/// `nu(r) = beta^2 sum_p a_p^2 / p! r^p` together with its derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct NuPolynomial {
    /// `derivs[k][q]` is the coefficient of `r^q` in the k-th derivative.
    derivs: [Vec<f64>; 4],
}

impl NuPolynomial {
    pub fn from_spec(spec: &ModelSpec) -> Self {
        let mut coeffs = vec![0.0; spec.max_order() + 1];
        let mut fact = 1.0;
        for (idx, b) in spec.scaled_coefficients().into_iter().enumerate() {
            let p = idx + 1;
            fact *= p as f64;
            coeffs[p] = b * b / fact;
        }
        Self::from_coefficients(coeffs)
    }

    /// Builds from raw power-series coefficients (`coeffs[q]` multiplies `r^q`).
    pub fn from_coefficients(coeffs: Vec<f64>) -> Self {
        let d1 = differentiate(&coeffs);
        let d2 = differentiate(&d1);
        let d3 = differentiate(&d2);
        NuPolynomial { derivs: [coeffs, d1, d2, d3] }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.derivs[0]
    }

    /// `order`-th derivative at `r` (Horner). Panics for `order > 3`.
    pub fn eval(&self, r: f64, order: usize) -> f64 {
        assert!(order <= 3, "nu derivatives are available up to order 3");
        horner(&self.derivs[order], r)
    }

    pub fn value(&self, r: f64) -> f64 {
        self.eval(r, 0)
    }

    pub fn d1(&self, r: f64) -> f64 {
        self.eval(r, 1)
    }

    pub fn d2(&self, r: f64) -> f64 {
        self.eval(r, 2)
    }

    pub fn d3(&self, r: f64) -> f64 {
        self.eval(r, 3)
    }

    /// `psi(r) = nu'(r) + r nu''(r)`.
    pub fn psi(&self, r: f64) -> f64 {
        self.d1(r) + r * self.d2(r)
    }

    pub fn is_zero(&self) -> bool {
        self.derivs[0].iter().all(|&c| c == 0.0)
    }
}

fn differentiate(c: &[f64]) -> Vec<f64> {
    if c.len() <= 1 {
        return vec![0.0];
    }
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(q, &v)| q as f64 * v)
        .collect()
}

fn horner(c: &[f64], r: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * r + v)
}

/// Four independent partial sums so the loop vectorizes; the reduction
/// order is fixed, so results stay bit-reproducible.
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    let (x, y) = (&x[..n], &y[..n]);
    let mut acc = [0.0f64; 4];
    let (xc, yc) = (x.chunks_exact(4), y.chunks_exact(4));
    let (xr, yr) = (xc.remainder(), yc.remainder());
    for (a, b) in xc.zip(yc) {
        for k in 0..4 {
            acc[k] += a[k] * b[k];
        }
    }
    let tail: f64 = xr.iter().zip(yr).map(|(a, b)| a * b).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
