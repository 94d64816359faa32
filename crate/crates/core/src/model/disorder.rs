use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{DisorderMode, ModelSpec, MAX_EXACT_ORDER};
use crate::error::{Error, Result};

/// Decoupled tensors above this many entries are refused (8 bytes each).
const MAX_DECOUPLED_ENTRIES: u128 = 1 << 27;

/// Rank of a sorted multiset `i_1 <= ... <= i_p` in colexicographic order:
/// `sum_m binom(i_m + m - 1, m)`.
pub fn multiset_rank(sorted: &[usize]) -> usize {
    sorted
        .iter()
        .enumerate()
        .map(|(k, &i)| binom(i + k, k + 1))
        .sum()
}

/// `prod_k l_k!` over the multiplicities `l_k` of a sorted multiset.
pub fn multiset_weight(sorted: &[usize]) -> f64 {
    let mut weight = 1.0;
    let mut run = 1.0;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1.0;
            weight *= run;
        } else {
            run = 1.0;
        }
    }
    weight
}

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of multisets of size `p` drawn from `n` symbols.
fn multiset_count(n: usize, p: usize) -> usize {
    binom(n + p - 1, p)
}

/// Advances a sorted tuple to the next multiset in colex order.
fn next_multiset(t: &mut [usize], n: usize) -> bool {
    let p = t.len();
    for k in 0..p {
        let cap = if k + 1 < p { t[k + 1] } else { n - 1 };
        if t[k] < cap {
            t[k] += 1;
            for v in &mut t[..k] {
                *v = 0;
            }
            return true;
        }
    }
    false
}

fn order_rng(seed: u64, p: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(p as u64);
    rng
}

/// Gaussian couplings together with the expanded field operator used for
/// fast gradient evaluation. Coefficients `beta * a_p` are folded into the
/// expanded weights, so a tensor belongs to the ModelSpec it was built for.
#[derive(Debug, Clone)]
pub struct DisorderTensor {
    n: usize,
    seed: u64,
    mode: DisorderMode,
    coefficients: Vec<f64>,
    /// Exact mode: `couplings[p-1][multiset_rank]`; empty when `a_p = 0`.
    couplings: Vec<Vec<f64>>,
    field: Field,
}

#[derive(Debug, Clone)]
enum Field {
    Exact {
        linear: Option<Vec<f64>>,
        /// Dense `N x N`.
        quadratic: Option<Vec<f64>>,
        /// Per output index, packed upper triangle `j <= k` with the
        /// off-diagonal entries doubled.
        cubic: Option<Vec<f64>>,
    },
    /// `tensors[p-1]` is `N x N^(p-1)`, weight `b_p / (p-1)!` folded in.
    Decoupled { tensors: Vec<Option<Vec<f64>>> },
}

impl DisorderTensor {
    /// Draws the disorder for `spec` deterministically from `seed`.
    pub fn sample(spec: &ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        match spec.disorder_mode {
            DisorderMode::Exact => Self::sample_exact(spec, seed),
            DisorderMode::Decoupled => Self::sample_decoupled(spec, seed),
        }
    }

    fn sample_exact(spec: &ModelSpec, seed: u64) -> Result<Self> {
        let n = spec.n;
        let nf = n as f64;
        let mut couplings = Vec::with_capacity(spec.max_order());
        for (idx, &a) in spec.a.iter().enumerate() {
            let p = idx + 1;
            if a == 0.0 || spec.beta == 0.0 {
                couplings.push(Vec::new());
                continue;
            }
            if p > MAX_EXACT_ORDER {
                return Err(Error::OrderTooLarge { p });
            }
            let mut rng = order_rng(seed, p);
            let scale = nf.powi(1 - p as i32);
            let mut values = Vec::with_capacity(multiset_count(n, p));
            let mut t = vec![0usize; p];
            loop {
                let sd = (multiset_weight(&t) * scale).sqrt();
                let z: f64 = rng.sample(StandardNormal);
                values.push(sd * z);
                if !next_multiset(&mut t, n) {
                    break;
                }
            }
            couplings.push(values);
        }
        Ok(Self::from_couplings(spec, seed, couplings))
    }

    /// Builds an exact-mode tensor from explicit `(indices, value)` entries.
    /// Index order within a tuple is irrelevant; later duplicates overwrite
    /// earlier ones. Unlisted multisets are zero.
    pub fn from_entries<I>(spec: &ModelSpec, seed: u64, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<usize>, f64)>,
    {
        spec.validate()?;
        let n = spec.n;
        let mut couplings: Vec<Vec<f64>> = Vec::with_capacity(spec.max_order());
        for (idx, &a) in spec.a.iter().enumerate() {
            let p = idx + 1;
            if a != 0.0 && p > MAX_EXACT_ORDER {
                return Err(Error::OrderTooLarge { p });
            }
            couplings.push(if a == 0.0 { Vec::new() } else { vec![0.0; multiset_count(n, p)] });
        }
        for (mut indices, value) in entries {
            let p = indices.len();
            if p == 0 || p > spec.max_order() {
                return Err(Error::InvalidSpec(format!("coupling of order {p} not in model")));
            }
            if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
                return Err(Error::IndexOutOfRange { index: bad, dim: n });
            }
            indices.sort_unstable();
            let store = &mut couplings[p - 1];
            if !store.is_empty() {
                store[multiset_rank(&indices)] = value;
            }
        }
        Ok(Self::from_couplings(spec, seed, couplings))
    }

    fn from_couplings(spec: &ModelSpec, seed: u64, couplings: Vec<Vec<f64>>) -> Self {
        let n = spec.n;
        let b = spec.scaled_coefficients();
        let get = |p: usize| -> Option<&Vec<f64>> {
            couplings.get(p - 1).filter(|c| !c.is_empty() && b[p - 1] != 0.0)
        };

        let linear = get(1).map(|c| c.iter().map(|&j| b[0] * j).collect());

        let quadratic = get(2).map(|c| {
            let mut w = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
                    w[i * n + j] = b[1] * c[multiset_rank(&[lo, hi])];
                }
            }
            w
        });

        let cubic = get(3).map(|c| {
            let packed = n * (n + 1) / 2;
            let half = 0.5 * b[2];
            let mut w = vec![0.0; n * packed];
            for i in 0..n {
                let row = &mut w[i * packed..(i + 1) * packed];
                let mut pos = 0;
                for j in 0..n {
                    for k in j..n {
                        let mut t = [i, j, k];
                        t.sort_unstable();
                        let mult = if j == k { 1.0 } else { 2.0 };
                        row[pos] = half * mult * c[multiset_rank(&t)];
                        pos += 1;
                    }
                }
            }
            w
        });

        DisorderTensor {
            n,
            seed,
            mode: DisorderMode::Exact,
            coefficients: b,
            couplings,
            field: Field::Exact { linear, quadratic, cubic },
        }
    }

    fn sample_decoupled(spec: &ModelSpec, seed: u64) -> Result<Self> {
        let n = spec.n;
        let nf = n as f64;
        let b = spec.scaled_coefficients();
        let mut tensors = Vec::with_capacity(spec.max_order());
        let mut fact = 1.0; // (p-1)!
        for (idx, &bp) in b.iter().enumerate() {
            let p = idx + 1;
            if p > 1 {
                fact *= (p - 1) as f64;
            }
            if bp == 0.0 {
                tensors.push(None);
                continue;
            }
            let entries = (n as u128).pow(p as u32);
            if entries > MAX_DECOUPLED_ENTRIES {
                return Err(Error::DisorderTooLarge {
                    p,
                    n,
                    entries,
                    limit: MAX_DECOUPLED_ENTRIES,
                });
            }
            // iid entries of variance (p-1)!/N^(p-1) reproduce nu'(m) on the diagonal
            let sd = (fact * nf.powi(1 - p as i32)).sqrt() * bp / fact;
            let mut rng = order_rng(seed, p);
            let data: Vec<f64> = (0..entries as usize)
                .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                .collect();
            tensors.push(Some(data));
        }
        Ok(DisorderTensor {
            n,
            seed,
            mode: DisorderMode::Decoupled,
            coefficients: b,
            couplings: Vec::new(),
            field: Field::Decoupled { tensors },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> DisorderMode {
        self.mode
    }

    /// Coupling `J_{i_1..i_p}` for any index order (exact mode only).
    pub fn coupling(&self, indices: &[usize]) -> Option<f64> {
        let p = indices.len();
        let store = self.couplings.get(p.checked_sub(1)?)?;
        if store.is_empty() || indices.iter().any(|&i| i >= self.n) {
            return None;
        }
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        Some(store[multiset_rank(&sorted)])
    }

    /// Stored couplings of order `p` in colex multiset order.
    pub fn couplings_of_order(&self, p: usize) -> &[f64] {
        self.couplings.get(p.wrapping_sub(1)).map_or(&[], |c| c.as_slice())
    }

    fn check_spec(&self, spec: &ModelSpec) -> Result<()> {
        if spec.n != self.n {
            return Err(Error::DimensionMismatch { expected: spec.n, got: self.n });
        }
        if spec.scaled_coefficients() != self.coefficients {
            return Err(Error::InvalidSpec(
                "disorder was sampled for different coefficients".into(),
            ));
        }
        Ok(())
    }

    /// `G(x)` with `beta` absorbed, written into `out`.
    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.n;
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        if out.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: out.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state vector".into()));
        }
        out.fill(0.0);
        match &self.field {
            Field::Exact { linear, quadratic, cubic } => {
                if let Some(l) = linear {
                    out.copy_from_slice(l);
                }
                if let Some(q) = quadratic {
                    for (i, g) in out.iter_mut().enumerate() {
                        *g += super::dot(&q[i * n..(i + 1) * n], x);
                    }
                }
                if let Some(c) = cubic {
                    let packed = n * (n + 1) / 2;
                    for (i, g) in out.iter_mut().enumerate() {
                        let row = &c[i * packed..(i + 1) * packed];
                        let mut acc = 0.0;
                        let mut pos = 0;
                        for j in 0..n {
                            let len = n - j;
                            acc += x[j] * super::dot(&row[pos..pos + len], &x[j..]);
                            pos += len;
                        }
                        *g += acc;
                    }
                }
            }
            Field::Decoupled { tensors } => {
                for (idx, t) in tensors.iter().enumerate() {
                    let Some(t) = t else { continue };
                    let block = n.pow(idx as u32);
                    for (i, g) in out.iter_mut().enumerate() {
                        *g += contract_full(&t[i * block..(i + 1) * block], x, idx);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n];
        self.grad_into(x, &mut out)?;
        Ok(out)
    }

    /// Gradient field for `spec`, checking that the tensor was built for it.
    pub fn grad_field(&self, spec: &ModelSpec, x: &[f64]) -> Result<Vec<f64>> {
        self.check_spec(spec)?;
        self.grad(x)
    }

    /// `H(x) = -2 sum_p (beta a_p / p!) sum_{ordered tuples} J x..x`,
    /// summed over stored multisets with their ordering counts.
    pub fn hamiltonian(&self, spec: &ModelSpec, x: &[f64]) -> Result<f64> {
        self.check_spec(spec)?;
        if self.mode != DisorderMode::Exact {
            return Err(Error::RequiresExactDisorder);
        }
        let n = self.n;
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state vector".into()));
        }
        let mut h = 0.0;
        for (idx, store) in self.couplings.iter().enumerate() {
            let p = idx + 1;
            let bp = self.coefficients[idx];
            if store.is_empty() || bp == 0.0 {
                continue;
            }
            // p!/prod(l_k!) orderings per multiset, divided by the p! prefactor
            let mut t = vec![0usize; p];
            let mut pos = 0;
            let mut sum = 0.0;
            loop {
                let monomial: f64 = t.iter().map(|&i| x[i]).product();
                sum += store[pos] * monomial / multiset_weight(&t);
                pos += 1;
                if !next_multiset(&mut t, n) {
                    break;
                }
            }
            h += -2.0 * bp * sum;
        }
        Ok(h)
    }

    /// Lower bound on the disorder norm
    /// `max_p sup_{|u^k| <= 1} |N^{(p-2)/2} sum J u^1..u^p|`
    /// by alternating maximisation over the unit vectors. Non-decreasing in
    /// `iterations`.
    pub fn norm_estimate(&self, iterations: usize) -> Result<f64> {
        if self.mode != DisorderMode::Exact {
            return Err(Error::RequiresExactDisorder);
        }
        let n = self.n;
        let nf = n as f64;
        let mut best: f64 = 0.0;
        for (idx, store) in self.couplings.iter().enumerate() {
            let p = idx + 1;
            if store.is_empty() {
                continue;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x9e37_79b9_7f4a_7c15);
            let mut us: Vec<Vec<f64>> = (0..p)
                .map(|_| {
                    let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                    normalized(v).unwrap_or_else(|| unit(n))
                })
                .collect();
            let mut value: f64 = 0.0;
            for _ in 0..iterations.max(1) {
                for slot in 0..p {
                    let others: Vec<&[f64]> = us
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| k != slot)
                        .map(|(_, u)| u.as_slice())
                        .collect();
                    let v = self.contract_raw(p, &others);
                    let norm = super::dot(&v, &v).sqrt();
                    if norm > 0.0 {
                        us[slot] = v.into_iter().map(|c| c / norm).collect();
                    }
                    value = value.max(norm);
                }
            }
            best = best.max(nf.powf((p as f64 - 2.0) / 2.0) * value);
        }
        Ok(best)
    }

    /// `v_i = sum J_{i i_2 .. i_p} u^2_{i_2} .. u^p_{i_p}` on the raw couplings.
    fn contract_raw(&self, p: usize, others: &[&[f64]]) -> Vec<f64> {
        let n = self.n;
        let store = &self.couplings[p - 1];
        let mut v = vec![0.0; n];
        match p {
            1 => v.copy_from_slice(store),
            2 => {
                for (i, vi) in v.iter_mut().enumerate() {
                    *vi = (0..n)
                        .map(|j| {
                            let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
                            store[multiset_rank(&[lo, hi])] * others[0][j]
                        })
                        .sum();
                }
            }
            3 => {
                for (i, vi) in v.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for j in 0..n {
                        for k in 0..n {
                            let mut t = [i, j, k];
                            t.sort_unstable();
                            acc += store[multiset_rank(&t)] * others[0][j] * others[1][k];
                        }
                    }
                    *vi = acc;
                }
            }
            _ => unreachable!("exact mode holds p <= 3"),
        }
        v
    }
}

/// `sum_I t[I] x^I` over all ordered `k`-tuples, `t` dense row-major.
fn contract_full(t: &[f64], x: &[f64], k: usize) -> f64 {
    if k == 0 {
        return t[0];
    }
    let n = x.len();
    if k == 1 {
        return super::dot(t, x);
    }
    let reduced: Vec<f64> = t.chunks_exact(n).map(|row| super::dot(row, x)).collect();
    contract_full(&reduced, x, k - 1)
}

fn normalized(v: Vec<f64>) -> Option<Vec<f64>> {
    let norm = super::dot(&v, &v).sqrt();
    (norm > 0.0).then(|| v.into_iter().map(|c| c / norm).collect())
}

fn unit(n: usize) -> Vec<f64> {
    vec![1.0 / (n as f64).sqrt(); n]
}

/// Gradient field `G(x)` of `spec` under disorder `j`.
pub fn grad_field(spec: &ModelSpec, j: &DisorderTensor, x: &[f64]) -> Result<Vec<f64>> {
    j.grad_field(spec, x)
}
