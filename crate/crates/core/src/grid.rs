//! Two-time containers: a dense square grid for snapshot observables and a
//! lower-triangular grid for the causal solver.

/// Dense `n x n` row-major grid, `get(s, t)` with `s` the row.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareGrid {
    n: usize,
    data: Vec<f64>,
}

impl SquareGrid {
    pub fn zeros(n: usize) -> Self {
        SquareGrid { n, data: vec![0.0; n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for s in 0..n {
            for t in 0..n {
                data.push(f(s, t));
            }
        }
        SquareGrid { n, data }
    }

    pub fn from_rows(n: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == n * n).then_some(SquareGrid { n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.data[s * self.n + t]
    }

    #[inline]
    pub fn set(&mut self, s: usize, t: usize, v: f64) {
        self.data[s * self.n + t] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.data[s * self.n..(s + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }
}

/// Lower-triangular storage `v(i, j)` for `i >= j` on a uniform grid
/// `t_k = k h`. Reads above the diagonal are the owner's business.
#[derive(Debug, Clone, PartialEq)]
pub struct TriGrid {
    h: f64,
    n: usize,
    data: Vec<f64>,
}

impl TriGrid {
    pub fn zeros(h: f64, n: usize) -> Self {
        TriGrid { h, n, data: vec![0.0; n * (n + 1) / 2] }
    }

    #[inline]
    fn offset(i: usize) -> usize {
        i * (i + 1) / 2
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of grid times.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.time(k)).collect()
    }

    /// Value at `(i, j)`, `j <= i`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(j <= i && i < self.n);
        self.data[Self::offset(i) + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i && i < self.n);
        self.data[Self::offset(i) + j] = v;
    }

    /// Row `i`, columns `0..=i`.
    pub fn row(&self, i: usize) -> &[f64] {
        let o = Self::offset(i);
        &self.data[o..o + i + 1]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let o = Self::offset(i);
        &mut self.data[o..o + i + 1]
    }

    /// Mirror read: `v(max, min)`.
    #[inline]
    pub fn get_sym(&self, i: usize, j: usize) -> f64 {
        if j <= i {
            self.get(i, j)
        } else {
            self.get(j, i)
        }
    }

    /// Causal read: zero above the diagonal.
    #[inline]
    pub fn get_causal(&self, i: usize, j: usize) -> f64 {
        if j <= i {
            self.get(i, j)
        } else {
            0.0
        }
    }

    /// Keeps the first `n` grid times.
    pub fn truncated(&self, n: usize) -> TriGrid {
        let n = n.min(self.n);
        TriGrid { h: self.h, n, data: self.data[..n * (n + 1) / 2].to_vec() }
    }

    pub fn iter_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tri_layout() {
        let mut g = TriGrid::zeros(0.1, 4);
        for i in 0..4 {
            for j in 0..=i {
                g.set(i, j, (10 * i + j) as f64);
            }
        }
        assert_eq!(g.row(2), &[20.0, 21.0, 22.0]);
        assert_eq!(g.get_sym(1, 3), 31.0);
        assert_eq!(g.get_causal(1, 3), 0.0);
        assert_eq!(g.truncated(2).row(1), &[10.0, 11.0]);
        assert!((g.time(3) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn square_from_fn() {
        let g = SquareGrid::from_fn(3, |s, t| (s * 3 + t) as f64);
        assert_eq!(g.row(1), &[3.0, 4.0, 5.0]);
        assert_eq!(g.diagonal(), vec![0.0, 4.0, 8.0]);
    }
}
