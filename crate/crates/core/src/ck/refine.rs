use super::{solve_ck, CkSolution, SolverConfig};
use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Sup difference between the solutions at `h / 2^level` and
/// `h / 2^(level-1)`, both restricted to the coarsest grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementRow {
    pub level: usize,
    pub h: f64,
    pub diff_r: f64,
    pub diff_c: f64,
    pub diff_k: f64,
    /// `log2` of the previous row's max difference over this one.
    pub observed_order: Option<f64>,
}

impl RefinementRow {
    pub fn max_diff(&self) -> f64 {
        self.diff_r.max(self.diff_c).max(self.diff_k)
    }
}

fn restricted_diff(coarse: &CkSolution, fine: &CkSolution, stride_c: usize, stride_f: usize, n: usize) -> [f64; 3] {
    let mut d = [0.0f64; 3];
    for i in 0..n {
        for j in 0..=i {
            let (ic, jc) = (i * stride_c, j * stride_c);
            let (i_f, jf) = (i * stride_f, j * stride_f);
            d[0] = d[0].max((coarse.r.get(ic, jc) - fine.r.get(i_f, jf)).abs());
            d[1] = d[1].max((coarse.c.get(ic, jc) - fine.c.get(i_f, jf)).abs());
        }
        d[2] = d[2].max((coarse.k[i * stride_c] - fine.k[i * stride_f]).abs());
    }
    d
}

/// Solves at `h, h/2, ..., h/2^(levels-1)` and tabulates successive
/// differences on the coarsest grid. One level yields an empty table.
pub fn grid_refine_compare(model: &ModelSpec, config: &SolverConfig, levels: usize) -> Result<Vec<RefinementRow>> {
    if levels == 0 {
        return Err(Error::InvalidConfig("levels must be >= 1".into()));
    }
    config.validate()?;
    let n = config.n_times();
    let mut rows: Vec<RefinementRow> = Vec::new();
    let mut prev = solve_ck(model, config)?;
    for level in 1..levels {
        let cfg = SolverConfig { h: config.h / (1u64 << level) as f64, ..config.clone() };
        let next = solve_ck(model, &cfg)?;
        let [diff_r, diff_c, diff_k] = restricted_diff(&prev, &next, 1 << (level - 1), 1 << level, n);
        let mut row = RefinementRow { level, h: cfg.h, diff_r, diff_c, diff_k, observed_order: None };
        if let Some(last) = rows.last() {
            let (a, b) = (last.max_diff(), row.max_diff());
            if a > 0.0 && b > 0.0 {
                row.observed_order = Some((a / b).log2());
            }
        }
        rows.push(row);
        prev = next;
    }
    Ok(rows)
}
