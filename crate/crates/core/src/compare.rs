//! Simulator against solver on their common grid.

use std::fmt::Write as _;

use crate::ck::{solve_ck, CkSolution, SolverConfig};
use crate::error::{Error, Result};
use crate::grid::SquareGrid;
use crate::langevin::{simulate, EmpiricalObservables, SimConfig};
use crate::model::ModelSpec;

/// Differences are `first - second` on the lower triangle `t <= s` of the
/// common grid; entries above the diagonal are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub times: Vec<f64>,
    /// Solver nodes per snapshot interval (1 when both sides share a grid).
    pub solver_stride: usize,
    pub diff_c: SquareGrid,
    pub diff_chi: SquareGrid,
    pub sup_c: f64,
    pub rms_c: f64,
    pub sup_chi: f64,
    pub rms_chi: f64,
    /// Largest standard error of the empirical means over the grid.
    pub max_stderr_c: f64,
    pub max_stderr_chi: f64,
    pub tol: f64,
}

impl ComparisonReport {
    pub fn sup(&self) -> f64 {
        self.sup_c.max(self.sup_chi)
    }

    pub fn passed(&self) -> bool {
        self.sup() <= self.tol
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "grid          {} times, solver stride {}", self.times.len(), self.solver_stride);
        let _ = writeln!(out, "C    sup {:.6e}  rms {:.6e}  max stderr {:.3e}", self.sup_c, self.rms_c, self.max_stderr_c);
        let _ = writeln!(
            out,
            "chi  sup {:.6e}  rms {:.6e}  max stderr {:.3e}",
            self.sup_chi, self.rms_chi, self.max_stderr_chi
        );
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "tol  {:.3e}  {verdict}", self.tol);
        out
    }

    /// Per-node table `s, t, dC, dchi` over the lower triangle.
    pub fn table(&self) -> String {
        let mut out = String::from("s,t,diff_C,diff_chi\n");
        for s in 0..self.times.len() {
            for t in 0..=s {
                let _ = writeln!(
                    out,
                    "{:.16e},{:.16e},{:.16e},{:.16e}",
                    self.times[s],
                    self.times[t],
                    self.diff_c.get(s, t),
                    self.diff_chi.get(s, t)
                );
            }
        }
        out
    }
}

struct Side<'a> {
    c: &'a dyn Fn(usize, usize) -> f64,
    chi: &'a dyn Fn(usize, usize) -> f64,
}

fn compare_on(times: Vec<f64>, stride: usize, a: Side, b: Side, se: Option<(&SquareGrid, &SquareGrid)>, tol: f64) -> ComparisonReport {
    let m = times.len();
    let mut diff_c = SquareGrid::zeros(m);
    let mut diff_chi = SquareGrid::zeros(m);
    let (mut sup_c, mut sup_chi, mut ss_c, mut ss_chi) = (0.0f64, 0.0f64, 0.0, 0.0);
    let mut count = 0usize;
    for s in 0..m {
        for t in 0..=s {
            let dc = (a.c)(s, t) - (b.c)(s, t);
            let dx = (a.chi)(s, t) - (b.chi)(s, t);
            diff_c.set(s, t, dc);
            diff_chi.set(s, t, dx);
            sup_c = sup_c.max(dc.abs());
            sup_chi = sup_chi.max(dx.abs());
            ss_c += dc * dc;
            ss_chi += dx * dx;
            count += 1;
        }
    }
    let (max_stderr_c, max_stderr_chi) = match se {
        Some((vc, vx)) => {
            let mut out = (0.0f64, 0.0f64);
            for s in 0..m {
                for t in 0..=s {
                    out.0 = out.0.max(vc.get(s, t).max(0.0).sqrt());
                    out.1 = out.1.max(vx.get(s, t).max(0.0).sqrt());
                }
            }
            out
        }
        None => (0.0, 0.0),
    };
    let n = count.max(1) as f64;
    ComparisonReport {
        times,
        solver_stride: stride,
        diff_c,
        diff_chi,
        sup_c,
        rms_c: (ss_c / n).sqrt(),
        sup_chi,
        rms_chi: (ss_chi / n).sqrt(),
        max_stderr_c,
        max_stderr_chi,
        tol,
    }
}

/// Maps snapshot index to solver node. The solver step must divide the
/// snapshot spacing; snapshots past the solver horizon are dropped.
fn solver_nodes(times: &[f64], h: f64, n_solver: usize) -> Result<(Vec<usize>, usize)> {
    let mut nodes = Vec::with_capacity(times.len());
    for &t in times {
        let k = (t / h).round();
        if (k * h - t).abs() > 1e-9 * t.abs().max(1.0) {
            return Err(Error::GridMismatch(format!("snapshot time {t} is not a multiple of solver h = {h}")));
        }
        let k = k as usize;
        if k >= n_solver {
            break;
        }
        nodes.push(k);
    }
    if nodes.is_empty() {
        return Err(Error::GridMismatch("empirical and solver grids do not overlap".into()));
    }
    let stride = if nodes.len() > 1 { nodes[1] - nodes[0] } else { 1 };
    if nodes.windows(2).any(|w| w[1] - w[0] != stride) {
        return Err(Error::GridMismatch("snapshot times are not uniformly spaced".into()));
    }
    Ok((nodes, stride))
}

/// Empirical observables against the limit, restricted to the snapshot grid.
pub fn compare_grids(empirical: &EmpiricalObservables, limit: &CkSolution, tol: f64) -> Result<ComparisonReport> {
    let (nodes, stride) = solver_nodes(&empirical.times, limit.h(), limit.len())?;
    let m = nodes.len();
    let ec = |s: usize, t: usize| empirical.c.get(s, t);
    let ex = |s: usize, t: usize| empirical.chi.get(s, t);
    let lc = |s: usize, t: usize| limit.c_at(nodes[s], nodes[t]);
    let lx = |s: usize, t: usize| limit.chi_at(nodes[s], nodes[t]);
    let (vc, vx) = (empirical.c_variance(), empirical.chi_variance());
    Ok(compare_on(
        empirical.times[..m].to_vec(),
        stride,
        Side { c: &ec, chi: &ex },
        Side { c: &lc, chi: &lx },
        Some((&vc, &vx)),
        tol,
    ))
}

/// Two sets of observables on the same snapshot grid.
pub fn compare_observables(a: &EmpiricalObservables, b: &EmpiricalObservables, tol: f64) -> Result<ComparisonReport> {
    let m = a.len().min(b.len());
    if a.times[..m].iter().zip(&b.times[..m]).any(|(x, y)| (x - y).abs() > 1e-9 * x.abs().max(1.0)) {
        return Err(Error::GridMismatch("snapshot times differ".into()));
    }
    let (ac, ax) = (|s, t| a.c.get(s, t), |s, t| a.chi.get(s, t));
    let (bc, bx) = (|s, t| b.c.get(s, t), |s, t| b.chi.get(s, t));
    let (va, vb) = (a.c_variance(), b.c_variance());
    let (xa, xb) = (a.chi_variance(), b.chi_variance());
    let vc = SquareGrid::from_fn(m, |s, t| va.get(s, t) + vb.get(s, t));
    let vx = SquareGrid::from_fn(m, |s, t| xa.get(s, t) + xb.get(s, t));
    Ok(compare_on(a.times[..m].to_vec(), 1, Side { c: &ac, chi: &ax }, Side { c: &bc, chi: &bx }, Some((&vc, &vx)), tol))
}

/// Samples a solution every `stride` nodes as noiseless observables.
pub fn observables_from_solution(sol: &CkSolution, stride: usize) -> Result<EmpiricalObservables> {
    if stride == 0 {
        return Err(Error::InvalidConfig("stride must be >= 1".into()));
    }
    let nodes: Vec<usize> = (0..sol.len()).step_by(stride).collect();
    let m = nodes.len();
    let times = nodes.iter().map(|&k| k as f64 * sol.h()).collect();
    let c = SquareGrid::from_fn(m, |s, t| sol.c_at(nodes[s], nodes[t]));
    let chi = SquareGrid::from_fn(m, |s, t| sol.chi_at(nodes[s], nodes[t]));
    EmpiricalObservables::from_parts(times, c, chi, 1, None, None)
}

/// `sup[i][j]`: simulator at `ns[i]` against solver at `hs[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub ns: Vec<usize>,
    pub hs: Vec<f64>,
    pub sup: Vec<Vec<f64>>,
    /// Per-realization variance of `C_N`, maximised over the snapshot grid.
    pub realization_variance: Vec<f64>,
}

impl ConvergenceTable {
    pub fn render(&self) -> String {
        let mut out = String::from("N");
        for h in &self.hs {
            let _ = write!(out, "\th={h}");
        }
        out.push_str("\tvar(C_N)\n");
        for (i, n) in self.ns.iter().enumerate() {
            let _ = write!(out, "{n}");
            for v in &self.sup[i] {
                let _ = write!(out, "\t{v:.4e}");
            }
            let _ = writeln!(out, "\t{:.4e}", self.realization_variance[i]);
        }
        out
    }
}

pub fn convergence_study(
    model: &ModelSpec,
    sim: &SimConfig,
    solver: &SolverConfig,
    ns: &[usize],
    hs: &[f64],
) -> Result<ConvergenceTable> {
    if ns.is_empty() || hs.is_empty() {
        return Err(Error::InvalidConfig("need at least one N and one h".into()));
    }
    let sols: Vec<CkSolution> = hs
        .iter()
        .map(|&h| solve_ck(model, &SolverConfig { h, ..solver.clone() }))
        .collect::<Result<_>>()?;
    let mut sup = Vec::with_capacity(ns.len());
    let mut realization_variance = Vec::with_capacity(ns.len());
    for &n in ns {
        let m = ModelSpec { n, ..model.clone() };
        let obs = simulate(&m, sim)?;
        let row = sols
            .iter()
            .map(|sol| compare_grids(&obs, sol, f64::INFINITY).map(|r| r.sup()))
            .collect::<Result<Vec<_>>>()?;
        sup.push(row);
        let k = obs.n_realizations as f64;
        realization_variance.push(obs.c_variance().as_slice().iter().fold(0.0f64, |a, &v| a.max(v * k)));
    }
    Ok(ConvergenceTable { ns: ns.to_vec(), hs: hs.to_vec(), sup, realization_variance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConfinementSpec;

    fn p3_solution(h: f64) -> CkSolution {
        let model = ModelSpec::pure(3, 1.0, ConfinementSpec::default(), 1).unwrap();
        solve_ck(&model, &SolverConfig { h, t_max: 1.0, ..Default::default() }).unwrap()
    }

    #[test]
    fn solution_against_itself_is_zero() {
        let sol = p3_solution(0.01);
        let obs = observables_from_solution(&sol, 5).unwrap();
        let rep = compare_grids(&obs, &sol, 0.0).unwrap();
        assert_eq!(rep.sup(), 0.0);
        assert_eq!(rep.solver_stride, 5);
        assert_eq!(rep.times.len(), 21);
        assert!(rep.passed());
    }

    #[test]
    fn differences_are_antisymmetric() {
        let a = observables_from_solution(&p3_solution(0.01), 10).unwrap();
        let b = observables_from_solution(&p3_solution(0.05), 2).unwrap();
        let ab = compare_observables(&a, &b, 1.0).unwrap();
        let ba = compare_observables(&b, &a, 1.0).unwrap();
        assert!(ab.sup() > 0.0);
        assert_eq!(ab.sup_c, ba.sup_c);
        assert_eq!(ab.rms_chi, ba.rms_chi);
        for (x, y) in ab.diff_c.as_slice().iter().zip(ba.diff_c.as_slice()) {
            assert_eq!(*x, -*y);
        }
        assert!(ab.sup_c >= ab.rms_c && ab.sup_chi >= ab.rms_chi);
    }

    #[test]
    fn restriction_rules() {
        let sol = p3_solution(0.02);
        // 0.03 is not a multiple of 0.02
        let bad = observables_from_solution(&p3_solution(0.01), 3).unwrap();
        assert!(matches!(compare_grids(&bad, &sol, 1.0), Err(Error::GridMismatch(_))));
        // longer empirical horizon is cut to the solver's
        let model = ModelSpec::pure(3, 1.0, ConfinementSpec::default(), 1).unwrap();
        let long = solve_ck(&model, &SolverConfig { h: 0.02, t_max: 2.0, ..Default::default() }).unwrap();
        let obs = observables_from_solution(&long, 5).unwrap();
        let rep = compare_grids(&obs, &sol, 1.0).unwrap();
        assert_eq!(rep.times.len(), 11);
        assert_eq!(rep.sup(), 0.0);
    }

    #[test]
    fn single_point_study() {
        let model = ModelSpec::pure(3, 1.0, ConfinementSpec::default(), 8).unwrap();
        let sim = SimConfig { dt: 0.01, t_max: 0.2, snapshot_stride: 5, n_realizations: 2, ..Default::default() };
        let solver = SolverConfig { h: 0.01, t_max: 0.2, ..Default::default() };
        let table = convergence_study(&model, &sim, &solver, &[8], &[0.01]).unwrap();
        assert_eq!(table.sup.len(), 1);
        assert_eq!(table.sup[0].len(), 1);
        assert!(table.sup[0][0].is_finite());
        assert!(table.render().lines().count() == 2);
        assert!(convergence_study(&model, &sim, &solver, &[], &[0.01]).is_err());
    }
}
