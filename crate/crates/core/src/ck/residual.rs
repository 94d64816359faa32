//! Cross-check of a solution against the integral form of the dynamics in
//! the unknowns `(C, chi, D, E)`, with `D` and `E` reconstructed from
//! `(R, C, K)` through
//!
//! ```text
//! D(s,t) = -f'(K(t)) C(t,s) + int_0^s nu'(C(t,u)) R(s,u) du
//!                           + int_0^t C(s,u) nu''(C(t,u)) R(t,u) du
//! E(s,t) = -f'(K(s)) chi(s,t) + int_0^s chi(u,t) nu''(C(s,u)) R(s,u) du
//! ```
//!
//! (the upper limits use that `R` vanishes above the diagonal).

use super::{trapezoid, CkSolution};
use crate::grid::SquareGrid;
use crate::model::ModelSpec;

/// Sup-norm residuals over the full square grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    /// `C(s,t) = C(s,0) + chi(s,t) + int_0^t D(s,u) du`.
    pub c1: f64,
    /// `chi(s,t) = s ^ t + int_0^s E(u,t) du`.
    pub chi: f64,
    pub d: f64,
    pub e: f64,
    /// `sup_s |E(s,0)|`.
    pub e_at_zero: f64,
    /// `sup_{t >= s} |E(s,t) - E(s,s)|`.
    pub e_flat: f64,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.c1.max(self.chi).max(self.d).max(self.e)
    }
}

struct Fields {
    n: usize,
    h: f64,
    c: SquareGrid,
    chi: SquareGrid,
    r: SquareGrid,
    rate: Vec<f64>,
    nu1: SquareGrid,
    nu2: SquareGrid,
}

impl Fields {
    fn new(sol: &CkSolution, model: &ModelSpec) -> Self {
        let n = sol.len();
        let nu = model.nu();
        let c = SquareGrid::from_fn(n, |s, t| sol.c_at(s, t));
        Fields {
            n,
            h: sol.h(),
            chi: SquareGrid::from_fn(n, |s, t| sol.chi_at(s, t)),
            r: SquareGrid::from_fn(n, |s, t| sol.r_at(s, t)),
            rate: sol.confinement_rate(model),
            nu1: SquareGrid::from_fn(n, |s, t| nu.d1(c.get(s, t))),
            nu2: SquareGrid::from_fn(n, |s, t| nu.d2(c.get(s, t))),
            c,
        }
    }

    fn trap(&self, upto: usize, f: impl Fn(usize) -> f64) -> f64 {
        trapezoid(self.h, (0..=upto).map(f))
    }

    fn reconstruct_d(&self) -> SquareGrid {
        SquareGrid::from_fn(self.n, |s, t| {
            -self.rate[t] * self.c.get(t, s)
                + self.trap(s, |u| self.nu1.get(t, u) * self.r.get(s, u))
                + self.trap(t, |u| self.c.get(s, u) * self.nu2.get(t, u) * self.r.get(t, u))
        })
    }

    fn reconstruct_e(&self) -> SquareGrid {
        SquareGrid::from_fn(self.n, |s, t| {
            -self.rate[s] * self.chi.get(s, t)
                + self.trap(s, |u| self.chi.get(u, t) * self.nu2.get(s, u) * self.r.get(s, u))
        })
    }
}

/// Evaluates both sides of the four integral equations with trapezoid
/// quadrature and reports sup-norm residuals plus the `E` boundary checks.
pub fn residual_integral_system(sol: &CkSolution, model: &ModelSpec) -> ResidualReport {
    let f = Fields::new(sol, model);
    let d = f.reconstruct_d();
    let e = f.reconstruct_e();
    let n = f.n;
    let h = f.h;

    let mut rep = ResidualReport { c1: 0.0, chi: 0.0, d: 0.0, e: 0.0, e_at_zero: 0.0, e_flat: 0.0 };
    for s in 0..n {
        rep.e_at_zero = rep.e_at_zero.max(e.get(s, 0).abs());
        for t in 0..n {
            if t >= s {
                rep.e_flat = rep.e_flat.max((e.get(s, t) - e.get(s, s)).abs());
            }

            let rhs_c1 = f.c.get(s, 0) + f.chi.get(s, t) + f.trap(t, |u| d.get(s, u));
            rep.c1 = rep.c1.max((f.c.get(s, t) - rhs_c1).abs());

            let rhs_chi = s.min(t) as f64 * h + f.trap(s, |u| e.get(u, t));
            rep.chi = rep.chi.max((f.chi.get(s, t) - rhs_chi).abs());

            let top = s.max(t);
            let rhs_d = -f.rate[t] * f.c.get(t, s)
                - f.trap(top, |u| f.nu1.get(t, u) * d.get(s, u))
                - f.trap(top, |u| f.c.get(s, u) * f.nu2.get(t, u) * d.get(t, u))
                + f.c.get(s, top) * f.nu1.get(top, t)
                - f.c.get(s, 0) * f.nu1.get(0, t);
            rep.d = rep.d.max((d.get(s, t) - rhs_d).abs());

            let rhs_e = -f.rate[s] * f.chi.get(s, t)
                - f.trap(s, |u| f.nu1.get(s, u) * e.get(u, t))
                - f.trap(s, |u| f.chi.get(u, t) * f.nu2.get(s, u) * d.get(s, u))
                + f.chi.get(s, t) * f.nu1.get(s, s)
                - f.trap(s.min(t), |u| f.nu1.get(s, u));
            rep.e = rep.e.max((e.get(s, t) - rhs_e).abs());
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ck::{solve_ck, SolverConfig};
    use crate::grid::TriGrid;
    use crate::model::ConfinementSpec;
    use crate::oracles::beta_zero_solution;

    fn closed_form(z: f64, k0: f64, h: f64, n: usize) -> CkSolution {
        let mut r = TriGrid::zeros(h, n);
        let mut c = TriGrid::zeros(h, n);
        let mut chi = TriGrid::zeros(h, n);
        let mut k = vec![0.0; n];
        for i in 0..n {
            for j in 0..=i {
                let v = beta_zero_solution(z, k0, i as f64 * h, j as f64 * h).unwrap();
                r.set(i, j, v.r);
                c.set(i, j, v.c);
                let s = i as f64 * h;
                let t = j as f64 * h;
                chi.set(i, j, ((-z * (s - t)).exp() - (-z * s).exp()) / z);
            }
            k[i] = c.get(i, i);
        }
        CkSolution {
            r,
            c,
            k,
            chi,
            mode: crate::ck::ConstraintMode::Soft,
            zlag: None,
            diagnostics: Default::default(),
        }
    }

    #[test]
    fn closed_form_residuals_are_second_order() {
        let z = 1.0;
        let model = ModelSpec::new(vec![1.0], 0.0, ConfinementSpec::ConstantFprime { z }, 1).unwrap();
        let coarse = residual_integral_system(&closed_form(z, 1.5, 0.04, 26), &model);
        let fine = residual_integral_system(&closed_form(z, 1.5, 0.02, 51), &model);
        assert!(coarse.max() < 0.01, "{coarse:?}");
        let ratio = coarse.max() / fine.max();
        assert!((3.0..=5.0).contains(&ratio), "{coarse:?} {fine:?}");
        assert!(fine.e_at_zero < 1e-12);
        assert!(fine.e_flat < 1e-12);
    }

    #[test]
    fn perturbation_is_detected() {
        let model = ModelSpec::pure(3, 1.0, ConfinementSpec::default(), 1).unwrap();
        let cfg = SolverConfig { h: 0.02, t_max: 1.0, ..SolverConfig::default() };
        let mut sol = solve_ck(&model, &cfg).unwrap();
        let clean = residual_integral_system(&sol, &model);
        let v = sol.c.get(30, 10);
        sol.c.set(30, 10, v + 1e-3);
        let dirty = residual_integral_system(&sol, &model);
        assert!(dirty.c1 >= 1e-4 + clean.c1 * 0.0, "{clean:?} {dirty:?}");
        assert!(dirty.c1 > clean.c1);
    }
}
