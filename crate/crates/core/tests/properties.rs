use proptest::prelude::*;

use pspin_core::ck::{grid_refine_compare, solve_ck, ConstraintMode, SolverConfig};
use pspin_core::compare::{compare_observables, observables_from_solution};
use pspin_core::model::{ConfinementSpec, DisorderTensor, ModelSpec};
use pspin_core::oracles::{bessel_h, h_series_nc, NcKernel};

fn mixed_model() -> impl Strategy<Value = ModelSpec> {
    (
        proptest::collection::vec(-1.0f64..1.0, 3),
        0.1f64..1.2,
        1.0f64..6.0,
    )
        .prop_filter_map("need a nonzero coefficient", |(a, beta, kappa)| {
            ModelSpec::new(a, beta, ConfinementSpec::Polynomial { kappa, r: 2 }, 1).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solver_structure(model in mixed_model(), k0 in 0.7f64..1.3, hard in any::<bool>()) {
        let mode = if hard { ConstraintMode::Hard } else { ConstraintMode::Soft };
        // h small enough for the fixed-point corrector to contract on the stiff K equation
        let cfg = SolverConfig { h: 0.02, t_max: 1.0, k0, mode, ..Default::default() };
        let sol = solve_ck(&model, &cfg).unwrap();
        for i in 0..sol.len() {
            prop_assert_eq!(sol.r_at(i, i), 1.0);
            prop_assert_eq!(sol.k[i], sol.c_at(i, i));
            prop_assert_eq!(sol.chi_at(i, 0), 0.0);
            if i + 1 < sol.len() {
                prop_assert_eq!(sol.r_at(i, i + 1), 0.0);
            }
            for j in 0..sol.len() {
                prop_assert_eq!(sol.c_at(i, j), sol.c_at(j, i));
            }
        }
        if hard {
            prop_assert!(sol.k.iter().all(|&k| k == 1.0));
            prop_assert_eq!(sol.zlag.as_ref().unwrap()[0], 0.5);
        }
    }

    #[test]
    fn comparison_is_antisymmetric(model in mixed_model()) {
        let fine = solve_ck(&model, &SolverConfig { h: 0.02, t_max: 0.8, ..Default::default() }).unwrap();
        let coarse = solve_ck(&model, &SolverConfig { h: 0.04, t_max: 0.8, ..Default::default() }).unwrap();
        let a = observables_from_solution(&fine, 10).unwrap();
        let b = observables_from_solution(&coarse, 5).unwrap();
        let ab = compare_observables(&a, &b, 1.0).unwrap();
        let ba = compare_observables(&b, &a, 1.0).unwrap();
        prop_assert_eq!(ab.sup_c, ba.sup_c);
        prop_assert_eq!(ab.sup_chi, ba.sup_chi);
        prop_assert!(ab.sup_c >= ab.rms_c);
        prop_assert!(ab.sup_chi >= ab.rms_chi);
    }

    #[test]
    fn gradient_is_linear_in_disorder_scale(seed in any::<u64>(), scale in 0.1f64..3.0) {
        // scaling beta scales every b_p, hence G, by the same factor
        let base = ModelSpec::new(vec![0.5, 1.0, 0.8], 1.0, ConfinementSpec::default(), 6).unwrap();
        let scaled = ModelSpec { beta: scale, ..base.clone() };
        let x: Vec<f64> = (0..6).map(|i| (i as f64 * 1.7 + seed as f64 * 1e-3).cos()).collect();
        let g0 = DisorderTensor::sample(&base, seed).unwrap().grad(&x).unwrap();
        let g1 = DisorderTensor::sample(&scaled, seed).unwrap().grad(&x).unwrap();
        for (a, b) in g0.iter().zip(&g1) {
            prop_assert!((a * scale - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn constant_kernel_series_within_bound(tau in 0.0f64..1.0, c in 0.0f64..1.0) {
        // with kernel c the full series is h(sqrt(c) tau)
        let v = h_series_nc(NcKernel::Constant(c), tau, 0.0, 4, None).unwrap();
        let exact = bessel_h(c.sqrt() * tau);
        prop_assert!((v.value - exact).abs() <= v.truncation_bound + 1e-15,
            "{} vs {} bound {}", v.value, exact, v.truncation_bound);
    }
}

#[test]
fn beta_zero_refinement_order() {
    let model = ModelSpec::new(vec![1.0], 0.0, ConfinementSpec::ConstantFprime { z: 1.0 }, 1).unwrap();
    let cfg = SolverConfig { h: 0.04, t_max: 2.0, k0: 1.5, ..Default::default() };
    let rows = grid_refine_compare(&model, &cfg, 4).unwrap();
    let order = rows.last().unwrap().observed_order.unwrap();
    assert!(order >= 1.9, "{rows:?}");
}

#[test]
fn p3_refinement_differences_decrease() {
    let model = ModelSpec::pure(3, 1.0, ConfinementSpec::default(), 1).unwrap();
    let cfg = SolverConfig { h: 0.02, t_max: 2.0, ..Default::default() };
    let rows = grid_refine_compare(&model, &cfg, 4).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| w[1].max_diff() < w[0].max_diff()), "{rows:?}");
}
