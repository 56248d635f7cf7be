mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use specseq_core::operator::{op_norm, spectral_radius, BoundedOperator};
use specseq_core::random::{random_matrix, random_sequence, random_vector, seeded, SeededRng};
use specseq_core::sequence::Weight;
use specseq_core::solver::{
    choose_impulse_rho, max_relative_deviation, solve_contraction, solve_ivp, stability_classify, IvpMethod,
    StabilityVerdict,
};
use specseq_core::stencil::{lipschitz_probe_l2, Kernel, ScalarFn, StencilMap};
use specseq_core::{Complex64, SUPP_TOL};

/// A causal registry kernel with analytic Lipschitz bound `scale` at `rho = 1`.
fn causal_kernel(rng: &mut SeededRng, d: usize, scale: f64) -> StencilMap {
    let kernel = match rng.gen_range(0..3) {
        0 => {
            let c = random_matrix(rng, d);
            let n = op_norm(&c);
            Kernel::Saturation {
                eps: scale / n,
                coupling: c,
            }
        }
        1 => {
            let b = random_matrix(rng, d);
            let n = op_norm(&b);
            Kernel::Linear {
                b: b * Complex64::new(scale / n, 0.0),
                lag: rng.gen_range(0..3),
            }
        }
        _ => {
            let radius: f64 = rng.gen_range(0.5..2.0);
            let raw: [f64; 4] = [0.0, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let lip: f64 = raw.iter().enumerate().skip(1).map(|(j, c)| j as f64 * c.abs() * radius.powi(j as i32 - 1)).sum();
            Kernel::PolynomialClipped {
                coeffs: raw.iter().map(|c| c * scale / lip).collect(),
                clip_radius: radius,
            }
        }
    };
    StencilMap::new(d, kernel).unwrap()
}

fn any_kernel(rng: &mut SeededRng, d: usize, scale: f64) -> StencilMap {
    if rng.gen_bool(0.25) {
        let f = if rng.gen_bool(0.5) {
            ScalarFn::Linear { lambda: rng.gen_range(-1.0..1.0) }
        } else {
            ScalarFn::Tanh { coef: rng.gen_range(-1.0..1.0) }
        };
        StencilMap::new(d, Kernel::ImplicitEuler { h: scale, f }).unwrap()
    } else {
        causal_kernel(rng, d, scale)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ivp_methods_agree(seed in any::<u64>(), d in 1usize..=4, inside in 0usize..=4, scale in 0.001f64..0.05) {
        let mut rng = seeded(seed);
        let eigs = eigs_around(&mut rng, d, inside.min(d), 1.0, 0.1);
        let (a, _) = with_spectrum(&mut rng, &eigs);
        let f = causal_kernel(&mut rng, d, scale);
        prop_assume!(choose_impulse_rho(&a, &f).is_ok());
        let x = random_vector(&mut rng, d);
        let h = 64;
        let ur = solve_ivp(&a, &f, &x, h, IvpMethod::Recursion).unwrap();
        let uv = solve_ivp(&a, &f, &x, h, IvpMethod::VariationOfConstants).unwrap();
        let ui = solve_ivp(&a, &f, &x, h, IvpMethod::Impulse).unwrap();
        let h = h as i64;
        prop_assert!(max_relative_deviation(&ur, &uv, 0, h) <= 1e-8);
        prop_assert!(max_relative_deviation(&ur, &ui, 0, h) <= 1e-8);
        prop_assert!(max_relative_deviation(&uv, &ui, 0, h) <= 1e-8);
        prop_assert!(ui.support_subset_geq(0, SUPP_TOL));
    }

    #[test]
    fn contraction_ratio_below_theory(seed in any::<u64>(), d in 1usize..=3, rho in 0.5f64..2.0, frac in 0.05f64..0.9) {
        let mut rng = seeded(seed);
        let mut f = any_kernel(&mut rng, d, 0.1);
        // rescale so that lip_bound(rho) = frac * rho
        let lip = f.lip_bound(rho);
        f = match f.kernel().clone() {
            Kernel::ImplicitEuler { .. } => {
                // lip = 1 + h L rho: contractive only for small steps and rho > 1
                prop_assume!(lip < rho);
                f
            }
            Kernel::Saturation { eps, coupling } => StencilMap::new(d, Kernel::Saturation { eps: eps * frac * rho / lip, coupling }).unwrap(),
            Kernel::Linear { b, lag } => StencilMap::new(d, Kernel::Linear { b: b * Complex64::new(frac * rho / lip, 0.0), lag }).unwrap(),
            Kernel::PolynomialClipped { coeffs, clip_radius } => StencilMap::new(d, Kernel::PolynomialClipped {
                coeffs: coeffs.iter().map(|c| c * frac * rho / lip).collect(), clip_radius,
            }).unwrap(),
            Kernel::Zero => f,
        };
        let g = random_sequence(&mut rng, d, -2, 4, 1.0);
        let f = f.with_forcing(g).unwrap();
        let rep = solve_contraction(&f, Weight::l2(rho).unwrap(), -5, 60, 1e-10, 10_000).unwrap();
        prop_assert!(rep.converged && rep.final_residual <= 1e-10);
        let bound = f.lip_bound(rho) / rho + 0.05;
        prop_assert!(rep.ratios.iter().all(|&q| q <= bound), "ratios {:?} bound {bound}", rep.ratios);
    }

    #[test]
    fn lipschitz_probe_below_declared_bound(seed in any::<u64>(), d in 1usize..=4, rho in 0.5f64..2.0, scale in 0.01f64..2.0) {
        let mut rng = seeded(seed);
        let f = any_kernel(&mut rng, d, scale);
        let probe = lipschitz_probe_l2(&f, rho, 40, seed).unwrap();
        prop_assert!(probe <= 1.05 * f.lip_bound(rho), "probe {probe} vs {}", f.lip_bound(rho));
    }

    #[test]
    fn causal_kernels_preserve_support(seed in any::<u64>(), d in 1usize..=3, a in -10i64..10) {
        let mut rng = seeded(seed);
        let f = causal_kernel(&mut rng, d, 1.0);
        let u = random_sequence(&mut rng, d, -15, 15, 2.0);
        let v = u.add(&random_sequence(&mut rng, d, a, a + 8, 1.0)).unwrap();
        let diff = f.apply(&u).unwrap().sub(&f.apply(&v).unwrap()).unwrap();
        prop_assert!(diff.support_subset_geq(a, 0.0));
    }

    #[test]
    fn zero_map_gives_zero(d in 1usize..=4, lo in -10i64..0, hi in 0i64..10) {
        let rep = solve_contraction(&StencilMap::zero(d), Weight::l2(1.0).unwrap(), lo, hi, 1e-10, 10).unwrap();
        prop_assert!(rep.solution.is_zero());
        prop_assert_eq!(rep.iterations, 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn stability_verdicts_consistent(seed in any::<u64>(), d in 1usize..=5) {
        let mut rng = seeded(seed);
        // moduli bounded away from 1
        let eigs: Vec<_> = (0..d)
            .map(|_| {
                let m = if rng.gen_bool(0.5) { rng.gen_range(0.0..0.9) } else { rng.gen_range(1.1..2.0) };
                with_modulus(&mut rng, m)
            })
            .collect();
        let (a, _) = with_spectrum(&mut rng, &eigs);
        let r = spectral_radius(&a).unwrap();
        let rep = stability_classify(&a, 400, 4, seed).unwrap();
        let want = if r < 1.0 { StabilityVerdict::ExponentiallyStable } else { StabilityVerdict::NotStable };
        prop_assert_eq!(rep.verdict, want);
        prop_assert!(rep.consistent, "{:?}", rep.probes);
    }
}

#[test]
fn linear_zero_kernel_solution_is_matrix_powers() {
    let mut rng = seeded(3);
    for d in 1..=4 {
        let a = BoundedOperator::new(random_matrix(&mut rng, d) * Complex64::new(0.4, 0.0)).unwrap();
        let x = random_vector(&mut rng, d);
        let u = solve_ivp(&a, &StencilMap::zero(d), &x, 40, IvpMethod::Impulse).unwrap();
        let mut p = x.clone();
        for n in 0..=40 {
            assert!((&u.get(n) - &p).norm() <= 1e-10 * p.norm().max(1.0));
            p = a.entries() * p;
        }
        assert!(u.support_subset_geq(0, 0.0));
    }
}

#[test]
fn impulse_window_is_causal() {
    let a = BoundedOperator::real_diagonal(&[0.5, 2.0]).unwrap();
    let f = StencilMap::saturation(2, 0.01).unwrap();
    let x = rv(&[0.3, -0.2]);
    let u = solve_ivp(&a, &f, &x, 30, IvpMethod::Impulse).unwrap();
    assert!(u.support_subset_geq(0, SUPP_TOL));
    assert_eq!(u.get(0), x);
}
