mod common;

use common::*;
use proptest::prelude::*;
use specseq_core::operator::{circle_sup_resolvent, riesz_split};
use specseq_core::random::{random_vector, seeded};
use specseq_core::resolvent::{
    apply_resolvent_causal, apply_resolvent_frequency, apply_resolvent_split, causality_probe, ResolventPlan,
};
use specseq_core::sequence::{l2_norm, weighted_norm, Exponent, Weight, WindowedSequence};
use specseq_core::SERIES_TOL;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn every_mode_solves_the_equation(seed in any::<u64>(), d in 1usize..=5, inside in 0usize..=5, rho in 0.5f64..2.0) {
        let inside = inside.min(d);
        let mut rng = seeded(seed);
        let eigs = eigs_around(&mut rng, d, inside, rho, 0.1);
        let (a, _) = with_spectrum(&mut rng, &eigs);
        let f = random_seq(&mut rng, d, -3, 7);
        let fnorm = l2_norm(&f, rho).unwrap();
        for plan in [
            ResolventPlan::split_auto(a.clone(), rho).unwrap(),
            ResolventPlan::frequency(a.clone(), rho).unwrap(),
        ] {
            let u = plan.apply(&f).unwrap();
            let res = plan.residual(&u, &f).unwrap();
            prop_assert!(res <= 10.0 * SERIES_TOL * fnorm.max(1.0), "{:?} residual {res}", plan.mode());
        }
        if inside == d {
            let plan = ResolventPlan::causal(a, rho).unwrap();
            let u = apply_resolvent_causal(&plan, &f).unwrap();
            prop_assert!(plan.residual(&u, &f).unwrap() <= 10.0 * SERIES_TOL * fnorm.max(1.0));
        }
    }

    #[test]
    fn modes_agree_pairwise(seed in any::<u64>(), d in 1usize..=5, inside in 0usize..=5, rho in 0.5f64..2.0) {
        let inside = inside.min(d);
        let mut rng = seeded(seed);
        let eigs = eigs_around(&mut rng, d, inside, rho, 0.1);
        let (a, _) = with_spectrum(&mut rng, &eigs);
        let f = random_seq(&mut rng, d, -2, 5);
        let us = apply_resolvent_split(&ResolventPlan::split_auto(a.clone(), rho).unwrap(), &f).unwrap();
        let uf = apply_resolvent_frequency(&ResolventPlan::frequency(a.clone(), rho).unwrap(), &f, None).unwrap();
        // distances in l_{inf,rho}: the frequency route carries roundoff times rho^k
        let sup = |u: &WindowedSequence| weighted_norm(u, Weight::new(rho, Exponent::Inf).unwrap()).unwrap();
        let scale = sup(&us).max(1.0);
        let dist = sup(&us.sub(&uf).unwrap());
        prop_assert!(dist <= 1e-8 * scale, "split vs frequency {dist}");
        if inside == d {
            let uc = apply_resolvent_causal(&ResolventPlan::causal(a, rho).unwrap(), &f).unwrap();
            prop_assert!(sup(&uc.sub(&us).unwrap()) <= 1e-8 * scale);
        }
    }

    #[test]
    fn causality_verdict_is_spectral_radius_test(seed in any::<u64>(), d in 1usize..=5, inside in 0usize..=5, rho in 0.3f64..2.5) {
        let inside = inside.min(d);
        let mut rng = seeded(seed);
        let eigs = eigs_around(&mut rng, d, inside, rho, 0.1);
        let (a, _) = with_spectrum(&mut rng, &eigs);
        let x = random_vector(&mut rng, d);
        let (causal, u) = causality_probe(&a, rho, &x).unwrap();
        // r(A) < rho exactly when every eigenvalue was placed inside
        prop_assert_eq!(causal, inside == d);
        prop_assert!(u.support(1e-12).is_some());
    }

    #[test]
    fn resolvent_norm_bounded_by_circle_sup(seed in any::<u64>(), d in 1usize..=4, inside in 0usize..=4) {
        let inside = inside.min(d);
        let mut rng = seeded(seed);
        let eigs = eigs_around(&mut rng, d, inside, 1.0, 0.1);
        let (a, _) = with_spectrum(&mut rng, &eigs);
        let m = circle_sup_resolvent(&a, 1.0, 4096).unwrap();
        let plan = ResolventPlan::split(a.clone(), 1.0, riesz_split(&a, 1.0, 256).unwrap()).unwrap();
        for _ in 0..8 {
            let f = random_seq(&mut rng, d, -4, 9);
            let ratio = l2_norm(&plan.apply(&f).unwrap(), 1.0).unwrap() / l2_norm(&f, 1.0).unwrap();
            prop_assert!(ratio <= m * (1.0 + 1e-6), "ratio {ratio} > M {m}");
        }
    }
}
