use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use epivolt_core::duration::{BetaAffine, Deterministic, Exponential};
use epivolt_core::infectivity::Profile;
use epivolt_core::sim::{simulate, SimConfig, Split};
use epivolt_core::volterra::{self, LimitModelSpec, SolverConfig};
use epivolt_core::{InfectivityFunction, InfectivityLaw};

fn law_for(choice: u8, beta: f64) -> InfectivityLaw {
    match choice % 3 {
        0 => InfectivityLaw::constant(
            beta,
            Arc::new(Deterministic::new(0.0).unwrap()),
            Arc::new(Exponential::new(1.0).unwrap()),
        )
        .unwrap(),
        1 => InfectivityLaw::constant(
            beta,
            Arc::new(Exponential::new(2.0).unwrap()),
            Arc::new(Deterministic::new(1.5).unwrap()),
        )
        .unwrap(),
        _ => InfectivityLaw::triangular(
            1.0,
            0.2,
            epivolt_core::duration::JointDurations::independent(
                Arc::new(BetaAffine::new(2.0, 2.0, 1.0, 2.0).unwrap()),
                Arc::new(BetaAffine::new(2.0, 2.0, 2.0, 3.0).unwrap()),
            ),
        )
        .unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn infectivity_functions_are_nonnegative_and_compactly_supported(
        amplitude in 0.0f64..5.0,
        zeta in 0.0f64..5.0,
        eta in 0.1f64..10.0,
        peak in 0.0f64..1.0,
        t in -2.0f64..20.0,
    ) {
        let f = InfectivityFunction::from_profile(&Profile::triangular(peak).unwrap(), amplitude, zeta, eta);
        let v = f.eval(t);
        prop_assert!(v >= 0.0 && v <= f.sup() + 1e-12);
        if t < zeta || t >= zeta + eta {
            prop_assert_eq!(v, 0.0);
        }
        prop_assert!((f.integral() - 0.5 * amplitude * eta).abs() <= 1e-9 * (1.0 + amplitude * eta));
    }

    #[test]
    fn shifting_moves_the_age_origin(
        zeta in 0.0f64..3.0,
        eta in 0.1f64..6.0,
        age in 0.0f64..8.0,
        t in 0.0f64..10.0,
    ) {
        let f = InfectivityFunction::from_profile(&Profile::triangular(0.2).unwrap(), 1.0, zeta, eta);
        let g = f.shifted(age);
        prop_assert!((g.eval(t) - f.eval(t + age)).abs() <= 1e-9);
    }

    #[test]
    fn stochastic_counts_balance_and_move_one_way(
        n in 20u64..400,
        frac in 0.01f64..0.5,
        choice in 0u8..3,
        beta in 0.5f64..4.0,
        seed in any::<u64>(),
        seir in any::<bool>(),
    ) {
        let law = law_for(choice, beta);
        let i0 = ((frac * n as f64) as u64).clamp(1, n - 1);
        let mut cfg = SimConfig::new(n, i0, 15.0);
        cfg.grid_step = 0.25;
        cfg.split = if seir { Split::Seir } else { Split::Merged };
        let (tr, st) = simulate(&law, &law, &cfg, seed).unwrap();
        let nf = n as f64;
        for k in 0..tr.len() {
            let total = tr.s[k] + tr.e[k] + tr.i[k] + tr.r[k];
            prop_assert!((total - 1.0).abs() < 1e-9, "sum {} at t = {}", total, tr.t[k]);
            // S + A stays at its initial value: every new infection leaves S
            prop_assert!((tr.s[k] + tr.a[k] - tr.s[0]).abs() < 1e-9);
            prop_assert!(tr.ifrak[k] >= 0.0);
            if k > 0 {
                prop_assert!(tr.s[k] <= tr.s[k - 1]);
                prop_assert!(tr.r[k] >= tr.r[k - 1]);
            }
        }
        prop_assert!(st.cumulative() as f64 <= nf);
        let (_, again) = simulate(&law, &law, &cfg, seed).unwrap();
        prop_assert_eq!(st.event_log_csv(), again.event_log_csv());
    }

    #[test]
    fn seeded_samples_are_reproducible(seed in any::<u64>(), choice in 0u8..3) {
        let law = law_for(choice, 1.0);
        let mut a = ChaCha8Rng::seed_from_u64(seed);
        let mut b = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..8 {
            prop_assert_eq!(law.sample(&mut a), law.sample(&mut b));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn limit_equations_conserve_mass(
        choice in 0u8..3,
        beta in 0.5f64..4.0,
        i0 in 0.001f64..0.5,
        e_share in 0.0f64..0.9,
        seir in any::<bool>(),
    ) {
        let law = Arc::new(law_for(choice, beta));
        let (variant, e0) = if seir { ("seir", e_share * (1.0 - i0) * 0.5) } else { ("merged", 0.0) };
        let spec = LimitModelSpec::new(law, e0, i0);
        let tr = volterra::model(variant)
            .unwrap()
            .solve(&spec, &SolverConfig::new(0.05, 30.0))
            .unwrap();
        for k in 0..tr.len() {
            let total = tr.s[k] + tr.e[k] + tr.i[k] + tr.r[k];
            prop_assert!((total - 1.0).abs() < 1e-6, "sum {} at t = {}", total, tr.t[k]);
            prop_assert!(tr.s[k] >= -1e-12 && tr.s[k] <= 1.0);
            prop_assert!((tr.s[k] + tr.a[k] - tr.s[0]).abs() < 1e-6);
            if k > 0 {
                prop_assert!(tr.s[k] <= tr.s[k - 1] + 1e-12);
            }
        }
    }
}
