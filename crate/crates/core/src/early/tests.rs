use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::duration::{Deterministic, DurationLaw, Exponential};

fn det(v: f64) -> Arc<dyn DurationLaw> {
    Arc::new(Deterministic::new(v).unwrap())
}

fn exp(rate: f64) -> Arc<dyn DurationLaw> {
    Arc::new(Exponential::new(rate).unwrap())
}

fn markov(beta: f64, gamma: f64) -> InfectivityLaw {
    InfectivityLaw::constant(beta, det(0.0), exp(gamma)).unwrap()
}

/// Plain bisection on a decreasing function, independent of the library.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn r0_of_simple_laws() {
    let box_law = InfectivityLaw::constant(2.0, det(0.0), det(1.0)).unwrap();
    assert!((compute_r0(&box_law) - 2.0).abs() < 1e-14);
    assert!((compute_r0(&markov(2.0, 1.0)) - 2.0).abs() < 1e-14);
    let tab: Vec<f64> = (0..=1000).map(|k| 2.0 * (-(k as f64) * 0.02).exp()).collect();
    let simpson_r0 = compute_r0_tabulated(&tab, 0.02).unwrap();
    assert!((simpson_r0 - 2.0 * (1.0 - (-20f64).exp())).abs() < 1e-8);
    assert!(compute_r0_tabulated(&[1.0], 0.1).is_err());
}

#[test]
fn rho_of_the_box_law_matches_independent_bisection() {
    let law = InfectivityLaw::constant(2.0, det(0.0), det(1.0)).unwrap();
    let rho = solve_rho(&law).unwrap();
    let oracle = bisect(|r| 2.0 * (-(-r).exp_m1()) / r - 1.0, 0.5, 5.0);
    assert!((rho - oracle).abs() < 1e-12, "{rho} vs {oracle}");
    assert!((rho - 1.59362).abs() < 1e-5);
    assert!((growth_function(&law, rho) - 1.0).abs() <= 1e-12);
}

#[test]
fn rho_of_markov_laws() {
    let rho = solve_rho(&markov(2.0, 1.0)).unwrap();
    assert!((rho - 1.0).abs() < 1e-12);
    let critical = solve_rho(&markov(1.0, 1.0)).unwrap();
    assert!(critical.abs() <= 1e-10, "{critical}");
    let sub = solve_rho(&markov(0.8, 1.0)).unwrap();
    assert!((sub + 0.2).abs() < 1e-12);
}

#[test]
fn rho_sign_follows_r0() {
    for beta in [0.3, 0.9, 1.1, 3.0] {
        let law = InfectivityLaw::constant(beta, exp(2.0), det(1.5)).unwrap();
        let rho = solve_rho(&law).unwrap();
        assert_eq!(rho > 0.0, law.r0() > 1.0, "beta = {beta}");
    }
}

#[test]
fn r0_from_growth_closed_forms() {
    // deterministic durations
    for (zeta, eta) in [(0.0, 1.0), (2.0, 5.0)] {
        let law = InfectivityLaw::constant(1.0, det(zeta), det(eta)).unwrap();
        for rho in [-0.1, 0.1, 0.277] {
            let got = r0_from_growth(&law, rho, None).unwrap().r0;
            let want = rho * eta / ((-rho * zeta).exp() * (1.0 - (-rho * eta).exp()));
            assert!(((got - want) / want).abs() < 1e-10, "{zeta} {eta} {rho}");
        }
    }
    // exponential exposed and infectious periods
    let law = InfectivityLaw::constant(0.3, exp(1.0), exp(1.0)).unwrap();
    let got = r0_from_growth(&law, 1.0, None).unwrap().r0;
    assert!((got - 4.0).abs() < 1e-9, "{got}");
}

#[test]
fn r0_from_growth_at_zero_rate_is_one() {
    let law = InfectivityLaw::constant(0.7, exp(0.5), det(3.0)).unwrap();
    let ratio = r0_from_growth(&law, 0.0, Some(0.5)).unwrap();
    assert!((ratio.r0 - 1.0).abs() < 1e-12);
    assert!((ratio.re.unwrap() - 0.5 * ratio.r0).abs() < 1e-15);
    assert!(r0_from_growth(&law, 0.0, Some(1.5)).is_err());
}

#[test]
fn tabulated_ratio_is_scale_invariant() {
    let g: Vec<f64> = (0..=800).map(|k| {
        let t = k as f64 * 0.01;
        if t < 8.0 { t * (8.0 - t) } else { 0.0 }
    }).collect();
    let base = r0_from_growth_tabulated(&g, 0.01, 0.3, None).unwrap().r0;
    let quad: Vec<f64> = g.iter().map(|x| 4.0 * x).collect();
    assert_eq!(r0_from_growth_tabulated(&quad, 0.01, 0.3, None).unwrap().r0, base);
    let tri: Vec<f64> = g.iter().map(|x| 3.0 * x).collect();
    let scaled = r0_from_growth_tabulated(&tri, 0.01, 0.3, None).unwrap().r0;
    assert!(((scaled - base) / base).abs() < 1e-14);
    assert!(r0_from_growth_tabulated(&vec![0.0; 10], 0.1, 0.3, None).is_err());
}

#[test]
fn stable_age_profiles_of_markov_sir() {
    let law = markov(2.0, 1.0);
    let p = stable_age_profiles(&law, 1.0, 0.1, 5.0).unwrap();
    assert!((p.i_frac - 0.5).abs() < 1e-12);
    assert_eq!(p.i_frac + p.r_frac, 1.0);
    for (k, f) in p.f_rho_c.iter().enumerate() {
        let t = k as f64 * 0.1;
        assert!((f - (-t).exp()).abs() < 1e-10, "t = {t}");
        assert!((p.lambda_rho[k] - 2.0 * (-t).exp()).abs() < 1e-10);
    }
}

#[test]
fn small_rate_infected_fraction_is_rate_times_mean_duration() {
    let law = InfectivityLaw::constant(1.0, exp(2.0), det(3.0)).unwrap();
    let rho = 1e-4;
    let p = stable_age_profiles(&law, rho, 0.5, 2.0).unwrap();
    let want = rho * law.mean_total_duration();
    assert!(((p.i_frac - want) / want).abs() < 1e-3);
    assert_eq!(p.f_rho_c[0], 1.0);
    assert!(p.f_rho_c.windows(2).all(|w| w[1] <= w[0] + 1e-15));
}

#[test]
fn exponential_ansatz_solves_the_linear_system() {
    let law = markov(2.0, 1.0);
    let p = stable_age_profiles(&law, 1.0, 1e-3, 10.0).unwrap();
    let res = verify_linear_solution(&law, &p).unwrap();
    assert!(res.sup() <= 1e-6, "{res:?}");

    let sub = markov(0.8, 1.0);
    let rho = solve_rho(&sub).unwrap();
    let p = stable_age_profiles(&sub, rho, 1e-3, 10.0).unwrap();
    assert!(p.i_frac < 0.0 && p.r_frac > 1.0);
    let res = verify_linear_solution(&sub, &p).unwrap();
    assert!(res.sup() <= 1e-6, "{res:?}");
}

#[test]
fn linear_residual_shrinks_under_refinement() {
    let law = InfectivityLaw::constant(2.0, det(0.5), exp(1.0)).unwrap();
    let rho = solve_rho(&law).unwrap();
    let coarse = verify_linear_solution(&law, &stable_age_profiles(&law, rho, 0.02, 4.0).unwrap())
        .unwrap()
        .sup();
    let fine = verify_linear_solution(&law, &stable_age_profiles(&law, rho, 0.01, 4.0).unwrap())
        .unwrap()
        .sup();
    assert!(coarse / fine >= 2.0, "{coarse} -> {fine}");
}

#[test]
fn cumulative_of_the_ansatz() {
    let (rho, n, alpha) = (0.3f64, 1e4f64, 0.5);
    let t = alpha / rho * n.ln();
    assert!((linear_cumulative(rho, t) - (n.powf(alpha) - 1.0)).abs() < 1e-9);
}

#[test]
fn extinction_of_markov_sir() {
    let law = markov(2.0, 1.0);
    assert!((extinction_probability(&law, &law, 1).unwrap() - 0.5).abs() < 1e-12);
    assert!((extinction_probability(&law, &law, 5).unwrap() - 0.03125).abs() < 1e-12);
    let sub = markov(0.9, 1.0);
    assert_eq!(extinction_probability(&sub, &sub, 3).unwrap(), 1.0);
    assert!(extinction_probability(&law, &law, 0).is_err());
}

#[test]
fn monte_carlo_extinction_agrees() {
    let law = markov(2.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let q = extinction_probability_mc(&law, &law, 1, 100_000, &mut rng).unwrap();
    assert!((q - 0.5).abs() < 0.01, "{q}");
    assert!(extinction_probability_mc(&law, &law, 1, 100, &mut rng).is_err());
}

#[test]
fn growth_rate_fits() {
    let mut tr = Trajectory::default();
    for k in 0..=100 {
        let t = k as f64 * 0.1;
        // I(0) + A(t) = 0.01 e^{0.7 t}
        tr.push(t, 0.99, 0.0, 0.0, if k == 0 { 0.01 } else { 0.0 }, 0.0, 0.01 * (0.7 * t).exp_m1());
    }
    let rate = estimate_growth_rate(&tr, (1.0, 9.0)).unwrap();
    assert!((rate - 0.7).abs() < 1e-10, "{rate}");
    assert!(estimate_growth_rate(&tr, (5.0, 20.0)).is_err());
    assert!(estimate_growth_rate(&tr, (5.0, 5.0)).is_err());
    let by_level = estimate_growth_rate_between(&tr, (0.02, 0.5)).unwrap();
    assert!((by_level - 0.7).abs() < 1e-10, "{by_level}");
    assert!(estimate_growth_rate_between(&tr, (20.0, 30.0)).is_err());
    assert!(estimate_growth_rate_between(&tr, (0.5, 0.02)).is_err());
    let flat = log_linear_slope(&[0.0, 1.0, 2.0], &[3.0, 3.0, 3.0]).unwrap();
    assert_eq!(flat, 0.0);
}

#[test]
fn summary_fields_are_consistent() {
    let law = markov(2.0, 1.0);
    let s = growth_summary(&law, &law, 1, 0.9).unwrap();
    assert!((s.rho - 1.0).abs() < 1e-12);
    assert!((s.r0 - 2.0).abs() < 1e-12);
    assert!((s.re - 1.8).abs() < 1e-12);
    assert!((s.mu - 2.0).abs() < 1e-9);
    assert!((s.i_frac - 0.5).abs() < 1e-12);
    assert_eq!(s.i_frac + s.r_frac, 1.0);
    assert!((s.q - 0.5).abs() < 1e-12);
    let kv = s.to_key_value();
    assert!(kv.starts_with("rho = "));
    assert_eq!(kv.lines().count(), 7);
    assert_eq!(GrowthSummary::csv_header(), "rho,R0,Re,mu,i_frac,r_frac,q");
    assert_eq!(s.to_csv_row().split(',').count(), 7);
}
