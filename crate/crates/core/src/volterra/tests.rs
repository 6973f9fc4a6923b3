use std::sync::Arc;

use super::kernel::Kernel;
use super::*;
use crate::duration::{BetaAffine, Deterministic, Exponential, JointDurations};
use crate::infectivity::{Component, Profile};

fn det(v: f64) -> Arc<dyn DurationLaw> {
    Arc::new(Deterministic::new(v).unwrap())
}

fn exp(rate: f64) -> Arc<dyn DurationLaw> {
    Arc::new(Exponential::new(rate).unwrap())
}

fn markov_sir(beta: f64, gamma: f64) -> Arc<InfectivityLaw> {
    Arc::new(InfectivityLaw::constant(beta, det(0.0), exp(gamma)).unwrap())
}

fn beta22(shift: f64, scale: f64) -> Arc<dyn DurationLaw> {
    Arc::new(BetaAffine::new(2.0, 2.0, shift, scale).unwrap())
}

/// Reported/unreported triangular mixture with p_R = 0.8, α = 0.7.
fn scenario_law() -> Arc<InfectivityLaw> {
    let branch = |w: f64, amp: f64, eta: Arc<dyn DurationLaw>| Component {
        weight: w,
        amplitude: amp,
        profile: Profile::triangular(0.2).unwrap(),
        durations: JointDurations::independent(beta22(2.0, 2.0), eta),
    };
    Arc::new(
        InfectivityLaw::mixture(
            "test",
            vec![
                branch(0.8, 1.0, beta22(3.0, 1.0)),
                branch(0.2, 0.7, beta22(8.0, 4.0)),
            ],
        )
        .unwrap(),
    )
}

/// Classical SIR ODE by RK4, sampled every `every` internal steps.
fn sir_ode(beta: f64, gamma: f64, i0: f64, h: f64, steps: usize, every: usize) -> Vec<[f64; 3]> {
    let f = |x: [f64; 3]| {
        let inf = beta * x[0] * x[1];
        [-inf, inf - gamma * x[1], gamma * x[1]]
    };
    let add = |x: [f64; 3], k: [f64; 3], c: f64| [x[0] + c * k[0], x[1] + c * k[1], x[2] + c * k[2]];
    let mut x = [1.0 - i0, i0, 0.0];
    let mut out = vec![x];
    for n in 1..=steps {
        let k1 = f(x);
        let k2 = f(add(x, k1, h / 2.0));
        let k3 = f(add(x, k2, h / 2.0));
        let k4 = f(add(x, k3, h));
        for c in 0..3 {
            x[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        if n % every == 0 {
            out.push(x);
        }
    }
    out
}

fn assert_balanced(tr: &Trajectory, tol: f64) {
    for k in 0..tr.len() {
        let total = tr.s[k] + tr.e[k] + tr.i[k] + tr.r[k];
        assert!((total - 1.0).abs() <= tol, "t = {}: total {total}", tr.t[k]);
    }
}

#[test]
fn markov_sir_matches_the_classical_ode() {
    let spec = LimitModelSpec::new(markov_sir(2.0, 1.0), 0.0, 0.05);
    let cfg = SolverConfig::new(1e-3, 10.0);
    let tr = solve_seir(&spec, &cfg).unwrap();
    let ode = sir_ode(2.0, 1.0, 0.05, 1e-4, 100_000, 10);
    let mut worst = 0.0f64;
    for (k, x) in ode.iter().enumerate() {
        worst = worst
            .max((tr.s[k] - x[0]).abs())
            .max((tr.i[k] - x[1]).abs())
            .max((tr.r[k] - x[2]).abs())
            .max((tr.ifrak[k] - 2.0 * x[1]).abs() / 2.0);
    }
    assert!(worst < 1e-4, "sup error {worst}");
}

#[test]
fn merged_and_seir_coincide_without_latency() {
    let spec = LimitModelSpec::new(markov_sir(1.5, 0.5), 0.0, 0.02);
    let cfg = SolverConfig::new(0.02, 30.0);
    let a = solve_seir(&spec, &cfg).unwrap();
    let b = solve_merged(&spec, &cfg).unwrap();
    for c in Compartment::ALL {
        assert!(a.sup_distance(&b, c, 30.0) < 1e-12, "{c:?}");
    }
}

#[test]
fn seir_balance_holds_with_exposed_and_infectious_initials() {
    let law = scenario_law();
    let infectious0 = Arc::new(
        InfectivityLaw::triangular(1.0, 0.2, JointDurations::independent(det(0.0), beta22(3.0, 1.0)))
            .unwrap(),
    );
    let spec = LimitModelSpec::new(law, 0.01, 0.03).with_initial_infectious(infectious0);
    let tr = solve_seir(&spec, &SolverConfig::new(0.05, 60.0)).unwrap();
    assert_balanced(&tr, 1e-8);
    for k in 1..tr.len() {
        assert!(tr.s[k] <= tr.s[k - 1] + 1e-15);
        assert!(tr.r[k] >= tr.r[k - 1] - 1e-12);
        assert!(tr.ifrak[k] >= 0.0);
        for v in [tr.s[k], tr.e[k], tr.i[k], tr.r[k]] {
            assert!((-1e-12..=1.0 + 1e-12).contains(&v));
        }
    }
    // the exposed compartment fills before the infectious one peaks
    assert!(tr.peak(Compartment::Exposed).0 < tr.peak(Compartment::Infected).0);
}

#[test]
fn merged_balance_and_final_size() {
    let spec = LimitModelSpec::new(scenario_law(), 0.0, 0.05);
    let tr = solve_merged(&spec, &SolverConfig::new(0.02, 100.0)).unwrap();
    assert_balanced(&tr, 1e-8);
    assert!(tr.e.iter().all(|&e| e == 0.0));
    // Ā equals the drop in S̄ exactly
    let last = tr.len() - 1;
    assert!((tr.a[last] - (0.95 - tr.s[last])).abs() < 1e-12);
    assert!(*tr.i.last().unwrap() < 1e-4);
}

#[test]
fn sis_reaches_the_markov_endemic_level() {
    let spec = LimitModelSpec::new(markov_sir(2.0, 1.0), 0.0, 0.01);
    let tr = solve_sis(&spec, &SolverConfig::new(0.01, 100.0)).unwrap();
    let end = *tr.i.last().unwrap();
    assert!((end - 0.5).abs() < 1e-3, "I(100) = {end}");
    assert!(tr.r.iter().all(|&r| r == 0.0));
}

#[test]
fn sis_without_transmission_only_recovers() {
    let spec = LimitModelSpec::new(markov_sir(1.0, 1.0), 0.0, 0.2);
    let cfg = SolverConfig::new(0.01, 5.0);
    let mut tables = Tables::sis(&spec, cfg.dt, cfg.steps());
    tables.lam = Kernel::new(vec![0.0; cfg.steps() + 1]);
    tables.forcing = vec![0.0; cfg.steps() + 1];
    let tr = sirs_on(&tables, 0.2, &cfg, false).unwrap();
    for (t, i) in tr.t.iter().zip(&tr.i) {
        assert!((i - 0.2 * (-t).exp()).abs() < 1e-9, "t = {t}");
    }
}

#[test]
fn sirs_with_zero_immunity_is_sis() {
    let law = markov_sir(2.0, 1.0);
    let cfg = SolverConfig::new(0.02, 20.0);
    let sis = solve_sis(&LimitModelSpec::new(law.clone(), 0.0, 0.05), &cfg).unwrap();
    let sirs =
        solve_sirs(&LimitModelSpec::new(law, 0.0, 0.05).with_immune_period(det(0.0)), &cfg).unwrap();
    for c in Compartment::ALL {
        assert!(sis.sup_distance(&sirs, c, 20.0) < 1e-12, "{c:?}");
    }
}

#[test]
fn sirs_immunity_lowers_the_infected_level() {
    let law = markov_sir(2.0, 1.0);
    let cfg = SolverConfig::new(0.02, 80.0);
    let sis = solve_sis(&LimitModelSpec::new(law.clone(), 0.0, 0.05), &cfg).unwrap();
    let sirs =
        solve_sirs(&LimitModelSpec::new(law, 0.0, 0.05).with_immune_period(exp(0.5)), &cfg).unwrap();
    for k in 0..sirs.len() {
        assert!(sirs.i[k] + sirs.r[k] <= 1.0 + 1e-12);
    }
    // Markov SIRS equilibrium: I* = (1 − γ/β)/(1 + γ/δ) = 0.5 / 3
    let end = *sirs.i.last().unwrap();
    assert!((end - 0.5 / 3.0).abs() < 2e-3, "I(80) = {end}");
    assert!(end < *sis.i.last().unwrap());
}

#[test]
fn convergence_is_second_order_on_a_smooth_kernel() {
    let spec = LimitModelSpec::new(markov_sir(2.0, 1.0), 0.0, 0.05);
    let report = convergence_order(&Seir, &spec, &SolverConfig::new(0.04, 10.0), 3).unwrap();
    let p = report.observed_order();
    assert!((1.9..=2.1).contains(&p), "{report:?}");
}

#[test]
fn convergence_is_at_least_first_order_with_a_jump() {
    let law = Arc::new(InfectivityLaw::constant(2.0, det(0.0), det(1.0)).unwrap());
    let spec = LimitModelSpec::new(law, 0.0, 0.05);
    let report = convergence_order(&Merged, &spec, &SolverConfig::new(0.04, 10.0), 3).unwrap();
    assert!(report.observed_order() >= 1.0, "{report:?}");
}

#[test]
fn convergence_smoke_and_refinement_floor() {
    let spec = LimitModelSpec::new(markov_sir(2.0, 1.0), 0.0, 0.05);
    let cfg = SolverConfig::new(0.1, 5.0);
    let report = convergence_order(&Merged, &spec, &cfg, 2).unwrap();
    assert_eq!(report.orders.len(), 1);
    assert!(report.observed_order().is_finite());
    assert!(convergence_order(&Merged, &spec, &cfg, 1).is_err());
}

#[test]
fn small_perturbations_stay_small() {
    let law = scenario_law();
    let cfg = SolverConfig::new(0.05, 80.0);
    let a = solve_merged(&LimitModelSpec::new(law.clone(), 0.0, 0.05), &cfg).unwrap();
    let b = solve_merged(&LimitModelSpec::new(law, 0.0, 0.05 + 1e-6), &cfg).unwrap();
    for c in [Compartment::Susceptible, Compartment::Infected, Compartment::Removed] {
        let d = a.sup_distance(&b, c, 80.0);
        assert!(d < 1e-4, "{c:?}: {d}");
    }
}

#[test]
fn registry_and_validation() {
    assert_eq!(model("sirs").unwrap().name(), "sirs");
    assert_eq!(models().len(), 4);
    assert!(matches!(model("sir"), Err(Error::UnknownKind { .. })));
    let law = markov_sir(2.0, 1.0);
    let cfg = SolverConfig::new(0.1, 1.0);
    assert!(solve_seir(&LimitModelSpec::new(law.clone(), 0.0, 1.2), &cfg).is_err());
    assert!(solve_seir(&LimitModelSpec::new(law.clone(), 0.0, 0.0), &cfg).is_err());
    assert!(solve_merged(&LimitModelSpec::new(law.clone(), 0.1, 0.1), &cfg).is_err());
    assert!(solve_sirs(&LimitModelSpec::new(law.clone(), 0.0, 0.1), &cfg).is_err());
    assert!(solve_seir(&LimitModelSpec::new(law, 0.0, 0.1), &SolverConfig::new(0.0, 1.0)).is_err());
}

#[test]
fn too_few_iterations_is_reported() {
    let spec = LimitModelSpec::new(markov_sir(2.0, 1.0), 0.0, 0.05);
    let cfg = SolverConfig {
        fp_max_iter: 1,
        ..SolverConfig::new(0.5, 2.0)
    };
    assert!(matches!(solve_seir(&spec, &cfg), Err(Error::FixedPoint { .. })));
}

