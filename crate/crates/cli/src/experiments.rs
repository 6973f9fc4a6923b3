//! One pipeline per experiment kind.

use std::fmt::Write as _;

use anyhow::{Context, Result};
use rayon::prelude::*;

use epivolt_core::covid::{r0_heatmap, unit_grid};
use epivolt_core::early::{
    estimate_growth_rate_between, extinction_probability, growth_summary, solve_rho,
    GrowthSummary,
};
use epivolt_core::sim::{
    hitting_times, replicate_rng, run_ensemble, simulate_with_rng, EnsembleSummary,
};
use epivolt_core::volterra;
use epivolt_core::{Compartment, Trajectory};

use crate::config::{Experiment, Validated};
use crate::manifest::Outputs;

pub fn run(cfg: &Validated) -> Result<Outputs> {
    match cfg.raw.experiment {
        Experiment::FllnCompare => flln_compare(cfg),
        Experiment::EarlyGrowth => early_growth(cfg),
        Experiment::Heatmap => heatmap(cfg),
        Experiment::GrowthSummary => summary(cfg),
        Experiment::SolveOnly => solve_only(cfg),
    }
}

fn limit_solution(cfg: &Validated) -> Result<Trajectory> {
    let model = volterra::model(&cfg.raw.model.variant)?;
    model
        .solve(&cfg.limit_spec()?, &cfg.solver_config())
        .with_context(|| format!("{} solver failed", model.name()))
}

fn stationary_rho(cfg: &Validated) -> Result<f64> {
    Ok(solve_rho(cfg.law())?)
}

fn flln_compare(cfg: &Validated) -> Result<Outputs> {
    let sim = cfg.sim_config(|| stationary_rho(cfg))?;
    let replicates = cfg.raw.ensemble.replicates;
    let summary = run_ensemble(cfg.law(), cfg.law0(), &sim, replicates, cfg.raw.seed)?;
    let limit = limit_solution(cfg)?;
    let mean = summary.mean_trajectory();

    let mut report = String::new();
    writeln!(report, "population = {}", sim.population)?;
    writeln!(report, "initial_infected = {}", sim.initial_infected)?;
    writeln!(report, "replicates = {replicates}")?;
    writeln!(report, "variant = {}", cfg.raw.model.variant)?;
    for c in [
        Compartment::Susceptible,
        Compartment::Exposed,
        Compartment::Infected,
        Compartment::Removed,
    ] {
        let d = mean.sup_distance(&limit, c, sim.horizon);
        writeln!(report, "sup_distance_{} = {d}", c.column())?;
    }
    let (k, _) = limit.peak(Compartment::Infected);
    let t_peak = limit.t[k];
    if let Some(j) = summary.t.iter().position(|&t| t >= t_peak - 1e-9) {
        let col = summary.column(Compartment::Infected);
        writeln!(report, "limit_peak_time = {t_peak}")?;
        writeln!(report, "envelope50_width_at_peak = {}", col.width50(j))?;
        writeln!(report, "envelope95_width_at_peak = {}", col.width95(j))?;
    }

    let mut out = Outputs::default();
    out.add("ensemble.csv", summary.to_csv());
    out.add("limit.csv", limit.to_csv());
    out.add("report.txt", report);
    Ok(out)
}

struct Replicate {
    trajectory: Trajectory,
    extinct: bool,
    rate: Option<f64>,
    t_eps: f64,
    t_alpha: f64,
}

fn early_growth(cfg: &Validated) -> Result<Outputs> {
    let e = &cfg.raw.early;
    let sim = cfg.sim_config(|| stationary_rho(cfg))?;
    let rho = solve_rho(cfg.law())?;
    let n = sim.population as f64;
    let window = (n.powf(e.fit_window[0]) / n, n.powf(e.fit_window[1]) / n);
    let seed = cfg.raw.seed;
    let (law, law0) = (cfg.law(), cfg.law0());
    // each replicate is reduced on its worker so the infection logs do
    // not pile up in memory
    let runs: Vec<Replicate> = (0..cfg.raw.ensemble.replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<Replicate> {
            let (trajectory, st) = simulate_with_rng(law, law0, &sim, &mut replicate_rng(seed, r))?;
            let extinct = st.extinct_early(e.extinction_exponent);
            let (t_eps, t_alpha) = hitting_times(&st, e.hitting_fraction, e.hitting_exponent)?;
            let rate = if extinct {
                None
            } else {
                estimate_growth_rate_between(&trajectory, window).ok()
            };
            Ok(Replicate {
                trajectory,
                extinct,
                rate,
                t_eps,
                t_alpha,
            })
        })
        .collect::<Result<_>>()?;

    let mut curves = String::from("t");
    for r in 0..runs.len() {
        write!(curves, ",rep_{r}")?;
    }
    curves.push('\n');
    let grid = &runs[0].trajectory.t;
    for (k, t) in grid.iter().enumerate() {
        write!(curves, "{t}")?;
        for run in &runs {
            let tr = &run.trajectory;
            let count = ((tr.i[0] + tr.e[0] + tr.a[k]) * n).round();
            write!(curves, ",{count}")?;
        }
        curves.push('\n');
    }

    let fmt = |x: f64| if x.is_finite() { x.to_string() } else { String::new() };
    let mut table = String::from("replicate,extinct,rho_hat,T_eps,T_alpha\n");
    for (r, run) in runs.iter().enumerate() {
        writeln!(
            table,
            "{r},{},{},{},{}",
            run.extinct as u8,
            run.rate.map_or(String::new(), |x| x.to_string()),
            fmt(run.t_eps),
            fmt(run.t_alpha)
        )?;
    }

    let kept: Vec<&Replicate> = runs.iter().filter(|r| !r.extinct).collect();
    let median = |mut xs: Vec<f64>| {
        xs.sort_by(f64::total_cmp);
        match xs.len() {
            0 => f64::NAN,
            m if m % 2 == 1 => xs[m / 2],
            m => 0.5 * (xs[m / 2 - 1] + xs[m / 2]),
        }
    };
    let q = extinction_probability(law, law0, sim.initial_infected.min(u32::MAX as u64) as u32)?;
    let mut summary = String::new();
    writeln!(summary, "rho = {rho}")?;
    writeln!(summary, "extinction_probability = {q}")?;
    writeln!(summary, "extinct_fraction = {}", (runs.len() - kept.len()) as f64 / runs.len() as f64)?;
    writeln!(summary, "non_extinct_runs = {}", kept.len())?;
    writeln!(
        summary,
        "median_rho_hat = {}",
        median(kept.iter().filter_map(|r| r.rate).collect())
    )?;
    let hits: Vec<f64> = kept.iter().map(|r| r.t_alpha).filter(|t| t.is_finite()).collect();
    writeln!(summary, "median_T_alpha_over_log_N = {}", median(hits.iter().map(|t| t / n.ln()).collect()))?;
    writeln!(summary, "alpha_over_rho = {}", e.hitting_exponent / rho)?;

    let mut out = Outputs::default();
    out.add("curves.csv", curves);
    out.add("replicates.csv", table);
    out.add("summary.txt", summary);
    if !kept.is_empty() {
        let kept_runs: Vec<Trajectory> = kept.iter().map(|r| r.trajectory.clone()).collect();
        out.add("envelope.csv", EnsembleSummary::from_trajectories(&kept_runs)?.to_csv());
    }
    Ok(out)
}

fn heatmap(cfg: &Validated) -> Result<Outputs> {
    let h = cfg.raw.heatmap.as_ref().expect("validated: heatmap table");
    let rho = h.rho()?;
    let grid = unit_grid(h.points);
    let map = r0_heatmap(rho, &grid, &grid)?;
    let mut out = Outputs::default();
    out.add("heatmap.csv", map.to_csv());
    out.add("summary.txt", format!("rho = {rho}\nR0_min = {}\nR0_max = {}\n", map.min(), map.max()));
    Ok(out)
}

fn summary(cfg: &Validated) -> Result<Outputs> {
    let m = &cfg.raw.model;
    let i0 = m.initial_infected.unwrap_or(1).clamp(1, u32::MAX as u64) as u32;
    let s = growth_summary(cfg.law(), cfg.law0(), i0, cfg.raw.early.susceptible.unwrap_or(1.0))?;
    let mut out = Outputs::default();
    out.add("growth_summary.txt", s.to_key_value());
    out.add(
        "growth_summary.csv",
        format!("{}\n{}\n", GrowthSummary::csv_header(), s.to_csv_row()),
    );
    Ok(out)
}

fn solve_only(cfg: &Validated) -> Result<Outputs> {
    let mut out = Outputs::default();
    out.add("solution.csv", limit_solution(cfg)?.to_csv());
    Ok(out)
}
