use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{simulate_with_rng, EpidemicState, SimConfig};
use crate::error::{invalid, Result};
use crate::infectivity::InfectivityLaw;
use crate::trajectory::{Compartment, Trajectory};

/// Random stream of replicate `r`: the master seed picks the key and `r`
/// the stream, so replicates never overlap and do not depend on the
/// thread that runs them.
pub fn replicate_rng(master_seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replicate);
    rng
}

/// Runs `n` replicates in parallel; results are in replicate order.
pub fn simulate_replicates(
    law: &InfectivityLaw,
    law0: &InfectivityLaw,
    cfg: &SimConfig,
    n: usize,
    master_seed: u64,
) -> Result<Vec<(Trajectory, EpidemicState)>> {
    cfg.validate()?;
    (0..n as u64)
        .into_par_iter()
        .map(|r| simulate_with_rng(law, law0, cfg, &mut replicate_rng(master_seed, r)))
        .collect()
}

/// Runs `n_replicates` and summarizes their trajectories.
pub fn run_ensemble(
    law: &InfectivityLaw,
    law0: &InfectivityLaw,
    cfg: &SimConfig,
    n_replicates: usize,
    master_seed: u64,
) -> Result<EnsembleSummary> {
    if n_replicates == 0 {
        return Err(invalid("replicates", "need at least one replicate"));
    }
    cfg.validate()?;
    let runs: Vec<Trajectory> = (0..n_replicates as u64)
        .into_par_iter()
        .map(|r| {
            simulate_with_rng(law, law0, cfg, &mut replicate_rng(master_seed, r)).map(|(tr, _)| tr)
        })
        .collect::<Result<_>>()?;
    EnsembleSummary::from_trajectories(&runs)
}

/// Type-7 sample quantile (linear interpolation between order statistics)
/// of already sorted values.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pointwise statistics of one column over the replicates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ColumnStats {
    pub mean: Vec<f64>,
    pub p25: Vec<f64>,
    pub p75: Vec<f64>,
    pub p2_5: Vec<f64>,
    pub p97_5: Vec<f64>,
}

impl ColumnStats {
    /// Width of the central 95% envelope at grid index `k`.
    pub fn width95(&self, k: usize) -> f64 {
        self.p97_5[k] - self.p2_5[k]
    }

    /// Width of the central 50% envelope at grid index `k`.
    pub fn width50(&self, k: usize) -> f64 {
        self.p75[k] - self.p25[k]
    }
}

/// Mean and 50%/95% envelopes of every trajectory column.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub t: Vec<f64>,
    pub replicates: usize,
    pub population: Option<u64>,
    /// In the order of [`Compartment::ALL`].
    pub columns: Vec<ColumnStats>,
}

impl EnsembleSummary {
    pub fn from_trajectories(runs: &[Trajectory]) -> Result<Self> {
        let first = runs
            .first()
            .ok_or_else(|| invalid("replicates", "need at least one trajectory"))?;
        if runs.iter().any(|r| r.t != first.t) {
            return Err(invalid(
                "replicates",
                "trajectories must share one time grid; disable early stopping for ensembles",
            ));
        }
        let len = first.len();
        let columns = Compartment::ALL
            .par_iter()
            .map(|&c| {
                let mut stats = ColumnStats::default();
                let mut values = Vec::with_capacity(runs.len());
                for k in 0..len {
                    values.clear();
                    values.extend(runs.iter().map(|r| r.component(c)[k]));
                    // fixed summation order keeps the mean reproducible
                    stats.mean.push(values.iter().sum::<f64>() / runs.len() as f64);
                    values.sort_by(f64::total_cmp);
                    stats.p25.push(percentile(&values, 0.25));
                    stats.p75.push(percentile(&values, 0.75));
                    stats.p2_5.push(percentile(&values, 0.025));
                    stats.p97_5.push(percentile(&values, 0.975));
                }
                stats
            })
            .collect();
        Ok(Self {
            t: first.t.clone(),
            replicates: runs.len(),
            population: first.population,
            columns,
        })
    }

    pub fn column(&self, c: Compartment) -> &ColumnStats {
        let k = Compartment::ALL.iter().position(|&x| x == c).expect("listed compartment");
        &self.columns[k]
    }

    /// The pointwise mean as a trajectory.
    pub fn mean_trajectory(&self) -> Trajectory {
        let col = |c| self.column(c).mean.clone();
        Trajectory {
            t: self.t.clone(),
            s: col(Compartment::Susceptible),
            ifrak: col(Compartment::ForceOfInfection),
            e: col(Compartment::Exposed),
            i: col(Compartment::Infected),
            r: col(Compartment::Removed),
            a: col(Compartment::Cumulative),
            population: None,
        }
    }

    /// CSV with `t`, then `mean_*`, `p25_*`, `p75_*`, `p2.5_*` and
    /// `p97.5_*` for every column. `A` is written as a count when the
    /// population is known.
    pub fn to_csv(&self) -> String {
        let stats: [(&str, fn(&ColumnStats) -> &Vec<f64>); 5] = [
            ("mean", |s| &s.mean),
            ("p25", |s| &s.p25),
            ("p75", |s| &s.p75),
            ("p2.5", |s| &s.p2_5),
            ("p97.5", |s| &s.p97_5),
        ];
        let mut out = String::from("t");
        for (name, _) in &stats {
            for c in Compartment::ALL {
                let _ = write!(out, ",{name}_{}", c.column());
            }
        }
        out.push('\n');
        let scale_a = self.population.map_or(1.0, |n| n as f64);
        for k in 0..self.t.len() {
            let _ = write!(out, "{}", self.t[k]);
            for (_, get) in &stats {
                for (c, col) in Compartment::ALL.iter().zip(&self.columns) {
                    let v = get(col)[k];
                    let v = if *c == Compartment::Cumulative { v * scale_a } else { v };
                    let _ = write!(out, ",{v}");
                }
            }
            out.push('\n');
        }
        out
    }
}
