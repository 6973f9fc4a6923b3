use rayon::prelude::*;

use super::law::InfectivityLaw;
use crate::error::{invalid, Result};
use crate::quadrature::simpson;

/// Default spacing of the mean-infectivity table, in days.
pub const DEFAULT_MEAN_STEP: f64 = 0.01;

/// `λ̄` tabulated on `0, h, 2h, …` up to the law's support.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanGrid {
    step: f64,
    values: Vec<f64>,
}

impl MeanGrid {
    pub fn tabulate(law: &InfectivityLaw, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid("step", format!("must be > 0, got {step}")));
        }
        let n = (law.support() / step).ceil() as usize + 1;
        let values = (0..n)
            .into_par_iter()
            .map(|i| law.mean_at(i as f64 * step))
            .collect();
        Ok(Self { step, values })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation, zero past the table.
    pub fn at(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let x = t / self.step;
        let i = x.floor() as usize;
        if i + 1 >= self.values.len() {
            return if i + 1 == self.values.len() { self.values[i] } else { 0.0 };
        }
        let w = x - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// `∫ λ̄` by composite Simpson over the table.
    pub fn integral(&self) -> f64 {
        simpson(&self.values, self.step)
    }
}

/// Duration c.d.f.s tabulated on a uniform grid `0, h, …, n h`.
///
/// `g`, `phi`, `psi` describe the newly infected (`G`, `Φ`, `Ψ = G − Φ`);
/// `f` is the c.d.f. of `ζ + η` used by the merged model (equal to `Φ`).
/// The `*0` tables describe the initially exposed individuals and `f0i`
/// the infectious period of the initially infectious ones.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationDistributions {
    pub step: f64,
    pub g: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub f: Vec<f64>,
    pub g0: Vec<f64>,
    pub phi0: Vec<f64>,
    pub psi0: Vec<f64>,
    pub f0i: Vec<f64>,
}

/// The `(G, Φ, Ψ)` triple of one law on the grid.
fn tables(law: &InfectivityLaw, step: f64, n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let pairs: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 * step;
            (law.exposed_cdf(t), law.total_cdf(t))
        })
        .collect();
    let g: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let phi: Vec<f64> = pairs.iter().map(|p| p.1.min(p.0)).collect();
    let psi = g.iter().zip(&phi).map(|(g, p)| g - p).collect();
    (g, phi, psi)
}

/// Tabulates the duration c.d.f.s of `law` on `[0, horizon]`; the initial
/// individuals are taken to follow the same law until overridden.
pub fn duration_distributions(
    law: &InfectivityLaw,
    grid_step: f64,
    horizon: f64,
) -> Result<DurationDistributions> {
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(invalid("grid_step", format!("must be > 0, got {grid_step}")));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon", format!("must be finite and >= 0, got {horizon}")));
    }
    let n = (horizon / grid_step).round() as usize + 1;
    let (g, phi, psi) = tables(law, grid_step, n);
    Ok(DurationDistributions {
        step: grid_step,
        f: phi.clone(),
        g0: g.clone(),
        phi0: phi.clone(),
        psi0: psi.clone(),
        f0i: phi.clone(),
        g,
        phi,
        psi,
    })
}

impl DurationDistributions {
    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    /// Replaces the tables of the initially exposed individuals.
    pub fn with_initial_exposed(mut self, law0: &InfectivityLaw) -> Self {
        let (g, phi, psi) = tables(law0, self.step, self.len());
        self.g0 = g;
        self.phi0 = phi;
        self.psi0 = psi;
        self
    }

    /// Replaces `F_{0,I}`, the c.d.f. of the remaining infectious period of
    /// the initially infectious individuals.
    pub fn with_initial_infectious(mut self, law0i: &InfectivityLaw) -> Self {
        let (_, phi, _) = tables(law0i, self.step, self.len());
        self.f0i = phi;
        self
    }
}
