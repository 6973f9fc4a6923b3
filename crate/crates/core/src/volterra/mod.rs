//! Deterministic large-population limits.
//!
//! Every variant is a small system of Volterra equations of the second kind
//! in the force of infection `ℑ̄` and one or two compartments. All of them
//! are discretized the same way: uniform grid, trapezoid rule for each
//! convolution, and a scalar fixed-point iteration for the implicit values
//! at the newest grid point.
//!
//! Variants are registered by name (see [`model`]) so that configuration
//! files can pick one at run time.

mod kernel;

use std::sync::Arc;

use crate::duration::DurationLaw;
use crate::error::{invalid, Error, Result};
use crate::infectivity::InfectivityLaw;
use crate::trajectory::{Compartment, Trajectory};

use kernel::{history, Kernel, Tables};

/// Inputs shared by every limit model.
///
/// `law0_exposed` describes individuals exposed at time 0 (`λ̄⁰`, `G₀`,
/// `Φ₀`, `Ψ₀`) and `law0_infectious` those already infectious (`λ̄^{0,I}`,
/// `F_{0,I}`). Both default to `law`, i.e. initial individuals are freshly
/// infected. `immune` is the immune period of the SIRS variant.
#[derive(Debug, Clone)]
pub struct LimitModelSpec {
    pub law: Arc<InfectivityLaw>,
    pub law0_exposed: Option<Arc<InfectivityLaw>>,
    pub law0_infectious: Option<Arc<InfectivityLaw>>,
    pub immune: Option<Arc<dyn DurationLaw>>,
    pub e0: f64,
    pub i0: f64,
}

impl LimitModelSpec {
    pub fn new(law: Arc<InfectivityLaw>, e0: f64, i0: f64) -> Self {
        Self {
            law,
            law0_exposed: None,
            law0_infectious: None,
            immune: None,
            e0,
            i0,
        }
    }

    pub fn with_initial_exposed(mut self, law0: Arc<InfectivityLaw>) -> Self {
        self.law0_exposed = Some(law0);
        self
    }

    pub fn with_initial_infectious(mut self, law0i: Arc<InfectivityLaw>) -> Self {
        self.law0_infectious = Some(law0i);
        self
    }

    pub fn with_immune_period(mut self, immune: Arc<dyn DurationLaw>) -> Self {
        self.immune = Some(immune);
        self
    }

    pub(crate) fn law0_exposed(&self) -> &InfectivityLaw {
        self.law0_exposed.as_deref().unwrap_or(&self.law)
    }

    pub(crate) fn law0_infectious(&self) -> &InfectivityLaw {
        self.law0_infectious.as_deref().unwrap_or(&self.law)
    }

    /// Checks `Ē(0), Ī(0) ≥ 0` and `0 < Ē(0) + Ī(0) < 1`.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("e0", self.e0), ("i0", self.i0)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        let total = self.e0 + self.i0;
        if !(total > 0.0 && total < 1.0) {
            return Err(invalid(
                "i0",
                format!("initial infected fraction e0 + i0 must lie in (0, 1), got {total}"),
            ));
        }
        Ok(())
    }
}

/// Grid and fixed-point settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub horizon: f64,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            horizon: 100.0,
            fp_tol: 1e-10,
            fp_max_iter: 200,
        }
    }
}

impl SolverConfig {
    pub fn new(dt: f64, horizon: f64) -> Self {
        Self {
            dt,
            horizon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", format!("must be finite and > 0, got {}", self.dt)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid(
                "horizon",
                format!("must be finite and > 0, got {}", self.horizon),
            ));
        }
        if !(self.fp_tol > 0.0) {
            return Err(invalid("fp_tol", format!("must be > 0, got {}", self.fp_tol)));
        }
        if self.fp_max_iter == 0 {
            return Err(invalid("fp_max_iter", "must be at least 1"));
        }
        Ok(())
    }

    /// Index of the last grid point.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round().max(1.0) as usize
    }
}

/// One limit system behind a common interface.
pub trait LimitModel: Send + Sync {
    fn name(&self) -> &'static str;

    fn solve(&self, spec: &LimitModelSpec, cfg: &SolverConfig) -> Result<Trajectory>;
}

/// Full SEIR system with separate exposed and infectious compartments.
#[derive(Debug, Clone, Copy, Default)]
pub struct Seir;

/// Exposed and infectious merged into one infected compartment.
#[derive(Debug, Clone, Copy, Default)]
pub struct Merged;

/// Recovered individuals become susceptible again immediately.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sis;

/// Recovered individuals are immune for a random period, then susceptible.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sirs;

impl LimitModel for Seir {
    fn name(&self) -> &'static str {
        "seir"
    }
    fn solve(&self, spec: &LimitModelSpec, cfg: &SolverConfig) -> Result<Trajectory> {
        solve_seir(spec, cfg)
    }
}

impl LimitModel for Merged {
    fn name(&self) -> &'static str {
        "merged"
    }
    fn solve(&self, spec: &LimitModelSpec, cfg: &SolverConfig) -> Result<Trajectory> {
        solve_merged(spec, cfg)
    }
}

impl LimitModel for Sis {
    fn name(&self) -> &'static str {
        "sis"
    }
    fn solve(&self, spec: &LimitModelSpec, cfg: &SolverConfig) -> Result<Trajectory> {
        solve_sis(spec, cfg)
    }
}

impl LimitModel for Sirs {
    fn name(&self) -> &'static str {
        "sirs"
    }
    fn solve(&self, spec: &LimitModelSpec, cfg: &SolverConfig) -> Result<Trajectory> {
        solve_sirs(spec, cfg)
    }
}

static MODELS: [&dyn LimitModel; 4] = [&Seir, &Merged, &Sis, &Sirs];

/// All registered limit models.
pub fn models() -> &'static [&'static dyn LimitModel] {
    &MODELS
}

/// Looks a limit model up by name.
pub fn model(name: &str) -> Result<&'static dyn LimitModel> {
    MODELS
        .iter()
        .copied()
        .find(|m| m.name() == name)
        .ok_or_else(|| Error::UnknownKind {
            registry: "limit model",
            kind: name.to_string(),
            known: MODELS.iter().map(|m| m.name()).collect::<Vec<_>>().join(", "),
        })
}

fn reject_immune(spec: &LimitModelSpec, variant: &str) -> Result<()> {
    if spec.immune.is_some() {
        return Err(invalid(
            "immune",
            format!("an immune period only applies to the sirs model, not {variant}"),
        ));
    }
    Ok(())
}

fn reject_exposed(spec: &LimitModelSpec, variant: &str) -> Result<()> {
    if spec.e0 != 0.0 {
        return Err(invalid(
            "e0",
            format!("the {variant} model has no exposed compartment; put initial cases in i0"),
        ));
    }
    Ok(())
}

/// The SEIR limit.
pub fn solve_seir(spec: &LimitModelSpec, cfg: &SolverConfig) -> Result<Trajectory> {
    spec.validate()?;
    cfg.validate()?;
    reject_immune(spec, "seir")?;
    let tables = Tables::seir(spec, cfg.dt, cfg.steps());
    seir_on(&tables, spec.e0, spec.i0, cfg, false)
}

/// The merged SEIR/SIR limit: `Ē ≡ 0` and `Ī` is driven by `F^c`, the
/// survival function of `ζ + η`.
pub fn solve_merged(spec: &LimitModelSpec, cfg: &SolverConfig) -> Result<Trajectory> {
    spec.validate()?;
    cfg.validate()?;
    reject_immune(spec, "merged")?;
    reject_exposed(spec, "merged")?;
    let tables = Tables::merged(spec, cfg.dt, cfg.steps());
    seir_on(&tables, 0.0, spec.i0, cfg, true)
}

/// The SIS limit, where `S̄ = 1 − Ī`.
pub fn solve_sis(spec: &LimitModelSpec, cfg: &SolverConfig) -> Result<Trajectory> {
    spec.validate()?;
    cfg.validate()?;
    reject_immune(spec, "sis")?;
    reject_exposed(spec, "sis")?;
    let tables = Tables::sis(spec, cfg.dt, cfg.steps());
    sirs_on(&tables, spec.i0, cfg, false)
}

/// The SIRS limit, where `S̄ = 1 − Ī − R̄`.
///
/// The infectious period is `ζ + η` of the law and the immune period is
/// drawn independently from `spec.immune`.
pub fn solve_sirs(spec: &LimitModelSpec, cfg: &SolverConfig) -> Result<Trajectory> {
    spec.validate()?;
    cfg.validate()?;
    reject_exposed(spec, "sirs")?;
    if spec.immune.is_none() {
        return Err(invalid("immune", "the sirs model needs an immune-period law"));
    }
    let tables = Tables::sirs(spec, cfg.dt, cfg.steps());
    sirs_on(&tables, spec.i0, cfg, true)
}

/// Solves the `(S̄, ℑ̄)` pair, then evaluates `Ē, Ī, R̄` by quadrature.
fn seir_on(t: &Tables, e0: f64, i0: f64, cfg: &SolverConfig, merged: bool) -> Result<Trajectory> {
    let n = t.steps;
    let dt = t.dt;
    let half = 0.5 * dt;
    let lam = &t.lam;
    let k0 = lam.at(0);

    let mut s = vec![0.0; n + 1];
    let mut ifrak = vec![0.0; n + 1];
    let mut y = vec![0.0; n + 1];

    s[0] = 1.0 - e0 - i0;
    ifrak[0] = t.forcing[0];
    y[0] = s[0] * ifrak[0];
    for m in 1..=n {
        let base = t.forcing[m] + history(lam, &y, m, dt);
        let carried = s[m - 1] - half * y[m - 1];
        let mut j = ifrak[m - 1];
        let mut converged = false;
        let mut change = f64::INFINITY;
        for _ in 0..cfg.fp_max_iter {
            let sm = carried / (1.0 + half * j);
            let next = base + half * k0 * sm * j;
            change = (next - j).abs();
            j = next;
            if change <= cfg.fp_tol * j.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged || !j.is_finite() {
            return Err(Error::FixedPoint {
                t: m as f64 * dt,
                iterations: cfg.fp_max_iter,
                change,
            });
        }
        let sm = carried / (1.0 + half * j);
        s[m] = sm;
        ifrak[m] = j;
        y[m] = sm * j;
    }

    let cumulative = running_trapezoid(&y, dt);
    let mut out = Trajectory::with_capacity(n + 1);
    for m in 0..=n {
        let a = cumulative[m];
        let (e, i, r) = if merged {
            let i = i0 * t.init_i_surv[m] + conv(&t.i_kernel, &y, m, dt);
            // R̄ = Ī(0) F₀ + ∫ F(t−s) dĀ(s), with ∫F = Ā − ∫F^c.
            let r = i0 * (1.0 - t.init_i_surv[m]) + a - conv(&t.i_kernel, &y, m, dt);
            (0.0, i, r)
        } else {
            let e = e0 * t.init_e_surv[m] + conv(&t.e_kernel, &y, m, dt);
            let i = i0 * t.init_i_surv[m] + e0 * t.init_e_active[m] + conv(&t.i_kernel, &y, m, dt);
            let r = i0 * (1.0 - t.init_i_surv[m]) + e0 * t.init_e_done[m] + a
                - conv(&t.r_complement, &y, m, dt);
            (e, i, r)
        };
        out.push(m as f64 * dt, s[m], ifrak[m], e, i, r, a);
    }
    Ok(out)
}

/// SIS (`with_immunity = false`) and SIRS: the susceptible fraction is the
/// complement of the infected (and immune) fractions.
fn sirs_on(t: &Tables, i0: f64, cfg: &SolverConfig, with_immunity: bool) -> Result<Trajectory> {
    let n = t.steps;
    let dt = t.dt;
    let half = 0.5 * dt;
    let k0 = t.lam.at(0);
    let ki0 = t.i_kernel.at(0);
    let kr0 = t.r_kernel.at(0);

    let mut ifrak = vec![0.0; n + 1];
    let mut inf = vec![0.0; n + 1];
    let mut rec = vec![0.0; n + 1];
    let mut y = vec![0.0; n + 1];

    ifrak[0] = t.forcing[0];
    inf[0] = i0;
    y[0] = (1.0 - i0) * ifrak[0];
    for m in 1..=n {
        let base_j = t.forcing[m] + history(&t.lam, &y, m, dt);
        let base_i = i0 * t.init_i_surv[m] + history(&t.i_kernel, &y, m, dt);
        let base_r = if with_immunity {
            i0 * t.init_r_active[m] + history(&t.r_kernel, &y, m, dt)
        } else {
            0.0
        };
        let (mut j, mut i, mut r) = (ifrak[m - 1], inf[m - 1], rec[m - 1]);
        let mut converged = false;
        let mut change = f64::INFINITY;
        for _ in 0..cfg.fp_max_iter {
            let ym = (1.0 - i - r) * j;
            let nj = base_j + half * k0 * ym;
            let ni = base_i + half * ki0 * ym;
            let nr = if with_immunity { base_r + half * kr0 * ym } else { 0.0 };
            change = (nj - j).abs().max((ni - i).abs()).max((nr - r).abs());
            (j, i, r) = (nj, ni, nr);
            if change <= cfg.fp_tol * j.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged || !j.is_finite() {
            return Err(Error::FixedPoint {
                t: m as f64 * dt,
                iterations: cfg.fp_max_iter,
                change,
            });
        }
        ifrak[m] = j;
        inf[m] = i;
        rec[m] = r;
        y[m] = (1.0 - i - r) * j;
    }

    let cumulative = running_trapezoid(&y, dt);
    let mut out = Trajectory::with_capacity(n + 1);
    for m in 0..=n {
        let s = 1.0 - inf[m] - rec[m];
        out.push(m as f64 * dt, s, ifrak[m], 0.0, inf[m], rec[m], cumulative[m]);
    }
    Ok(out)
}

/// `∫₀^{t_m} k(t_m − s) y(s) ds` by the trapezoid rule.
fn conv(k: &Kernel, y: &[f64], m: usize, dt: f64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    history(k, y, m, dt) + 0.5 * dt * k.at(0) * y[m]
}

fn running_trapezoid(y: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in y.windows(2) {
        acc += 0.5 * dt * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Observed order of the discretization under successive halving of `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Step sizes `dt, dt/2, …`.
    pub dts: Vec<f64>,
    /// Sup-norm difference between consecutive refinements, on the
    /// coarsest grid, over `S̄, ℑ̄, Ē, Ī, R̄`.
    pub differences: Vec<f64>,
    /// `log2` of consecutive difference ratios.
    pub orders: Vec<f64>,
}

impl ConvergenceReport {
    /// The order measured between the two finest refinements.
    pub fn observed_order(&self) -> f64 {
        *self.orders.last().unwrap_or(&f64::NAN)
    }
}

/// Solves at `dt, dt/2, …, dt/2^refinements` and estimates the order of
/// convergence from successive differences.
pub fn convergence_order(
    model: &dyn LimitModel,
    spec: &LimitModelSpec,
    cfg: &SolverConfig,
    refinements: usize,
) -> Result<ConvergenceReport> {
    if refinements < 2 {
        return Err(invalid("refinements", format!("must be >= 2, got {refinements}")));
    }
    cfg.validate()?;
    let coarse = cfg.steps();
    let mut dts = Vec::with_capacity(refinements + 1);
    let mut runs = Vec::with_capacity(refinements + 1);
    for k in 0..=refinements {
        let scale = 1usize << k;
        let dt = cfg.dt / scale as f64;
        let c = SolverConfig {
            dt,
            horizon: coarse as f64 * cfg.dt,
            ..*cfg
        };
        dts.push(dt);
        runs.push((scale, model.solve(spec, &c)?));
    }
    let columns = [
        Compartment::Susceptible,
        Compartment::ForceOfInfection,
        Compartment::Exposed,
        Compartment::Infected,
        Compartment::Removed,
    ];
    let differences: Vec<f64> = runs
        .windows(2)
        .map(|w| {
            let ((sa, a), (sb, b)) = (&w[0], &w[1]);
            let mut d = 0.0f64;
            for j in 0..=coarse {
                for c in columns {
                    let x = a.component(c)[j * sa];
                    let z = b.component(c)[j * sb];
                    d = d.max((x - z).abs());
                }
            }
            d
        })
        .collect();
    let orders = differences.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(ConvergenceReport {
        dts,
        differences,
        orders,
    })
}

#[cfg(test)]
mod tests;
