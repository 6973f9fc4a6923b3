//! The early phase: growth rate, reproduction numbers, stable-age profiles
//! and the probability of a minor outbreak.

use std::fmt::Write as _;

use rand::RngCore;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::infectivity::InfectivityLaw;
use crate::quadrature::simpson;
use crate::trajectory::Trajectory;

/// Bracket searched for the growth rate, in 1/day.
pub const RHO_BRACKET: (f64, f64) = (-50.0, 50.0);

/// `R0 = ∫ λ̄(t) dt`.
pub fn compute_r0(law: &InfectivityLaw) -> f64 {
    law.r0()
}

/// `R0` from a tabulated mean curve by composite Simpson.
pub fn compute_r0_tabulated(values: &[f64], step: f64) -> Result<f64> {
    if values.len() < 2 {
        return Err(invalid("values", "need a tabulated curve with at least two points"));
    }
    if !(step > 0.0) {
        return Err(invalid("step", format!("must be > 0, got {step}")));
    }
    Ok(simpson(values, step))
}

/// `m(ρ) = ∫ λ̄(t) e^{−ρt} dt`, infinite where the integral diverges.
pub fn growth_function(law: &InfectivityLaw, rho: f64) -> f64 {
    match law.laplace(rho) {
        Ok(v) if v.is_finite() => v,
        _ => f64::INFINITY,
    }
}

/// The `ρ` solving `m(ρ) = 1`.
///
/// `m` is strictly decreasing, so plain bisection on [`RHO_BRACKET`] is run
/// down to adjacent floating-point numbers.
pub fn solve_rho(law: &InfectivityLaw) -> Result<f64> {
    let r0 = law.r0();
    if !(r0 > 0.0) {
        return Err(Error::Root(format!(
            "R0 = {r0}: m(rho) = 1 has no solution"
        )));
    }
    let (mut lo, mut hi) = RHO_BRACKET;
    let (m_lo, m_hi) = (growth_function(law, lo), growth_function(law, hi));
    if !(m_lo >= 1.0 && m_hi <= 1.0) {
        return Err(Error::Root(format!(
            "m({lo}) = {m_lo:e} and m({hi}) = {m_hi:e} do not bracket 1"
        )));
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if growth_function(law, mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (d_lo, d_hi) = (
        (growth_function(law, lo) - 1.0).abs(),
        (growth_function(law, hi) - 1.0).abs(),
    );
    Ok(if d_lo < d_hi { lo } else { hi })
}

/// Reproduction numbers implied by a growth rate and an infectivity shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthRatio {
    /// Scale factor `(∫ ḡ e^{−ρt} dt)^{−1}`.
    pub mu: f64,
    pub r0: f64,
    /// `S̄(t₀) R0`, when a susceptible fraction is supplied.
    pub re: Option<f64>,
}

fn growth_ratio(total: f64, discounted: f64, susceptible: Option<f64>) -> Result<GrowthRatio> {
    if !(discounted > 0.0 && discounted.is_finite()) {
        return Err(Error::Domain {
            what: "shape",
            reason: format!("∫ g e^(-rho t) dt = {discounted}; need a finite positive value"),
        });
    }
    if let Some(s) = susceptible {
        if !(0.0..=1.0).contains(&s) {
            return Err(invalid("susceptible", format!("must lie in [0, 1], got {s}")));
        }
    }
    let mu = 1.0 / discounted;
    let r0 = total / discounted;
    Ok(GrowthRatio {
        mu,
        r0,
        re: susceptible.map(|s| s * r0),
    })
}

/// `R0 = ∫ḡ / ∫ḡ e^{−ρt}` with `ḡ` the mean infectivity of `law` (any
/// positive multiple gives the same `R0`).
pub fn r0_from_growth(
    law: &InfectivityLaw,
    rho: f64,
    susceptible: Option<f64>,
) -> Result<GrowthRatio> {
    if !rho.is_finite() {
        return Err(invalid("rho", format!("must be finite, got {rho}")));
    }
    let discounted = law.laplace(rho)?;
    growth_ratio(law.r0(), discounted, susceptible)
}

/// As [`r0_from_growth`] for a shape tabulated on `0, step, 2 step, …`.
pub fn r0_from_growth_tabulated(
    g: &[f64],
    step: f64,
    rho: f64,
    susceptible: Option<f64>,
) -> Result<GrowthRatio> {
    if g.iter().any(|v| !(*v >= 0.0)) {
        return Err(invalid("g", "shape values must be >= 0"));
    }
    let discounted: Vec<f64> = g
        .iter()
        .enumerate()
        .map(|(k, v)| v * (-rho * k as f64 * step).exp())
        .collect();
    growth_ratio(
        compute_r0_tabulated(g, step)?,
        simpson(&discounted, step),
        susceptible,
    )
}

/// Initial curves under which the linearized system grows exactly
/// exponentially, tabulated on `0, step, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct StableAgeProfiles {
    pub rho: f64,
    pub step: f64,
    /// `λ̄_ρ(t)`.
    pub lambda_rho: Vec<f64>,
    /// `F_ρ^c(t)`.
    pub f_rho_c: Vec<f64>,
    /// `𝒊 = ρ ∫ F^c(s) e^{−ρs} ds`.
    pub i_frac: f64,
    /// `𝒓 = 1 − 𝒊`.
    pub r_frac: f64,
}

/// Tabulates `λ̄_ρ` and `F_ρ^c` on `[0, horizon]`.
pub fn stable_age_profiles(
    law: &InfectivityLaw,
    rho: f64,
    step: f64,
    horizon: f64,
) -> Result<StableAgeProfiles> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid("step", format!("must be > 0, got {step}")));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon", format!("must be finite and >= 0, got {horizon}")));
    }
    let denom = law.survival_laplace_tail(rho, 0.0)?;
    if !(denom > 0.0 && denom.is_finite()) {
        return Err(Error::Divergent(format!(
            "∫ F^c(s) e^(-rho s) ds = {denom} at rho = {rho}"
        )));
    }
    let n = (horizon / step).round() as usize;
    let rows: Vec<(f64, f64)> = (0..=n)
        .into_par_iter()
        .map(|k| {
            let t = k as f64 * step;
            let grow = (rho * t).exp();
            let lam = law.laplace_tail(rho, t).unwrap_or(f64::NAN) * grow / denom;
            let surv = law.survival_laplace_tail(rho, t).unwrap_or(f64::NAN) * grow / denom;
            (lam.max(0.0), surv.clamp(0.0, 1.0))
        })
        .collect();
    if rows.iter().any(|(a, b)| a.is_nan() || b.is_nan()) {
        return Err(Error::Divergent(format!("stable-age profile diverges at rho = {rho}")));
    }
    let (lambda_rho, mut f_rho_c): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    f_rho_c[0] = 1.0;
    let i_frac = rho * denom;
    Ok(StableAgeProfiles {
        rho,
        step,
        lambda_rho,
        f_rho_c,
        i_frac,
        r_frac: 1.0 - i_frac,
    })
}

/// `A(t)` of the exponential solution: `∫₀ᵗ |ρ| e^{ρs} ds`.
pub fn linear_cumulative(rho: f64, t: f64) -> f64 {
    (rho * t).exp_m1().abs()
}

/// Sup residuals of the exponential solution substituted into the
/// trapezoid-discretized linear system, relative to `max(1, |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearResidual {
    pub force: f64,
    pub infected: f64,
    pub removed: f64,
}

impl LinearResidual {
    pub fn sup(&self) -> f64 {
        self.force.max(self.infected).max(self.removed)
    }
}

/// Checks that `ℑ = |ρ| e^{ρt}`, `I = |𝒊| e^{ρt}` and the matching `R`
/// solve the linear system with initial curves `λ̄_ρ`, `F_ρ` and
/// `I(0) = |𝒊|`, on the grid of `profiles`.
///
/// For `ρ > 0`, `R(0) = 𝒓` and `R = 𝒓 e^{ρt}`; for `ρ < 0`, `R(0) = 0` and
/// `R = 𝒓 (1 − e^{ρt})`.
pub fn verify_linear_solution(
    law: &InfectivityLaw,
    profiles: &StableAgeProfiles,
) -> Result<LinearResidual> {
    let rho = profiles.rho;
    if rho == 0.0 {
        return Err(invalid("rho", "the exponential solution needs rho != 0"));
    }
    let h = profiles.step;
    let n = profiles.lambda_rho.len();
    let lam: Vec<f64> = (0..n).into_par_iter().map(|k| law.mean_at(k as f64 * h)).collect();
    let surv: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| 1.0 - law.total_cdf(k as f64 * h))
        .collect();
    let i0 = profiles.i_frac.abs();
    let force: Vec<f64> = (0..n).map(|k| rho.abs() * (rho * k as f64 * h).exp()).collect();
    let removed = |t: f64| {
        if rho > 0.0 {
            profiles.r_frac * (rho * t).exp()
        } else {
            -profiles.r_frac * (rho * t).exp_m1()
        }
    };
    let r_start = removed(0.0);

    let rel = |lhs: f64, rhs: f64| (lhs - rhs).abs() / lhs.abs().max(1.0);
    let worst = (0..n)
        .into_par_iter()
        .map(|m| {
            let t = m as f64 * h;
            let (mut c_lam, mut c_surv, mut c_all) = (0.0, 0.0, 0.0);
            // the trapezoid over [0, 0] is empty
            let last = if m == 0 { 0 } else { m + 1 };
            for j in 0..last {
                let w = if j == 0 || j == m { 0.5 } else { 1.0 };
                let x = w * force[j];
                c_lam += lam[m - j] * x;
                c_surv += surv[m - j] * x;
                c_all += x;
            }
            let (c_lam, c_surv, c_all) = (h * c_lam, h * c_surv, h * c_all);
            let c_done = c_all - c_surv;
            let f_rhs = i0 * profiles.lambda_rho[m] + c_lam;
            let i_rhs = i0 * profiles.f_rho_c[m] + c_surv;
            let r_rhs = r_start + i0 * (1.0 - profiles.f_rho_c[m]) + c_done;
            let i_lhs = i0 * (rho * t).exp();
            (
                rel(force[m], f_rhs),
                rel(i_lhs, i_rhs),
                rel(removed(t), r_rhs),
            )
        })
        .reduce(
            || (0.0, 0.0, 0.0),
            |a, b| (a.0.max(b.0), a.1.max(b.1), a.2.max(b.2)),
        );
    Ok(LinearResidual {
        force: worst.0,
        infected: worst.1,
        removed: worst.2,
    })
}

const EXTINCTION_TOL: f64 = 1e-15;
const EXTINCTION_MAX_ITER: usize = 1_000_000;

/// Smallest fixed point of a generating function, iterated from 0.
fn smallest_fixed_point(mut h: impl FnMut(f64) -> f64, tol: f64) -> Result<f64> {
    let mut s = 0.0;
    for _ in 0..EXTINCTION_MAX_ITER {
        let next = h(s);
        if !(next >= s - 1e-15) || !next.is_finite() {
            return Err(Error::Invariant(format!(
                "generating-function iterates must increase: {s} -> {next}"
            )));
        }
        if (next - s).abs() <= tol {
            return Ok(next.min(1.0));
        }
        s = next;
    }
    Err(Error::Root(format!(
        "extinction fixed point not reached after {EXTINCTION_MAX_ITER} iterations (at {s})"
    )))
}

/// Probability that the epidemic started by `i0` initial individuals with
/// infectivity law `law0` dies out without a major outbreak.
///
/// Offspring counts are Poisson given `∫λ`, so the generating function is
/// `E[exp(−(1−s)∫λ)]`; it is evaluated by quadrature.
pub fn extinction_probability(law: &InfectivityLaw, law0: &InfectivityLaw, i0: u32) -> Result<f64> {
    if i0 == 0 {
        return Err(invalid("i0", "need at least one initial infected individual"));
    }
    if law.r0() <= 1.0 {
        return Ok(1.0);
    }
    let q = smallest_fixed_point(|s| law.offspring_pgf(s), EXTINCTION_TOL)?;
    Ok(law0.offspring_pgf(q).powi(i0 as i32))
}

/// Monte-Carlo variant of [`extinction_probability`]: the generating
/// function is averaged over `mc_samples` sampled infectivity functions.
pub fn extinction_probability_mc(
    law: &InfectivityLaw,
    law0: &InfectivityLaw,
    i0: u32,
    mc_samples: usize,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    if mc_samples < 10_000 {
        return Err(invalid("mc_samples", format!("must be >= 10^4, got {mc_samples}")));
    }
    if i0 == 0 {
        return Err(invalid("i0", "need at least one initial infected individual"));
    }
    if law.r0() <= 1.0 {
        return Ok(1.0);
    }
    let masses: Vec<f64> = (0..mc_samples).map(|_| law.sample(rng).integral()).collect();
    let masses0: Vec<f64> = (0..mc_samples).map(|_| law0.sample(rng).integral()).collect();
    let pgf = |m: &[f64], s: f64| m.iter().map(|x| (-(1.0 - s) * x).exp()).sum::<f64>() / m.len() as f64;
    let q = smallest_fixed_point(|s| pgf(&masses, s), 1e-10)?;
    Ok(pgf(&masses0, q).powi(i0 as i32))
}

/// Least-squares slope of `log(values)` against `times`.
pub fn log_linear_slope(times: &[f64], values: &[f64]) -> Result<f64> {
    if times.len() != values.len() {
        return Err(invalid("values", "times and values differ in length"));
    }
    if times.len() < 2 {
        return Err(invalid("window", "need at least two points to fit a slope"));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Domain {
            what: "growth window",
            reason: format!("log-linear fit needs positive values, found {v}"),
        });
    }
    let n = times.len() as f64;
    let mt = times.iter().sum::<f64>() / n;
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let ml = logs.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, l) in times.iter().zip(&logs) {
        sxy += (t - mt) * (l - ml);
        sxx += (t - mt) * (t - mt);
    }
    if sxx == 0.0 {
        return Err(invalid("window", "all points share one time"));
    }
    Ok(sxy / sxx)
}

/// Fitted exponential growth rate of `I(0) + A(t)` over `t_lo ≤ t ≤ t_hi`.
pub fn estimate_growth_rate(tr: &Trajectory, (t_lo, t_hi): (f64, f64)) -> Result<f64> {
    if tr.is_empty() {
        return Err(invalid("trajectory", "is empty"));
    }
    let (first, last) = (tr.t[0], tr.t[tr.len() - 1]);
    if !(t_lo < t_hi) || t_lo < first - 1e-12 || t_hi > last + 1e-12 {
        return Err(invalid(
            "window",
            format!("({t_lo}, {t_hi}) must be increasing and inside [{first}, {last}]"),
        ));
    }
    let base = tr.i[0] + tr.e[0];
    let (times, values): (Vec<f64>, Vec<f64>) = tr
        .t
        .iter()
        .zip(&tr.a)
        .filter(|(t, _)| **t >= t_lo && **t <= t_hi)
        .map(|(t, a)| (*t, base + a))
        .unzip();
    log_linear_slope(&times, &values)
}

/// Like [`estimate_growth_rate`], with the window given by the level of
/// the cumulative curve `Ī(0) + Ē(0) + Ā` instead of by time: the grid
/// points whose level lies in `[lo, hi]` are fitted.
pub fn estimate_growth_rate_between(tr: &Trajectory, (lo, hi): (f64, f64)) -> Result<f64> {
    if tr.is_empty() {
        return Err(invalid("trajectory", "is empty"));
    }
    if !(lo > 0.0 && lo < hi) {
        return Err(invalid("window", format!("levels ({lo}, {hi}) must be positive and increasing")));
    }
    let base = tr.i[0] + tr.e[0];
    let (times, values): (Vec<f64>, Vec<f64>) = tr
        .t
        .iter()
        .zip(&tr.a)
        .map(|(t, a)| (*t, base + a))
        .filter(|(_, y)| *y >= lo && *y <= hi)
        .unzip();
    log_linear_slope(&times, &values)
}

/// Early-phase summary of one law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthSummary {
    pub rho: f64,
    pub r0: f64,
    pub re: f64,
    /// `(∫ ḡ e^{−ρt} dt)^{−1}` for the generation-interval density
    /// `ḡ = λ̄ / R0`.
    pub mu: f64,
    pub i_frac: f64,
    pub r_frac: f64,
    pub q: f64,
}

impl GrowthSummary {
    pub const FIELDS: [&'static str; 7] = ["rho", "R0", "Re", "mu", "i_frac", "r_frac", "q"];

    fn values(&self) -> [f64; 7] {
        [
            self.rho,
            self.r0,
            self.re,
            self.mu,
            self.i_frac,
            self.r_frac,
            self.q,
        ]
    }

    /// One `key = value` line per field.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        for (k, v) in Self::FIELDS.iter().zip(self.values()) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn csv_header() -> String {
        Self::FIELDS.join(",")
    }

    pub fn to_csv_row(&self) -> String {
        self.values()
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Growth rate, reproduction numbers, `𝒊`, `𝒓` and the extinction
/// probability for `i0` initial individuals drawn from `law0`, with
/// susceptible fraction `susceptible` for `Re`.
pub fn growth_summary(
    law: &InfectivityLaw,
    law0: &InfectivityLaw,
    i0: u32,
    susceptible: f64,
) -> Result<GrowthSummary> {
    let rho = solve_rho(law)?;
    let r0 = law.r0();
    let ratio = r0_from_growth(law, rho, Some(susceptible))?;
    let denom = law.survival_laplace_tail(rho, 0.0)?;
    let i_frac = rho * denom;
    Ok(GrowthSummary {
        rho,
        r0,
        re: ratio.re.unwrap_or(f64::NAN),
        mu: ratio.mu * r0,
        i_frac,
        r_frac: 1.0 - i_frac,
        q: extinction_probability(law, law0, i0)?,
    })
}

#[cfg(test)]
mod tests;
