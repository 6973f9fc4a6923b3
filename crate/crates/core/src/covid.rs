//! Reported/unreported Covid-19 parameterization and R0 heatmaps.
//!
//! Every individual has a triangular infectivity that starts at `ζ`, peaks
//! at `ζ + η/5` and ends at `ζ + η`, with `ζ = 2 + 2X₁` and `X₁, X₂`
//! independent Beta(2, 2). Reported individuals (probability `p_R`) have
//! `η = 3 + X₂` and peak 1; unreported ones have `η = 8 + 4X₂` and peak
//! `α`. Each individual draws its own branch and durations.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::duration::{BetaAffine, DurationLaw, JointDurations};
use crate::error::{invalid, Result};
use crate::infectivity::{Component, InfectivityLaw, Profile};

/// Default peak position as a fraction of the infectious period.
pub const PEAK_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovidScenario {
    pub p_r: f64,
    pub alpha: f64,
    pub peak_fraction: f64,
}

impl CovidScenario {
    pub fn new(p_r: f64, alpha: f64) -> Self {
        Self {
            p_r,
            alpha,
            peak_fraction: PEAK_FRACTION,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_r) {
            return Err(invalid("p_R", format!("must lie in [0, 1], got {}", self.p_r)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid("alpha", format!("must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.peak_fraction > 0.0 && self.peak_fraction < 1.0) {
            return Err(invalid(
                "peak_fraction",
                format!("must lie in (0, 1), got {}", self.peak_fraction),
            ));
        }
        Ok(())
    }
}

fn beta22(shift: f64, scale: f64) -> Arc<dyn DurationLaw> {
    Arc::new(BetaAffine::new(2.0, 2.0, shift, scale).expect("valid Beta(2,2) parameters"))
}

fn exposed() -> Arc<dyn DurationLaw> {
    beta22(2.0, 2.0)
}

fn branch(weight: f64, amplitude: f64, eta: Arc<dyn DurationLaw>, peak: f64) -> Result<Component> {
    Ok(Component {
        weight,
        amplitude,
        profile: Profile::triangular(peak)?,
        durations: JointDurations::independent(exposed(), eta),
    })
}

/// Infectivity law of reported individuals only.
pub fn reported_law(peak_fraction: f64) -> Result<InfectivityLaw> {
    InfectivityLaw::mixture(
        "covid_reported",
        vec![branch(1.0, 1.0, beta22(3.0, 1.0), peak_fraction)?],
    )
}

/// Infectivity law of unreported individuals, with peak `alpha`.
pub fn unreported_law(alpha: f64, peak_fraction: f64) -> Result<InfectivityLaw> {
    InfectivityLaw::mixture(
        "covid_unreported",
        vec![branch(1.0, alpha, beta22(8.0, 4.0), peak_fraction)?],
    )
}

/// The mixture law of a scenario.
pub fn build_covid_law(s: &CovidScenario) -> Result<InfectivityLaw> {
    s.validate()?;
    InfectivityLaw::mixture(
        "covid",
        vec![
            branch(s.p_r, 1.0, beta22(3.0, 1.0), s.peak_fraction)?,
            branch(1.0 - s.p_r, s.alpha, beta22(8.0, 4.0), s.peak_fraction)?,
        ],
    )
}

/// `ρ = ln 2 / d`, negated for a halving time.
pub fn doubling_time_to_rho(d: f64, halving: bool) -> Result<f64> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(invalid("doubling_time", format!("must be finite and > 0, got {d}")));
    }
    let rho = std::f64::consts::LN_2 / d;
    Ok(if halving { -rho } else { rho })
}

/// `n` evenly spaced points on `[0, 1]`.
pub fn unit_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| k as f64 / (n - 1) as f64).collect(),
    }
}

/// R0 over an `(α, p_R)` grid for one growth rate.
#[derive(Debug, Clone, PartialEq)]
pub struct R0Heatmap {
    pub rho: f64,
    pub alphas: Vec<f64>,
    pub p_rs: Vec<f64>,
    /// `values[i][j]` is R0 at `p_R = p_rs[i]`, `α = alphas[j]`.
    pub values: Vec<Vec<f64>>,
}

impl R0Heatmap {
    pub fn min(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// First row: the α grid; first column: the p_R grid; body: R0, all
    /// with 6 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p_R\\alpha");
        for a in &self.alphas {
            out.push(',');
            out.push_str(&significant(*a, 6));
        }
        out.push('\n');
        for (p, row) in self.p_rs.iter().zip(&self.values) {
            out.push_str(&significant(*p, 6));
            for v in row {
                out.push(',');
                out.push_str(&significant(*v, 6));
            }
            out.push('\n');
        }
        out
    }
}

/// `x` rounded to `digits` significant digits, without trailing zeros.
pub fn significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exponent = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&exponent) {
        let s = format!("{:.*e}", digits.saturating_sub(1), x);
        return s;
    }
    let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
    let x = if exponent >= digits as i32 {
        let unit = 10f64.powi(exponent + 1 - digits as i32);
        (x / unit).round() * unit
    } else {
        x
    };
    let mut s = String::new();
    let _ = write!(s, "{x:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

/// R0 of every scenario on the grid, from the growth-rate ratio
/// `∫ḡ / ∫ḡ e^{−ρt}` with `ḡ` the scenario's mean infectivity.
///
/// Both integrals are linear in the mixture, so each cell combines four
/// numbers computed once. At `p_R = 0`, `α = 0` the ratio is `0/0`; the
/// cell takes its value along `p_R = 0`, where `ḡ ∝ α ḡ_unreported`.
pub fn r0_heatmap(rho: f64, alphas: &[f64], p_rs: &[f64]) -> Result<R0Heatmap> {
    if !rho.is_finite() {
        return Err(invalid("rho", format!("must be finite, got {rho}")));
    }
    for (name, grid) in [("alpha", alphas), ("p_R", p_rs)] {
        if let Some(v) = grid.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(name, format!("grid values must lie in [0, 1], got {v}")));
        }
    }
    let rep = reported_law(PEAK_FRACTION)?;
    let unrep = unreported_law(1.0, PEAK_FRACTION)?;
    let (n_r, d_r) = (rep.r0(), rep.laplace(rho)?);
    let (n_u, d_u) = (unrep.r0(), unrep.laplace(rho)?);
    let values = p_rs
        .par_iter()
        .map(|&p| {
            alphas
                .iter()
                .map(|&a| {
                    let num = p * n_r + (1.0 - p) * a * n_u;
                    let den = p * d_r + (1.0 - p) * a * d_u;
                    if den == 0.0 {
                        n_u / d_u
                    } else {
                        num / den
                    }
                })
                .collect()
        })
        .collect();
    Ok(R0Heatmap {
        rho,
        alphas: alphas.to_vec(),
        p_rs: p_rs.to_vec(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn r0_is_the_triangle_area_formula() {
        for (p, a) in [(0.8, 0.7), (1.0, 0.3), (0.0, 1.0), (0.35, 0.1)] {
            let law = build_covid_law(&CovidScenario::new(p, a)).unwrap();
            let want = p * 1.75 + (1.0 - p) * a * 5.0;
            assert!((law.r0() - want).abs() < 1e-12, "{p} {a}");
        }
    }

    #[test]
    fn supports_are_compact() {
        let rep = build_covid_law(&CovidScenario::new(1.0, 0.5)).unwrap();
        assert_eq!(rep.support(), 8.0);
        assert_eq!(rep.mean(8.0).unwrap(), 0.0);
        assert!(rep.mean(2.0).unwrap() == 0.0 && rep.mean(2.5).unwrap() > 0.0);
        let mix = build_covid_law(&CovidScenario::new(0.8, 0.7)).unwrap();
        assert_eq!(mix.support(), 16.0);
        for t in [16.0, 16.5, 30.0] {
            assert_eq!(mix.mean(t).unwrap(), 0.0);
        }
        assert_eq!(mix.lambda_star(), 1.0);
    }

    #[test]
    fn mixture_mean_is_the_weighted_branch_mean() {
        let mix = build_covid_law(&CovidScenario::new(0.8, 0.7)).unwrap();
        let rep = reported_law(PEAK_FRACTION).unwrap();
        let unrep = unreported_law(0.7, PEAK_FRACTION).unwrap();
        for k in 0..=170 {
            let t = k as f64 * 0.1;
            let want = 0.8 * rep.mean(t).unwrap() + 0.2 * unrep.mean(t).unwrap();
            assert!((mix.mean(t).unwrap() - want).abs() < 1e-13, "t = {t}");
        }
    }

    #[test]
    fn reported_mean_matches_monte_carlo() {
        let law = reported_law(PEAK_FRACTION).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.2).collect();
        let m = 1_000_000;
        let mut sum = vec![0.0; times.len()];
        let mut sq = vec![0.0; times.len()];
        for _ in 0..m {
            let f = law.sample(&mut rng);
            for (k, t) in times.iter().enumerate() {
                let v = f.eval(*t);
                sum[k] += v;
                sq[k] += v * v;
            }
        }
        for (k, t) in times.iter().enumerate() {
            let mean = sum[k] / m as f64;
            let var = (sq[k] / m as f64 - mean * mean).max(0.0);
            let se = (var / m as f64).sqrt().max(1e-12);
            let exact = law.mean(*t).unwrap();
            assert!((mean - exact).abs() < 3.0 * se + 1e-12, "t = {t}: {mean} vs {exact}");
        }
    }

    #[test]
    fn total_duration_cdf_matches_empirical() {
        let law = build_covid_law(&CovidScenario::new(0.8, 0.7)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = 1_000_000;
        let hits = (0..m).filter(|_| law.sample(&mut rng).end() <= 10.0).count();
        let empirical = hits as f64 / m as f64;
        assert!((law.total_cdf(10.0) - empirical).abs() < 0.005);
    }

    #[test]
    fn doubling_times() {
        assert!((doubling_time_to_rho(2.5, false).unwrap() - 0.27726).abs() < 5e-6);
        assert!((doubling_time_to_rho(11.6, true).unwrap() + 0.05976).abs() < 1e-5);
        assert!((doubling_time_to_rho(21.4, false).unwrap() - 0.03239).abs() < 5e-6);
        assert!(doubling_time_to_rho(0.0, false).is_err());
    }

    #[test]
    fn heatmap_monotonicity_and_rate_zero() {
        let grid = unit_grid(11);
        for rho in [0.277, -0.06] {
            let h = r0_heatmap(rho, &grid, &grid).unwrap();
            for i in 0..grid.len() {
                for j in 1..grid.len() {
                    // along α
                    let (a, b) = (h.values[i][j - 1], h.values[i][j]);
                    // along p_R
                    let (c, d) = (h.values[j - 1][i], h.values[j][i]);
                    if rho > 0.0 {
                        assert!(b >= a - 1e-12 && d <= c + 1e-12);
                    } else {
                        assert!(b <= a + 1e-12 && d >= c - 1e-12);
                    }
                }
            }
        }
        let flat = r0_heatmap(0.0, &grid, &grid).unwrap();
        assert!((flat.min() - 1.0).abs() < 1e-12 && (flat.max() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heatmap_csv_layout() {
        let h = r0_heatmap(0.1, &[0.0, 0.5, 1.0], &[0.25, 1.0]).unwrap();
        let csv = h.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "p_R\\alpha,0,0.5,1");
        assert!(lines[1].starts_with("0.25,"));
        assert_eq!(lines[2].split(',').count(), 4);
        assert!(r0_heatmap(0.1, &[1.5], &[0.5]).is_err());
    }

    #[test]
    fn significant_digits() {
        assert_eq!(significant(3.14159265, 6), "3.14159");
        assert_eq!(significant(0.000123456789, 6), "0.000123457");
        assert_eq!(significant(5.0, 6), "5");
        assert_eq!(significant(1234567.0, 6), "1234570");
        assert_eq!(significant(-0.5, 6), "-0.5");
    }
}
