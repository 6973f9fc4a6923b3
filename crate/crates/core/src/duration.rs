//! Laws of the exposed period ζ and the infectious period η.
//!
//! Every law can be sampled and can compute expectations `E[f(X)]` by
//! Gauss–Legendre quadrature against its density, split at caller-supplied
//! cut points where `f` has kinks or jumps. Point masses are evaluated
//! exactly.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::Distribution;
use statrs::distribution::{Continuous, ContinuousCDF};

use crate::error::{invalid, Error, Result};
use crate::quadrature::panel_rule;

/// `e^{-TAIL_LOG}` is the probability mass discarded when integrating over an
/// unbounded support.
const TAIL_LOG: f64 = 42.0;

pub trait DurationLaw: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn sample(&self, rng: &mut dyn RngCore) -> f64;

    fn cdf(&self, t: f64) -> f64;

    fn mean(&self) -> f64;

    /// Location of the point mass, for degenerate laws.
    fn atom(&self) -> Option<f64> {
        None
    }

    /// Density with respect to Lebesgue measure (unused when `atom` is set).
    fn density(&self, x: f64) -> f64;

    /// Closed support `[lo, hi]`; `hi` may be infinite.
    fn support(&self) -> (f64, f64);

    /// Supremum of the `c` for which `E[e^{cX}]` is finite.
    fn exp_moment_bound(&self) -> f64 {
        f64::INFINITY
    }

    /// Number of quadrature panels spanning the integration range.
    fn panels(&self) -> usize {
        1
    }

    /// Finite range carrying all but a negligible part of `E[|f(X)|]` when
    /// `f` grows at most like `e^{growth x}`; `None` when that expectation
    /// diverges.
    fn integration_range(&self, growth: f64) -> Option<(f64, f64)> {
        let (lo, hi) = self.support();
        if hi.is_finite() {
            return Some((lo, hi));
        }
        let bound = self.exp_moment_bound();
        if growth >= bound {
            return None;
        }
        Some((lo, lo + TAIL_LOG / (bound - growth.max(0.0))))
    }

    /// Points where the law itself is not smooth: the atom, or the finite
    /// ends of the support.
    fn breakpoints(&self) -> Vec<f64> {
        if let Some(a) = self.atom() {
            return vec![a];
        }
        let (lo, hi) = self.support();
        if hi.is_finite() {
            vec![lo, hi]
        } else {
            vec![lo]
        }
    }
}

/// `E[f(X)]`, failing when the integrand's growth makes it diverge.
pub fn expect(
    law: &dyn DurationLaw,
    growth: f64,
    cuts: &[f64],
    f: &mut dyn FnMut(f64) -> f64,
) -> Result<f64> {
    if let Some(a) = law.atom() {
        return Ok(f(a));
    }
    let range = law.integration_range(growth).ok_or_else(|| {
        Error::Divergent(format!(
            "E[exp({growth} X)] is infinite for the {} law",
            law.name()
        ))
    })?;
    Ok(expect_in(law, range, cuts, f))
}

/// Like [`expect`] with a precomputed integration range.
pub(crate) fn expect_in(
    law: &dyn DurationLaw,
    (lo, hi): (f64, f64),
    cuts: &[f64],
    f: &mut dyn FnMut(f64) -> f64,
) -> f64 {
    if let Some(a) = law.atom() {
        return f(a);
    }
    let mut points: Vec<f64> = Vec::with_capacity(cuts.len() + 2);
    points.push(lo);
    points.extend(cuts.iter().copied().filter(|c| *c > lo && *c < hi));
    points.push(hi);
    points.sort_by(f64::total_cmp);
    let panel_width = (hi - lo) / law.panels() as f64;
    let rule = panel_rule();
    let mut total = 0.0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let pieces = ((b - a) / panel_width).ceil().max(1.0) as usize;
        let h = (b - a) / pieces as f64;
        for k in 0..pieces {
            let (pa, pb) = (a + k as f64 * h, a + (k + 1) as f64 * h);
            for (x, wt) in rule.mapped(pa, pb) {
                let d = law.density(x);
                if d != 0.0 {
                    total += wt * d * f(x);
                }
            }
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deterministic {
    value: f64,
}

impl Deterministic {
    pub fn new(value: f64) -> Result<Self> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(invalid("value", format!("must be finite and >= 0, got {value}")));
        }
        Ok(Self { value })
    }
}

impl DurationLaw for Deterministic {
    fn name(&self) -> &'static str {
        "deterministic"
    }
    fn sample(&self, _rng: &mut dyn RngCore) -> f64 {
        self.value
    }
    fn cdf(&self, t: f64) -> f64 {
        if t >= self.value {
            1.0
        } else {
            0.0
        }
    }
    fn mean(&self) -> f64 {
        self.value
    }
    fn atom(&self) -> Option<f64> {
        Some(self.value)
    }
    fn density(&self, _x: f64) -> f64 {
        0.0
    }
    fn support(&self) -> (f64, f64) {
        (self.value, self.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponential {
    rate: f64,
}

impl Exponential {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(invalid("rate", format!("must be finite and > 0, got {rate}")));
        }
        Ok(Self { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

impl DurationLaw for Exponential {
    fn name(&self) -> &'static str {
        "exponential"
    }
    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        // 1 - U lies in (0, 1]
        let u: f64 = rng.random();
        -(1.0 - u).ln() / self.rate
    }
    fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            -(-self.rate * t).exp_m1()
        }
    }
    fn mean(&self) -> f64 {
        1.0 / self.rate
    }
    fn density(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else {
            self.rate * (-self.rate * x).exp()
        }
    }
    fn support(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
    fn exp_moment_bound(&self) -> f64 {
        self.rate
    }
    fn panels(&self) -> usize {
        12
    }
}

/// `shift + scale * B` with `B ~ Beta(a, b)`.
#[derive(Debug, Clone)]
pub struct BetaAffine {
    a: f64,
    b: f64,
    shift: f64,
    scale: f64,
    sampler: rand_distr::Beta<f64>,
    dist: statrs::distribution::Beta,
}

impl BetaAffine {
    pub fn new(a: f64, b: f64, shift: f64, scale: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(invalid("a", format!("must be > 0, got {a}")));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(invalid("b", format!("must be > 0, got {b}")));
        }
        if !(shift.is_finite() && shift >= 0.0) {
            return Err(invalid("shift", format!("must be >= 0, got {shift}")));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(invalid("scale", format!("must be > 0, got {scale}")));
        }
        let sampler = rand_distr::Beta::new(a, b).map_err(|e| invalid("a", e.to_string()))?;
        let dist =
            statrs::distribution::Beta::new(a, b).map_err(|e| invalid("a", e.to_string()))?;
        Ok(Self {
            a,
            b,
            shift,
            scale,
            sampler,
            dist,
        })
    }

    pub fn params(&self) -> (f64, f64, f64, f64) {
        (self.a, self.b, self.shift, self.scale)
    }
}

impl DurationLaw for BetaAffine {
    fn name(&self) -> &'static str {
        "beta_affine"
    }
    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        self.shift + self.scale * self.sampler.sample(rng)
    }
    fn cdf(&self, t: f64) -> f64 {
        let x = (t - self.shift) / self.scale;
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            self.dist.cdf(x)
        }
    }
    fn mean(&self) -> f64 {
        self.shift + self.scale * self.a / (self.a + self.b)
    }
    fn density(&self, x: f64) -> f64 {
        let u = (x - self.shift) / self.scale;
        if u <= 0.0 || u >= 1.0 {
            0.0
        } else {
            self.dist.pdf(u) / self.scale
        }
    }
    fn support(&self) -> (f64, f64) {
        (self.shift, self.shift + self.scale)
    }
}

/// A kink of an integrand over `(ζ, η)` along the line `ζ + eta_coef·η = at`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kink {
    pub eta_coef: f64,
    pub at: f64,
}

/// One row of a joint duration table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointAtom {
    pub zeta: f64,
    pub eta: f64,
    pub weight: f64,
}

/// Joint law of `(ζ, η)`.
#[derive(Debug, Clone)]
pub enum JointDurations {
    Independent {
        zeta: Arc<dyn DurationLaw>,
        eta: Arc<dyn DurationLaw>,
    },
    /// A finite joint law; weights are normalized on construction.
    Table(Vec<JointAtom>),
}

impl JointDurations {
    pub fn independent(zeta: Arc<dyn DurationLaw>, eta: Arc<dyn DurationLaw>) -> Self {
        Self::Independent { zeta, eta }
    }

    pub fn table(rows: Vec<JointAtom>) -> Result<Self> {
        if rows.is_empty() {
            return Err(invalid("joint_table", "needs at least one row"));
        }
        let mut total = 0.0;
        for r in &rows {
            if !(r.zeta.is_finite() && r.zeta >= 0.0 && r.eta.is_finite() && r.eta >= 0.0) {
                return Err(invalid("joint_table", "durations must be finite and >= 0"));
            }
            if !(r.weight.is_finite() && r.weight >= 0.0) {
                return Err(invalid("joint_table", "weights must be finite and >= 0"));
            }
            total += r.weight;
        }
        if total <= 0.0 {
            return Err(invalid("joint_table", "weights sum to zero"));
        }
        Ok(Self::Table(
            rows.into_iter()
                .map(|r| JointAtom {
                    weight: r.weight / total,
                    ..r
                })
                .collect(),
        ))
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> (f64, f64) {
        match self {
            Self::Independent { zeta, eta } => (zeta.sample(rng), eta.sample(rng)),
            Self::Table(rows) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for r in rows {
                    acc += r.weight;
                    if u < acc {
                        return (r.zeta, r.eta);
                    }
                }
                let last = rows[rows.len() - 1];
                (last.zeta, last.eta)
            }
        }
    }

    /// `P(ζ <= t)`.
    pub fn zeta_cdf(&self, t: f64) -> f64 {
        match self {
            Self::Independent { zeta, .. } => zeta.cdf(t),
            Self::Table(rows) => rows.iter().filter(|r| r.zeta <= t).map(|r| r.weight).sum(),
        }
    }

    pub fn mean_zeta(&self) -> f64 {
        match self {
            Self::Independent { zeta, .. } => zeta.mean(),
            Self::Table(rows) => rows.iter().map(|r| r.weight * r.zeta).sum(),
        }
    }

    pub fn mean_eta(&self) -> f64 {
        match self {
            Self::Independent { eta, .. } => eta.mean(),
            Self::Table(rows) => rows.iter().map(|r| r.weight * r.eta).sum(),
        }
    }

    /// Upper end of the support of `ζ + η` (may be infinite).
    pub fn max_total(&self) -> f64 {
        match self {
            Self::Independent { zeta, eta } => zeta.support().1 + eta.support().1,
            Self::Table(rows) => rows
                .iter()
                .filter(|r| r.weight > 0.0)
                .map(|r| r.zeta + r.eta)
                .fold(0.0, f64::max),
        }
    }

    /// Upper end of the support of `ζ`.
    pub fn max_zeta(&self) -> f64 {
        match self {
            Self::Independent { zeta, .. } => zeta.support().1,
            Self::Table(rows) => rows
                .iter()
                .filter(|r| r.weight > 0.0)
                .map(|r| r.zeta)
                .fold(0.0, f64::max),
        }
    }

    /// `E[f(ζ, η)]` where `f` may grow like `e^{growth (ζ + η)}` and is
    /// smooth away from the supplied kink lines.
    pub fn expect(
        &self,
        growth: f64,
        kinks: &[Kink],
        f: &mut dyn FnMut(f64, f64) -> f64,
    ) -> Result<f64> {
        match self {
            Self::Table(rows) => Ok(rows.iter().map(|r| r.weight * f(r.zeta, r.eta)).sum()),
            Self::Independent { zeta, eta } => {
                let divergent = |law: &dyn DurationLaw| {
                    Error::Divergent(format!(
                        "E[exp({growth} X)] is infinite for the {} law",
                        law.name()
                    ))
                };
                let zeta_range = if zeta.atom().is_some() {
                    (0.0, 0.0)
                } else {
                    zeta.integration_range(growth)
                        .ok_or_else(|| divergent(zeta.as_ref()))?
                };
                let eta_range = if eta.atom().is_some() {
                    (0.0, 0.0)
                } else {
                    eta.integration_range(growth)
                        .ok_or_else(|| divergent(eta.as_ref()))?
                };
                let eta_points = eta.breakpoints();
                let mut zeta_cuts = Vec::with_capacity(kinks.len() * 2);
                for k in kinks {
                    if k.eta_coef == 0.0 {
                        zeta_cuts.push(k.at);
                    } else {
                        zeta_cuts.extend(eta_points.iter().map(|b| k.at - k.eta_coef * b));
                    }
                }
                let mut eta_cuts = Vec::with_capacity(kinks.len());
                let mut outer = |z: f64| {
                    eta_cuts.clear();
                    eta_cuts.extend(
                        kinks
                            .iter()
                            .filter(|k| k.eta_coef > 0.0)
                            .map(|k| (k.at - z) / k.eta_coef),
                    );
                    expect_in(eta.as_ref(), eta_range, &eta_cuts, &mut |e| f(z, e))
                };
                Ok(expect_in(zeta.as_ref(), zeta_range, &zeta_cuts, &mut outer))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exponential_expectations_match_closed_forms() {
        let law = Exponential::new(1.5).unwrap();
        let m = expect(&law, 0.0, &[], &mut |x| x).unwrap();
        assert!((m - 1.0 / 1.5).abs() < 1e-13);
        // E[1{X <= 2}] with a cut at the jump
        let p = expect(&law, 0.0, &[2.0], &mut |x| if x <= 2.0 { 1.0 } else { 0.0 }).unwrap();
        assert!((p - law.cdf(2.0)).abs() < 1e-13);
        // E[e^{X}] = 1.5 / 0.5
        let g = expect(&law, 1.0, &[], &mut f64::exp).unwrap();
        assert!((g - 3.0).abs() < 1e-9, "{g}");
        assert!(expect(&law, 1.5, &[], &mut f64::exp).is_err());
    }

    #[test]
    fn beta_affine_moments() {
        let law = BetaAffine::new(2.0, 2.0, 3.0, 1.0).unwrap();
        let m = expect(&law, 0.0, &[], &mut |x| x).unwrap();
        assert!((m - 3.5).abs() < 1e-13);
        // Beta(2,2): cdf 3x^2 - 2x^3
        assert!((law.cdf(3.25) - (3.0 * 0.0625 - 2.0 * 0.015625)).abs() < 1e-12);
        assert_eq!(law.cdf(2.0), 0.0);
        assert_eq!(law.cdf(5.0), 1.0);
    }

    #[test]
    fn samples_stay_in_support() {
        let law = BetaAffine::new(2.0, 2.0, 8.0, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let x = law.sample(&mut rng);
            assert!((8.0..=12.0).contains(&x));
        }
    }

    #[test]
    fn joint_independent_expectation_of_sum() {
        let j = JointDurations::independent(
            Arc::new(Exponential::new(1.0).unwrap()),
            Arc::new(BetaAffine::new(2.0, 2.0, 3.0, 1.0).unwrap()),
        );
        let p = j
            .expect(0.0, &[Kink { eta_coef: 1.0, at: 5.0 }], &mut |z, e| {
                if z + e <= 5.0 {
                    1.0
                } else {
                    0.0
                }
            })
            .unwrap();
        // P(Z + E <= 5) = E[1 - exp(-(5 - E))] for E in [3, 4]
        let direct = expect(
            &BetaAffine::new(2.0, 2.0, 3.0, 1.0).unwrap(),
            0.0,
            &[],
            &mut |e| 1.0 - (-(5.0 - e)).exp(),
        )
        .unwrap();
        assert!((p - direct).abs() < 1e-12, "{p} vs {direct}");
    }

    #[test]
    fn table_normalizes_and_rejects_bad_rows() {
        let j = JointDurations::table(vec![
            JointAtom { zeta: 1.0, eta: 2.0, weight: 1.0 },
            JointAtom { zeta: 0.0, eta: 4.0, weight: 3.0 },
        ])
        .unwrap();
        assert!((j.mean_eta() - 3.5).abs() < 1e-15);
        assert!((j.zeta_cdf(0.5) - 0.75).abs() < 1e-15);
        assert_eq!(j.max_total(), 4.0);
        assert!(JointDurations::table(vec![]).is_err());
        assert!(JointDurations::table(vec![JointAtom { zeta: -1.0, eta: 1.0, weight: 1.0 }]).is_err());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(Exponential::new(0.0).is_err());
        assert!(Deterministic::new(-1.0).is_err());
        assert!(BetaAffine::new(2.0, 2.0, 0.0, 0.0).is_err());
    }
}
