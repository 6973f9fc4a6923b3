use std::sync::Arc;

use rand::{Rng, RngCore};

use super::function::{exp_moments, InfectivityFunction, Profile};
use crate::duration::{DurationLaw, JointDurations, Kink};
use crate::error::{invalid, Error, Result};

/// Tail mass ignored when locating the end of an unbounded support.
const SUPPORT_TAIL: f64 = 1e-8;

/// One branch of a mixture law: with probability `weight` an individual's
/// infectivity is `amplitude · h((t − ζ)/η)` with `(ζ, η)` drawn from
/// `durations`.
#[derive(Debug, Clone)]
pub struct Component {
    pub weight: f64,
    pub amplitude: f64,
    pub profile: Profile,
    pub durations: JointDurations,
}

impl Component {
    fn kinks_at(&self, t: f64) -> Vec<Kink> {
        self.profile
            .knots()
            .iter()
            .map(|&x| Kink { eta_coef: x, at: t })
            .collect()
    }

    fn area(&self) -> f64 {
        self.amplitude * self.profile.area()
    }
}

/// Law of the random infectivity function `λ(·)`.
///
/// Means, duration c.d.f.s and Laplace transforms are computed by
/// quadrature over the duration law of each component, using the closed
/// form of each piecewise-linear realization.
#[derive(Debug, Clone)]
pub struct InfectivityLaw {
    kind: String,
    components: Vec<Component>,
    lambda_star: f64,
    support: f64,
}

impl InfectivityLaw {
    /// A finite mixture. Weights are normalized; zero-weight branches are
    /// dropped.
    pub fn mixture(kind: impl Into<String>, components: Vec<Component>) -> Result<Self> {
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if components.is_empty() || !(total > 0.0 && total.is_finite()) {
            return Err(invalid("components", "need at least one component with positive weight"));
        }
        for c in &components {
            if !(c.weight >= 0.0 && c.weight.is_finite()) {
                return Err(invalid("weight", format!("must be finite and >= 0, got {}", c.weight)));
            }
            if !(c.amplitude >= 0.0 && c.amplitude.is_finite()) {
                return Err(invalid(
                    "amplitude",
                    format!("must be finite and >= 0, got {}", c.amplitude),
                ));
            }
        }
        let components: Vec<Component> = components
            .into_iter()
            .filter(|c| c.weight > 0.0)
            .map(|c| Component {
                weight: c.weight / total,
                ..c
            })
            .collect();
        let lambda_star = components
            .iter()
            .map(|c| c.amplitude * c.profile.peak())
            .fold(0.0, f64::max);
        let mut law = Self {
            kind: kind.into(),
            components,
            lambda_star,
            support: 0.0,
        };
        law.support = law.locate_support()?;
        Ok(law)
    }

    /// `λ(t) = β 1{ζ ≤ t < ζ+η}` with independent exposed and infectious
    /// periods.
    pub fn constant(
        beta: f64,
        exposed: Arc<dyn DurationLaw>,
        infectious: Arc<dyn DurationLaw>,
    ) -> Result<Self> {
        Self::constant_joint(beta, JointDurations::independent(exposed, infectious))
    }

    pub fn constant_joint(beta: f64, durations: JointDurations) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid("beta", format!("must be finite and > 0, got {beta}")));
        }
        Self::mixture(
            "constant",
            vec![Component {
                weight: 1.0,
                amplitude: beta,
                profile: Profile::constant(),
                durations,
            }],
        )
    }

    /// Rises linearly from 0 at ζ to `alpha_scale` at `ζ + peak_fraction·η`
    /// and falls back to 0 at `ζ + η`.
    pub fn triangular(
        alpha_scale: f64,
        peak_fraction: f64,
        durations: JointDurations,
    ) -> Result<Self> {
        if !(alpha_scale > 0.0 && alpha_scale <= 1.0) {
            return Err(invalid(
                "alpha_scale",
                format!("must lie in (0, 1], got {alpha_scale}"),
            ));
        }
        Self::mixture(
            "triangular",
            vec![Component {
                weight: 1.0,
                amplitude: alpha_scale,
                profile: Profile::triangular(peak_fraction)?,
                durations,
            }],
        )
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Almost-sure upper bound of every sampled function.
    pub fn lambda_star(&self) -> f64 {
        self.lambda_star
    }

    /// Time beyond which the mean infectivity vanishes (or, for unbounded
    /// durations, carries less than 1e-8 of the duration mass).
    pub fn support(&self) -> f64 {
        self.support
    }

    pub fn is_compact(&self) -> bool {
        self.components
            .iter()
            .all(|c| c.durations.max_total().is_finite())
    }

    fn locate_support(&self) -> Result<f64> {
        let max_total = self
            .components
            .iter()
            .map(|c| c.durations.max_total())
            .fold(0.0, f64::max);
        if max_total.is_finite() {
            return Ok(max_total);
        }
        let mut hi = 1.0;
        while 1.0 - self.total_cdf(hi) > SUPPORT_TAIL {
            hi *= 2.0;
            if hi > 1e9 {
                return Err(Error::Divergent("duration law has no finite 1-1e-8 quantile".into()));
            }
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if 1.0 - self.total_cdf(mid) > SUPPORT_TAIL {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    fn pick(&self, rng: &mut dyn RngCore) -> &Component {
        if self.components.len() == 1 {
            return &self.components[0];
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                return c;
            }
        }
        &self.components[self.components.len() - 1]
    }

    /// Draws one infectivity function.
    pub fn sample(&self, rng: &mut dyn RngCore) -> InfectivityFunction {
        let c = self.pick(rng);
        let (zeta, eta) = c.durations.sample(rng);
        InfectivityFunction::from_profile(&c.profile, c.amplitude, zeta, eta)
    }

    /// Draws the remaining infectivity of an individual taken from the
    /// stable infection-age distribution of an epidemic growing at rate
    /// `rho`: the age has density proportional to `F^c(a) e^{-ρa}`.
    pub fn sample_stationary(&self, rho: f64, rng: &mut dyn RngCore) -> Result<InfectivityFunction> {
        let weight = |d: f64| exp_moments(rho, d).0;
        let w_max = if rho > 0.0 {
            1.0 / rho
        } else if self.is_compact() {
            weight(self.support)
        } else {
            return Err(invalid(
                "initial_profile",
                "stationary ages need rho > 0 or compactly supported durations",
            ));
        };
        for _ in 0..1_000_000 {
            let f = self.sample(rng);
            let d = f.end();
            if d <= 0.0 {
                continue;
            }
            let u: f64 = rng.random();
            if u * w_max >= weight(d) {
                continue;
            }
            let v: f64 = rng.random();
            let age = if rho.abs() * d < 1e-12 {
                v * d
            } else {
                -(v * (-rho * d).exp_m1()).ln_1p() / rho
            };
            return Ok(f.shifted(age.min(d)));
        }
        Err(Error::Invariant(
            "stationary-age sampler rejected 10^6 proposals".into(),
        ))
    }

    /// `E[f(ζ, η)]` summed over components with their weights.
    pub fn expect(
        &self,
        growth: f64,
        kinks: &dyn Fn(&Component) -> Vec<Kink>,
        f: &mut dyn FnMut(&Component, f64, f64) -> f64,
    ) -> Result<f64> {
        let mut total = 0.0;
        for c in &self.components {
            let ks = kinks(c);
            total += c.weight * c.durations.expect(growth, &ks, &mut |z, e| f(c, z, e))?;
        }
        Ok(total)
    }

    /// `λ̄(t) = E[λ(t)]`.
    pub fn mean(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain {
                what: "time",
                reason: format!("mean infectivity needs t >= 0, got {t}"),
            });
        }
        Ok(self.mean_at(t))
    }

    pub(crate) fn mean_at(&self, t: f64) -> f64 {
        if t >= self.support && self.is_compact() {
            return 0.0;
        }
        self.expect(0.0, &|c| c.kinks_at(t), &mut |c, z, e| {
            c.profile.value(c.amplitude, z, e, t)
        })
        .unwrap_or(0.0)
    }

    /// `G(t) = P(ζ ≤ t)`.
    pub fn exposed_cdf(&self, t: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * c.durations.zeta_cdf(t))
            .sum()
    }

    /// `Φ(t) = P(ζ + η ≤ t)`.
    pub fn total_cdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        if self.support > 0.0 && t >= self.support && self.is_compact() {
            return 1.0;
        }
        let kink = [Kink { eta_coef: 1.0, at: t }];
        self.expect(0.0, &|_| kink.to_vec(), &mut |_, z, e| {
            if z + e <= t {
                1.0
            } else {
                0.0
            }
        })
        .unwrap_or(0.0)
        .clamp(0.0, 1.0)
    }

    /// `Ψ(t) = P(ζ ≤ t < ζ + η) = G(t) − Φ(t)`.
    pub fn active_probability(&self, t: f64) -> f64 {
        (self.exposed_cdf(t) - self.total_cdf(t)).max(0.0)
    }

    /// `R0 = ∫ λ̄(t) dt = E[∫ λ(t) dt]`.
    pub fn r0(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * c.area() * c.durations.mean_eta())
            .sum()
    }

    /// `E[ζ + η]`.
    pub fn mean_total_duration(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * (c.durations.mean_zeta() + c.durations.mean_eta()))
            .sum()
    }

    /// `m(ρ) = ∫ λ̄(t) e^{-ρt} dt`.
    pub fn laplace(&self, rho: f64) -> Result<f64> {
        self.expect((-rho).max(0.0), &|_| Vec::new(), &mut |c, z, e| {
            c.profile.laplace_from(c.amplitude, z, e, rho, 0.0)
        })
    }

    /// `∫_t^∞ λ̄(u) e^{-ρu} du`.
    pub fn laplace_tail(&self, rho: f64, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return self.laplace(rho);
        }
        self.expect((-rho).max(0.0), &|c| c.kinks_at(t), &mut |c, z, e| {
            c.profile.laplace_from(c.amplitude, z, e, rho, t)
        })
    }

    /// `∫_t^∞ F^c(u) e^{-ρu} du` where `F` is the c.d.f. of `ζ + η`.
    pub fn survival_laplace_tail(&self, rho: f64, t: f64) -> Result<f64> {
        let t = t.max(0.0);
        let kink = [Kink { eta_coef: 1.0, at: t }];
        self.expect((-rho).max(0.0), &|_| kink.to_vec(), &mut |_, z, e| {
            let d = z + e;
            if d <= t {
                0.0
            } else {
                (-rho * t).exp() * exp_moments(rho, d - t).0
            }
        })
    }

    /// `E[exp(−(1−s) ∫λ)]`: generating function of the offspring count of
    /// one individual in a fully susceptible population.
    pub fn offspring_pgf(&self, s: f64) -> f64 {
        let c1 = 1.0 - s;
        self.expect(0.0, &|_| Vec::new(), &mut |c, _, e| (-c1 * c.area() * e).exp())
            .unwrap_or(f64::NAN)
    }
}
