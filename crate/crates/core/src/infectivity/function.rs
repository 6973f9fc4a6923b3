use crate::error::{invalid, Result};

/// One linear piece `[start, end)` of an infectivity function, running from
/// `v0` (right limit at `start`) to `v1` (left limit at `end`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub v0: f64,
    pub v1: f64,
}

impl Segment {
    pub fn slope(&self) -> f64 {
        (self.v1 - self.v0) / (self.end - self.start)
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t < self.end
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.v0 + (self.v1 - self.v0) * ((t - self.start) / (self.end - self.start))
    }

    pub fn integral(&self) -> f64 {
        0.5 * (self.v0 + self.v1) * (self.end - self.start)
    }

    /// `∫_{max(start, from)}^{end} v(t) e^{-ρ t} dt`.
    pub fn laplace_from(&self, rho: f64, from: f64) -> f64 {
        let a = self.start.max(from);
        if a >= self.end {
            return 0.0;
        }
        let va = if a == self.start { self.v0 } else { self.value_at(a) };
        let slope = self.slope();
        if va == 0.0 && slope == 0.0 {
            return 0.0;
        }
        let len = self.end - a;
        let (e0, e1) = exp_moments(rho, len);
        (-rho * a).exp() * (va * e0 + slope * e1)
    }
}

/// `(∫_0^L e^{-ρu} du, ∫_0^L u e^{-ρu} du)`, accurate for small `ρL`.
pub(crate) fn exp_moments(rho: f64, len: f64) -> (f64, f64) {
    let x = rho * len;
    if x.abs() < 0.5 {
        // series in -x: L Σ (-x)^k/(k+1)!  and  L² Σ (-x)^k/(k!(k+2))
        let mut term = 1.0;
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        for k in 0..40 {
            let kf = k as f64;
            s0 += term / (kf + 1.0);
            s1 += term / (kf + 2.0);
            term *= -x / (kf + 1.0);
            if term.abs() < 1e-18 {
                break;
            }
        }
        (len * s0, len * len * s1)
    } else {
        let e0 = -(-x).exp_m1() / rho;
        let e1 = (e0 - len * (-x).exp()) / rho;
        (e0, e1)
    }
}

/// Shape of an infectivity function on the normalized infectious window
/// `[0, 1]`: a realization with exposed period ζ, infectious period η and
/// amplitude `a` is `λ(t) = a · h((t − ζ)/η)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    knots: Vec<f64>,
    values: Vec<(f64, f64)>,
}

impl Profile {
    /// `h ≡ 1` on `[0, 1)`.
    pub fn constant() -> Self {
        Self {
            knots: vec![0.0, 1.0],
            values: vec![(1.0, 1.0)],
        }
    }

    /// Rises linearly from 0 to 1 on `[0, peak]`, then falls back to 0 at 1.
    pub fn triangular(peak: f64) -> Result<Self> {
        if !(peak > 0.0 && peak < 1.0) {
            return Err(invalid("peak_fraction", format!("must lie in (0, 1), got {peak}")));
        }
        Ok(Self {
            knots: vec![0.0, peak, 1.0],
            values: vec![(0.0, 1.0), (1.0, 0.0)],
        })
    }

    /// General piecewise-linear profile. `knots` run from 0 to 1; segment
    /// `j` goes from `values[j].0` to `values[j].1`. The profile must be
    /// strictly positive on the open interval `(0, 1)`.
    pub fn piecewise(knots: Vec<f64>, values: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 || values.len() + 1 != knots.len() {
            return Err(invalid("profile", "needs k+1 knots for k segments"));
        }
        if knots[0] != 0.0 || knots[knots.len() - 1] != 1.0 {
            return Err(invalid("profile", "knots must start at 0 and end at 1"));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("profile", "knots must be strictly increasing"));
        }
        let last = values.len() - 1;
        for (j, &(a, b)) in values.iter().enumerate() {
            if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0) {
                return Err(invalid("profile", "values must be finite and >= 0"));
            }
            let a_ok = a > 0.0 || j == 0;
            let b_ok = b > 0.0 || j == last;
            if !(a_ok && b_ok) || (a == 0.0 && b == 0.0) {
                return Err(invalid(
                    "profile",
                    "profile must be positive strictly inside the infectious window",
                ));
            }
        }
        Ok(Self { knots, values })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().map(|(a, b)| a.max(*b)).fold(0.0, f64::max)
    }

    /// `∫_0^1 h(x) dx`.
    pub fn area(&self) -> f64 {
        self.knots
            .windows(2)
            .zip(&self.values)
            .map(|(k, (a, b))| 0.5 * (a + b) * (k[1] - k[0]))
            .sum()
    }

    /// Segments of the realization `a · h((t − ζ)/η)`.
    pub fn segments(
        &self,
        amplitude: f64,
        zeta: f64,
        eta: f64,
    ) -> impl Iterator<Item = Segment> + '_ {
        self.knots
            .windows(2)
            .zip(&self.values)
            .map(move |(k, (a, b))| Segment {
                start: zeta + k[0] * eta,
                end: zeta + k[1] * eta,
                v0: amplitude * a,
                v1: amplitude * b,
            })
            .filter(|s| s.end > s.start)
    }

    /// Value of the realization at time `t` without materializing it.
    pub fn value(&self, amplitude: f64, zeta: f64, eta: f64, t: f64) -> f64 {
        if t < zeta || t >= zeta + eta || eta <= 0.0 {
            return 0.0;
        }
        let x = (t - zeta) / eta;
        for (k, (a, b)) in self.knots.windows(2).zip(&self.values) {
            if x < k[1] {
                return amplitude * (a + (b - a) * (x - k[0]) / (k[1] - k[0]));
            }
        }
        0.0
    }

    /// `∫_from^∞ a · h((t − ζ)/η) e^{-ρt} dt`.
    pub fn laplace_from(&self, amplitude: f64, zeta: f64, eta: f64, rho: f64, from: f64) -> f64 {
        self.segments(amplitude, zeta, eta)
            .map(|s| s.laplace_from(rho, from))
            .sum()
    }
}

/// One realized infectivity trajectory `λ(·)` as a function of the time
/// since infection.
#[derive(Debug, Clone, PartialEq)]
pub struct InfectivityFunction {
    segments: Vec<Segment>,
    zeta: f64,
    eta: f64,
}

impl InfectivityFunction {
    pub fn from_profile(profile: &Profile, amplitude: f64, zeta: f64, eta: f64) -> Self {
        Self {
            segments: profile.segments(amplitude, zeta, eta).collect(),
            zeta,
            eta,
        }
    }

    /// Builds a function from explicit contiguous segments.
    pub fn from_segments(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Ok(Self::zero());
        }
        for s in &segments {
            if !(s.end > s.start && s.start >= 0.0 && s.v0 >= 0.0 && s.v1 >= 0.0) {
                return Err(invalid("segments", "each segment needs 0 <= start < end and values >= 0"));
            }
        }
        if segments.windows(2).any(|w| w[1].start != w[0].end) {
            return Err(invalid("segments", "segments must be contiguous"));
        }
        let zeta = segments[0].start;
        let eta = segments[segments.len() - 1].end - zeta;
        Ok(Self {
            segments,
            zeta,
            eta,
        })
    }

    /// The identically zero function.
    pub fn zero() -> Self {
        Self {
            segments: Vec::new(),
            zeta: 0.0,
            eta: 0.0,
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Time of first positivity.
    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// Length of the positivity window.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `ζ + η`, after which the function vanishes.
    pub fn end(&self) -> f64 {
        self.zeta + self.eta
    }

    /// `ξ⁰ = 0 ≤ ξ¹ ≤ … ≤ ξ^k`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        for s in &self.segments {
            if *out.last().unwrap() != s.start {
                out.push(s.start);
            }
            out.push(s.end);
        }
        out
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.segments
            .iter()
            .find(|s| s.contains(t))
            .map_or(0.0, |s| s.value_at(t))
    }

    pub fn sup(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.v0.max(s.v1))
            .fold(0.0, f64::max)
    }

    /// `∫_0^∞ λ(t) dt`.
    pub fn integral(&self) -> f64 {
        self.segments.iter().map(Segment::integral).sum()
    }

    /// `∫_from^∞ λ(t) e^{-ρt} dt`.
    pub fn laplace_from(&self, rho: f64, from: f64) -> f64 {
        self.segments.iter().map(|s| s.laplace_from(rho, from)).sum()
    }

    /// `t ↦ λ(age + t)`: the remaining infectivity of an individual
    /// infected `age` time units ago.
    pub fn shifted(&self, age: f64) -> Self {
        let segments: Vec<Segment> = self
            .segments
            .iter()
            .filter(|s| s.end > age)
            .map(|s| {
                let start = (s.start - age).max(0.0);
                let v0 = if s.start >= age { s.v0 } else { s.value_at(age) };
                Segment {
                    start,
                    end: s.end - age,
                    v0,
                    v1: s.v1,
                }
            })
            .filter(|s| s.end > s.start)
            .collect();
        if segments.is_empty() {
            return Self::zero();
        }
        let zeta = (self.zeta - age).max(0.0);
        let eta = segments[segments.len() - 1].end - zeta;
        Self {
            segments,
            zeta,
            eta,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri(alpha: f64, zeta: f64, eta: f64) -> InfectivityFunction {
        InfectivityFunction::from_profile(&Profile::triangular(0.2).unwrap(), alpha, zeta, eta)
    }

    #[test]
    fn triangular_profile_values() {
        let f = tri(1.0, 2.0, 5.0);
        assert!((f.eval(3.0) - 1.0).abs() < 1e-15);
        assert_eq!(f.eval(7.0), 0.0);
        assert!((f.eval(5.0) - 0.5).abs() < 1e-15);
        assert_eq!(f.eval(2.0), 0.0);
        assert_eq!(f.eval(1.9), 0.0);
        assert!((f.integral() - 2.5).abs() < 1e-15);
        assert_eq!(f.breakpoints(), vec![0.0, 2.0, 3.0, 7.0]);
    }

    #[test]
    fn scaled_triangle_peaks_at_alpha() {
        let f = tri(0.7, 2.0, 10.0);
        assert!((f.eval(4.0) - 0.7).abs() < 1e-15);
        assert!((f.sup() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn constant_profile_is_right_continuous() {
        let f = InfectivityFunction::from_profile(&Profile::constant(), 2.0, 1.0, 1.0);
        assert_eq!(f.eval(0.999), 0.0);
        assert_eq!(f.eval(1.0), 2.0);
        assert_eq!(f.eval(1.999), 2.0);
        assert_eq!(f.eval(2.0), 0.0);
        assert_eq!(f.zeta(), 1.0);
        assert_eq!(f.eta(), 1.0);
    }

    #[test]
    fn zero_duration_function_vanishes() {
        let f = InfectivityFunction::from_profile(&Profile::constant(), 1.0, 0.0, 0.0);
        assert!(f.segments().is_empty());
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.integral(), 0.0);
    }

    #[test]
    fn laplace_matches_fine_quadrature() {
        let f = tri(1.0, 2.0, 5.0);
        for rho in [-0.3, 0.0, 1e-9, 0.277, 2.0] {
            let h = 1e-4;
            let direct: f64 = (0..80_000)
                .map(|i| {
                    let t = (i as f64 + 0.5) * h;
                    f.eval(t) * (-rho * t).exp()
                })
                .sum::<f64>()
                * h;
            let got = f.laplace_from(rho, 0.0);
            assert!((got - direct).abs() < 1e-7 * direct.abs().max(1.0), "rho={rho}: {got} vs {direct}");
        }
        assert!((f.laplace_from(0.0, 0.0) - f.integral()).abs() < 1e-14);
    }

    #[test]
    fn exp_moments_series_and_closed_form_agree() {
        for rho in [0.49, 0.51, -0.49, -0.51] {
            let (a0, a1) = exp_moments(rho, 1.0);
            let e0 = -(-rho as f64).exp_m1() / rho;
            let e1 = (e0 - (-rho as f64).exp()) / rho;
            assert!((a0 - e0).abs() < 1e-14 && (a1 - e1).abs() < 1e-13);
        }
    }

    #[test]
    fn shifted_function_keeps_remaining_mass() {
        let f = tri(1.0, 2.0, 5.0);
        let g = f.shifted(2.5);
        assert!((g.eval(0.0) - f.eval(2.5)).abs() < 1e-15);
        assert!((g.eval(1.5) - f.eval(4.0)).abs() < 1e-15);
        assert_eq!(g.zeta(), 0.0);
        assert!((g.end() - 4.5).abs() < 1e-15);
        assert!(f.shifted(8.0).segments().is_empty());
        let h = f.shifted(1.0);
        assert_eq!(h.zeta(), 1.0);
        assert!((h.integral() - f.integral()).abs() < 1e-15);
    }

    #[test]
    fn piecewise_profile_validation() {
        assert!(Profile::piecewise(vec![0.0, 0.5, 1.0], vec![(1.0, 0.0), (0.0, 1.0)]).is_err());
        assert!(Profile::piecewise(vec![0.0, 1.0], vec![(0.0, 0.0)]).is_err());
        let p = Profile::piecewise(vec![0.0, 0.5, 1.0], vec![(2.0, 1.0), (1.0, 0.5)]).unwrap();
        assert!((p.area() - (0.75 + 0.375)).abs() < 1e-15);
        assert!(Profile::triangular(1.0).is_err());
    }
}
