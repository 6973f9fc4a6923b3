//! Grid tabulation of the kernels and initial-condition curves.

use rayon::prelude::*;

use super::LimitModelSpec;
use crate::duration::{DurationLaw, Kink};
use crate::infectivity::InfectivityLaw;

/// A kernel sampled at `0, dt, 2dt, …`, with its trailing zeros dropped so
/// that convolutions against compactly supported kernels stay short.
#[derive(Debug, Clone, PartialEq, Default)]
pub(crate) struct Kernel {
    values: Vec<f64>,
}

impl Kernel {
    pub(crate) fn new(mut values: Vec<f64>) -> Self {
        while values.last() == Some(&0.0) {
            values.pop();
        }
        Self { values }
    }

    #[inline]
    pub(crate) fn at(&self, j: usize) -> f64 {
        self.values.get(j).copied().unwrap_or(0.0)
    }

    pub(crate) fn len(&self) -> usize {
        self.values.len()
    }
}

/// `dt (½ k_m y_0 + Σ_{j=1}^{m−1} k_{m−j} y_j)`: the part of the trapezoid
/// convolution at `t_m` that does not involve `y_m`.
pub(crate) fn history(k: &Kernel, y: &[f64], m: usize, dt: f64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let len = k.len();
    let mut acc = 0.5 * k.at(m) * y[0];
    let lo = if m >= len { m + 1 - len } else { 1 }.max(1);
    for j in lo..m {
        acc += k.values[m - j] * y[j];
    }
    dt * acc
}

fn grid(steps: usize, dt: f64, f: impl Fn(f64) -> f64 + Sync) -> Vec<f64> {
    (0..=steps).into_par_iter().map(|k| f(k as f64 * dt)).collect()
}

fn mean_curve(law: &InfectivityLaw, steps: usize, dt: f64) -> Vec<f64> {
    grid(steps, dt, |t| law.mean_at(t))
}

/// `(G, Φ)` of one law; `Φ ≤ G` is enforced so that `Ψ = G − Φ ≥ 0`.
fn cdfs(law: &InfectivityLaw, steps: usize, dt: f64) -> (Vec<f64>, Vec<f64>) {
    let pairs: Vec<(f64, f64)> = (0..=steps)
        .into_par_iter()
        .map(|k| {
            let t = k as f64 * dt;
            let g = law.exposed_cdf(t);
            (g, law.total_cdf(t).min(g))
        })
        .collect();
    pairs.into_iter().unzip()
}

/// `P(ζ + η + M ≤ t)` with `M` independent of `(ζ, η)`.
fn cdf_with_immunity(law: &InfectivityLaw, immune: &dyn DurationLaw, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let points = immune.breakpoints();
    law.expect(
        0.0,
        &|_| {
            points
                .iter()
                .map(|b| Kink {
                    eta_coef: 1.0,
                    at: t - b,
                })
                .collect()
        },
        &mut |_, z, e| immune.cdf(t - z - e),
    )
    .unwrap_or(0.0)
    .clamp(0.0, 1.0)
}

fn complement(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| 1.0 - x).collect()
}

fn difference(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Everything a solver reads, tabulated on `0, dt, …, steps·dt`.
///
/// Which fields are filled depends on the variant; the rest stay empty.
#[derive(Debug, Clone, Default)]
pub(crate) struct Tables {
    pub(crate) dt: f64,
    pub(crate) steps: usize,
    /// `Ē(0) λ̄⁰ + Ī(0) λ̄^{0,I}`.
    pub(crate) forcing: Vec<f64>,
    pub(crate) lam: Kernel,
    pub(crate) e_kernel: Kernel,
    pub(crate) i_kernel: Kernel,
    pub(crate) r_kernel: Kernel,
    /// `1 − Φ`, so that `∫Φ(t−s) dĀ = Ā − ∫(1−Φ)(t−s) dĀ` stays a short sum.
    pub(crate) r_complement: Kernel,
    pub(crate) init_e_surv: Vec<f64>,
    pub(crate) init_e_active: Vec<f64>,
    pub(crate) init_e_done: Vec<f64>,
    pub(crate) init_i_surv: Vec<f64>,
    pub(crate) init_r_active: Vec<f64>,
}

impl Tables {
    fn base(spec: &LimitModelSpec, dt: f64, steps: usize, exposed_forcing: bool) -> Self {
        let lam = mean_curve(&spec.law, steps, dt);
        let lam0i = mean_curve(spec.law0_infectious(), steps, dt);
        let forcing = if exposed_forcing && spec.e0 > 0.0 {
            let lam0 = mean_curve(spec.law0_exposed(), steps, dt);
            lam0.iter()
                .zip(&lam0i)
                .map(|(a, b)| spec.e0 * a + spec.i0 * b)
                .collect()
        } else {
            lam0i.iter().map(|b| spec.i0 * b).collect()
        };
        Self {
            dt,
            steps,
            forcing,
            lam: Kernel::new(lam),
            ..Self::default()
        }
    }

    pub(crate) fn seir(spec: &LimitModelSpec, dt: f64, steps: usize) -> Self {
        let mut t = Self::base(spec, dt, steps, true);
        let (g, phi) = cdfs(&spec.law, steps, dt);
        t.e_kernel = Kernel::new(complement(&g));
        t.i_kernel = Kernel::new(difference(&g, &phi));
        t.r_complement = Kernel::new(complement(&phi));
        let (g0, phi0) = cdfs(spec.law0_exposed(), steps, dt);
        t.init_e_surv = complement(&g0);
        t.init_e_active = difference(&g0, &phi0);
        t.init_e_done = phi0;
        let (_, f0i) = cdfs(spec.law0_infectious(), steps, dt);
        t.init_i_surv = complement(&f0i);
        t
    }

    pub(crate) fn merged(spec: &LimitModelSpec, dt: f64, steps: usize) -> Self {
        let mut t = Self::base(spec, dt, steps, false);
        let (_, f) = cdfs(&spec.law, steps, dt);
        t.i_kernel = Kernel::new(complement(&f));
        let (_, f0) = cdfs(spec.law0_infectious(), steps, dt);
        t.init_i_surv = complement(&f0);
        t
    }

    pub(crate) fn sis(spec: &LimitModelSpec, dt: f64, steps: usize) -> Self {
        Self::merged(spec, dt, steps)
    }

    pub(crate) fn sirs(spec: &LimitModelSpec, dt: f64, steps: usize) -> Self {
        let immune = spec
            .immune
            .as_deref()
            .expect("sirs tables need an immune law");
        let mut t = Self::merged(spec, dt, steps);
        let (_, f) = cdfs(&spec.law, steps, dt);
        let back = grid(steps, dt, |x| cdf_with_immunity(&spec.law, immune, x).min(1.0));
        let back: Vec<f64> = back.iter().zip(&f).map(|(b, f)| b.min(*f)).collect();
        t.r_kernel = Kernel::new(difference(&f, &back));
        let law0 = spec.law0_infectious();
        let (_, f0) = cdfs(law0, steps, dt);
        let back0 = grid(steps, dt, |x| cdf_with_immunity(law0, immune, x));
        t.init_r_active = f0.iter().zip(&back0).map(|(f, b)| f - b.min(*f)).collect();
        t
    }
}
