//! Experiment configuration files.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use epivolt_core::covid::doubling_time_to_rho;
use epivolt_core::duration::DurationLaw;
use epivolt_core::registry::{build_duration, build_law};
use epivolt_core::sim::{InitialAges, SimConfig, Split, DEFAULT_GRID_STEP};
use epivolt_core::volterra::{self, LimitModelSpec, SolverConfig};
use epivolt_core::InfectivityLaw;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    FllnCompare,
    EarlyGrowth,
    Heatmap,
    GrowthSummary,
    SolveOnly,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Mandatory, even for deterministic experiments.
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub law: Option<toml::Value>,
    /// Law of the individuals infected at time 0; defaults to `law`.
    pub law0: Option<toml::Value>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub early: EarlySection,
    pub heatmap: Option<HeatmapSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Limit model: `seir`, `merged`, `sis` or `sirs`.
    #[serde(default = "default_variant")]
    pub variant: String,
    pub population: Option<u64>,
    /// Initially infected count; derived from `initial_infected_fraction`
    /// when absent.
    pub initial_infected: Option<u64>,
    pub initial_infected_fraction: Option<f64>,
    #[serde(default)]
    pub initial_exposed_fraction: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    /// `fresh` or `stationary`.
    #[serde(default = "default_initial_ages")]
    pub initial_ages: String,
    /// Immune period of the `sirs` variant.
    pub immune: Option<toml::Value>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            variant: default_variant(),
            population: None,
            initial_infected: None,
            initial_infected_fraction: None,
            initial_exposed_fraction: 0.0,
            horizon: default_horizon(),
            dt: default_dt(),
            grid_step: default_grid_step(),
            initial_ages: default_initial_ages(),
            immune: None,
        }
    }
}

fn default_variant() -> String {
    "merged".into()
}
fn default_horizon() -> f64 {
    100.0
}
fn default_dt() -> f64 {
    0.01
}
fn default_grid_step() -> f64 {
    DEFAULT_GRID_STEP
}
fn default_initial_ages() -> String {
    "fresh".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    #[serde(default = "default_replicates")]
    pub replicates: usize,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            replicates: default_replicates(),
        }
    }
}

fn default_replicates() -> usize {
    1000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EarlySection {
    /// Runs that die out before `A` reaches `N^extinction_exponent` are
    /// counted as extinct.
    #[serde(default = "default_extinction_exponent")]
    pub extinction_exponent: f64,
    /// The growth rate is fitted while `I(0) + A` lies in
    /// `[N^lo, N^hi]`.
    #[serde(default = "default_fit_window")]
    pub fit_window: [f64; 2],
    /// Exponent of the hitting time `T_α`.
    #[serde(default = "default_alpha")]
    pub hitting_exponent: f64,
    /// Fraction of the hitting time `T_ε`.
    #[serde(default = "default_epsilon")]
    pub hitting_fraction: f64,
    /// Susceptible fraction for the effective reproduction number.
    pub susceptible: Option<f64>,
}

impl Default for EarlySection {
    fn default() -> Self {
        Self {
            extinction_exponent: default_extinction_exponent(),
            fit_window: default_fit_window(),
            hitting_exponent: default_alpha(),
            hitting_fraction: default_epsilon(),
            susceptible: None,
        }
    }
}

fn default_extinction_exponent() -> f64 {
    0.25
}
fn default_fit_window() -> [f64; 2] {
    [0.3, 0.7]
}
fn default_alpha() -> f64 {
    0.5
}
fn default_epsilon() -> f64 {
    0.1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatmapSection {
    pub rho: Option<f64>,
    pub doubling_time: Option<f64>,
    pub halving_time: Option<f64>,
    /// Points per axis on `[0, 1]`.
    #[serde(default = "default_heatmap_points")]
    pub points: usize,
}

fn default_heatmap_points() -> usize {
    101
}

impl HeatmapSection {
    pub fn rho(&self) -> Result<f64> {
        match (self.rho, self.doubling_time, self.halving_time) {
            (Some(rho), None, None) => Ok(rho),
            (None, Some(d), None) => Ok(doubling_time_to_rho(d, false)?),
            (None, None, Some(h)) => Ok(doubling_time_to_rho(h, true)?),
            _ => bail!("heatmap: give exactly one of `rho`, `doubling_time`, `halving_time`"),
        }
    }
}

/// A configuration with its laws built and every field checked.
pub struct Validated {
    pub raw: ExperimentConfig,
    pub law: Option<Arc<InfectivityLaw>>,
    pub law0: Option<Arc<InfectivityLaw>>,
    pub immune: Option<Arc<dyn DurationLaw>>,
}

/// 1-based line of the first line that assigns `key`, for diagnostics.
fn line_of(src: &str, key: &str) -> Option<usize> {
    src.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
            || l == format!("[{key}]")
    })
    .map(|k| k + 1)
}

fn at(src: &str, key: &str, msg: impl std::fmt::Display) -> anyhow::Error {
    match line_of(src, key) {
        Some(line) => anyhow!("line {line}: `{key}`: {msg}"),
        None => anyhow!("`{key}`: {msg}"),
    }
}

pub fn load(path: &Path) -> Result<Validated> {
    let src = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    parse(&src).with_context(|| format!("invalid configuration {}", path.display()))
}

pub fn parse(src: &str) -> Result<Validated> {
    // toml reports the line and column of syntax errors, unknown keys and
    // missing fields such as `seed`
    let raw: ExperimentConfig = toml::from_str(src).map_err(|e| anyhow!("{e}"))?;
    validate(src, raw)
}

fn validate(src: &str, raw: ExperimentConfig) -> Result<Validated> {
    let law = raw
        .law
        .as_ref()
        .map(|v| build_law(v).map(Arc::new).map_err(|e| at(src, "law", e)))
        .transpose()?;
    let law0 = raw
        .law0
        .as_ref()
        .map(|v| build_law(v).map(Arc::new).map_err(|e| at(src, "law0", e)))
        .transpose()?;
    let immune = raw
        .model
        .immune
        .as_ref()
        .map(|v| build_duration(v).map_err(|e| at(src, "immune", e)))
        .transpose()?;
    let m = &raw.model;
    let needs_law = raw.experiment != Experiment::Heatmap;
    if needs_law && law.is_none() {
        return Err(at(src, "experiment", "this experiment needs a [law] table"));
    }
    match raw.experiment {
        Experiment::FllnCompare | Experiment::SolveOnly => {
            let model = volterra::model(&m.variant).map_err(|e| at(src, "variant", e))?;
            if raw.experiment == Experiment::FllnCompare && !matches!(model.name(), "merged" | "seir") {
                return Err(at(src, "variant", "flln_compare compares `merged` or `seir` runs"));
            }
            let i0 = initial_fraction(src, m)?;
            let e0 = m.initial_exposed_fraction;
            if !(e0 >= 0.0 && i0 > 0.0 && e0 + i0 < 1.0) {
                return Err(at(
                    src,
                    "initial_infected_fraction",
                    format!(
                        "need Ē(0) >= 0, Ī(0) > 0 and Ē(0) + Ī(0) < 1 so that some \
                         susceptibles remain; got Ē(0) = {e0}, Ī(0) = {i0}"
                    ),
                ));
            }
            SolverConfig::new(m.dt, m.horizon)
                .validate()
                .map_err(|e| at(src, "dt", e))?;
        }
        Experiment::Heatmap => {
            let h = raw
                .heatmap
                .as_ref()
                .ok_or_else(|| at(src, "experiment", "heatmap needs a [heatmap] table"))?;
            h.rho().map_err(|e| at(src, "heatmap", e))?;
            if h.points < 2 {
                return Err(at(src, "points", "need at least 2 points per axis"));
            }
        }
        Experiment::GrowthSummary => {
            if let Some(s) = raw.early.susceptible {
                if !(0.0..=1.0).contains(&s) {
                    return Err(at(src, "susceptible", "must lie in [0, 1]"));
                }
            }
        }
        Experiment::EarlyGrowth => {}
    }
    match raw.experiment {
        Experiment::FllnCompare | Experiment::EarlyGrowth => {
            let n = m.population.ok_or_else(|| at(src, "model", "`population` is required"))?;
            if n < 2 {
                return Err(at(src, "population", "must be at least 2"));
            }
            if raw.ensemble.replicates == 0 {
                return Err(at(src, "replicates", "must be at least 1"));
            }
            if !(m.horizon > 0.0 && m.horizon.is_finite()) {
                return Err(at(src, "horizon", "must be finite and > 0"));
            }
            if !(m.grid_step > 0.0 && m.grid_step <= m.horizon) {
                return Err(at(src, "grid_step", "must lie in (0, horizon]"));
            }
            if m.initial_exposed_fraction != 0.0 {
                return Err(at(
                    src,
                    "initial_exposed_fraction",
                    "stochastic runs start from infected individuals drawn from `law0`",
                ));
            }
            initial_count(src, m, n)?;
            parse_ages(src, &m.initial_ages)?;
        }
        _ => {}
    }
    let e = &raw.early;
    if !(e.extinction_exponent > 0.0 && e.extinction_exponent < 1.0) {
        return Err(at(src, "extinction_exponent", "must lie in (0, 1)"));
    }
    if !(0.0 < e.fit_window[0] && e.fit_window[0] < e.fit_window[1] && e.fit_window[1] <= 1.0) {
        return Err(at(src, "fit_window", "need 0 < lo < hi <= 1"));
    }
    if !(e.hitting_exponent > 0.0 && e.hitting_exponent < 1.0) {
        return Err(at(src, "hitting_exponent", "must lie in (0, 1)"));
    }
    if !(e.hitting_fraction > 0.0 && e.hitting_fraction < 1.0) {
        return Err(at(src, "hitting_fraction", "must lie in (0, 1)"));
    }
    Ok(Validated {
        raw,
        law,
        law0,
        immune,
    })
}

fn initial_fraction(src: &str, m: &ModelSection) -> Result<f64> {
    match (m.initial_infected_fraction, m.initial_infected, m.population) {
        (Some(f), _, _) => Ok(f),
        (None, Some(i0), Some(n)) if n > 0 => Ok(i0 as f64 / n as f64),
        _ => Err(at(src, "model", "give `initial_infected_fraction`")),
    }
}

fn initial_count(src: &str, m: &ModelSection, n: u64) -> Result<u64> {
    let i0 = match (m.initial_infected, m.initial_infected_fraction) {
        (Some(i0), None) => i0,
        (None, Some(f)) => (f * n as f64).round() as u64,
        (Some(_), Some(_)) => {
            return Err(at(
                src,
                "initial_infected",
                "give either `initial_infected` or `initial_infected_fraction`, not both",
            ))
        }
        (None, None) => return Err(at(src, "model", "`initial_infected` is required")),
    };
    if i0 == 0 || i0 >= n {
        return Err(at(
            src,
            "initial_infected",
            format!("need 0 < I(0) < N, got I(0) = {i0} with N = {n}"),
        ));
    }
    Ok(i0)
}

fn parse_ages(src: &str, s: &str) -> Result<bool> {
    match s {
        "fresh" => Ok(false),
        "stationary" => Ok(true),
        other => Err(at(
            src,
            "initial_ages",
            format!("unknown value `{other}` (known: fresh, stationary)"),
        )),
    }
}

impl Validated {
    pub fn law(&self) -> &Arc<InfectivityLaw> {
        self.law.as_ref().expect("validated: law present")
    }

    pub fn law0(&self) -> &Arc<InfectivityLaw> {
        self.law0.as_ref().unwrap_or_else(|| self.law())
    }

    /// Stochastic run settings; `rho` is needed for stationary ages.
    pub fn sim_config(&self, rho: impl FnOnce() -> Result<f64>) -> Result<SimConfig> {
        let m = &self.raw.model;
        let n = m.population.expect("validated: population present");
        let mut cfg = SimConfig::new(n, initial_count("", m, n)?, m.horizon);
        cfg.grid_step = m.grid_step;
        cfg.split = if m.variant == "seir" { Split::Seir } else { Split::Merged };
        if parse_ages("", &m.initial_ages)? {
            cfg.initial_ages = InitialAges::Stationary(rho()?);
        }
        Ok(cfg)
    }

    pub fn limit_spec(&self) -> Result<LimitModelSpec> {
        let m = &self.raw.model;
        let mut spec = LimitModelSpec::new(
            self.law().clone(),
            m.initial_exposed_fraction,
            initial_fraction("", m)?,
        );
        if let Some(law0) = &self.law0 {
            spec = spec
                .with_initial_exposed(law0.clone())
                .with_initial_infectious(law0.clone());
        }
        if let Some(immune) = &self.immune {
            spec = spec.with_immune_period(immune.clone());
        }
        Ok(spec)
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig::new(self.raw.model.dt, self.raw.model.horizon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLLN: &str = r#"
experiment = "flln_compare"
seed = 1

[law]
kind = "covid"
p_r = 0.8
alpha = 0.7

[model]
population = 10000
initial_infected_fraction = 0.05

[ensemble]
replicates = 10
"#;

    #[test]
    fn accepts_a_valid_config() {
        let v = parse(FLLN).unwrap();
        assert_eq!(v.raw.experiment, Experiment::FllnCompare);
        let cfg = v.sim_config(|| unreachable!()).unwrap();
        assert_eq!(cfg.initial_infected, 500);
        assert_eq!(v.limit_spec().unwrap().i0, 0.05);
    }

    #[test]
    fn rejects_a_bound_violation_with_its_line() {
        let src = FLLN.replace("initial_infected_fraction = 0.05", "initial_infected_fraction = 1.2");
        let err = format!("{:#}", parse(&src).err().unwrap());
        assert!(err.contains("line 12"), "{err}");
        assert!(err.contains("Ē(0) + Ī(0) < 1"), "{err}");
    }

    #[test]
    fn requires_a_seed() {
        let src = FLLN.replace("seed = 1\n", "");
        let err = format!("{:#}", parse(&src).err().unwrap());
        assert!(err.contains("seed"), "{err}");
    }

    #[test]
    fn rejects_unknown_keys() {
        let src = FLLN.replace("replicates = 10", "replicates = 10\nthreads = 4");
        let err = format!("{:#}", parse(&src).err().unwrap());
        assert!(err.contains("threads") && err.contains("line"), "{err}");
        let src = FLLN.replace("alpha = 0.7", "alpha = 0.7\ngamma = 1.0");
        assert!(parse(&src).is_err());
    }

    #[test]
    fn heatmap_needs_one_rate() {
        let src = "experiment = \"heatmap\"\nseed = 0\n[heatmap]\ndoubling_time = 2.5\n";
        let v = parse(src).unwrap();
        assert!((v.raw.heatmap.as_ref().unwrap().rho().unwrap() - 0.277).abs() < 1e-3);
        let both = "experiment = \"heatmap\"\nseed = 0\n[heatmap]\nrho = 0.1\nhalving_time = 2.0\n";
        assert!(parse(both).is_err());
    }
}
