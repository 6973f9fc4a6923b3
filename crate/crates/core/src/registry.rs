//! Name-keyed factories that turn configuration tables into laws.
//!
//! A descriptor is a TOML table whose `kind` key selects the factory; the
//! remaining keys are that factory's parameters and nothing else.
//!
//! ```toml
//! kind = "constant"
//! beta = 2.0
//! exposed = { kind = "deterministic", value = 0.0 }
//! infectious = { kind = "exponential", rate = 1.0 }
//! ```

use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use toml::{Table, Value};

use crate::covid::{self, CovidScenario};
use crate::duration::{BetaAffine, Deterministic, DurationLaw, Exponential, JointAtom, JointDurations};
use crate::error::{Error, Result};
use crate::infectivity::{Component, InfectivityLaw, Profile};

/// Builds one duration law from its parameters.
pub trait DurationKind: Send + Sync {
    fn name(&self) -> &'static str;
    fn build(&self, params: Table) -> Result<Arc<dyn DurationLaw>>;
}

/// Builds one infectivity law from its parameters.
pub trait LawKind: Send + Sync {
    fn name(&self) -> &'static str;
    fn build(&self, params: Table) -> Result<InfectivityLaw>;
}

struct DeterministicKind;
struct ExponentialKind;
struct BetaAffineKind;

struct ConstantKind;
struct TriangularKind;
struct MixtureKind;
struct CovidKind;

static DURATIONS: [&dyn DurationKind; 3] = [&DeterministicKind, &ExponentialKind, &BetaAffineKind];
static LAWS: [&dyn LawKind; 4] = [&ConstantKind, &TriangularKind, &MixtureKind, &CovidKind];

pub fn duration_kinds() -> &'static [&'static dyn DurationKind] {
    &DURATIONS
}

pub fn law_kinds() -> &'static [&'static dyn LawKind] {
    &LAWS
}

fn known<T: ?Sized>(items: &[&T], name: impl Fn(&T) -> &'static str) -> String {
    items.iter().map(|x| name(x)).collect::<Vec<_>>().join(", ")
}

pub fn duration_kind(name: &str) -> Result<&'static dyn DurationKind> {
    DURATIONS
        .iter()
        .find(|k| k.name() == name)
        .copied()
        .ok_or_else(|| Error::UnknownKind {
            registry: "duration",
            kind: name.to_string(),
            known: known(&DURATIONS, |k| k.name()),
        })
}

pub fn law_kind(name: &str) -> Result<&'static dyn LawKind> {
    LAWS.iter()
        .find(|k| k.name() == name)
        .copied()
        .ok_or_else(|| Error::UnknownKind {
            registry: "law",
            kind: name.to_string(),
            known: known(&LAWS, |k| k.name()),
        })
}

/// Splits `kind` off a descriptor table.
fn split_kind(value: &Value, what: &str) -> Result<(String, Table)> {
    let mut table = value.as_table().cloned().ok_or_else(|| Error::Descriptor {
        kind: what.to_string(),
        reason: "expected a table".into(),
    })?;
    match table.remove("kind") {
        Some(Value::String(kind)) => Ok((kind, table)),
        Some(_) => Err(Error::Descriptor {
            kind: what.to_string(),
            reason: "`kind` must be a string".into(),
        }),
        None => Err(Error::Descriptor {
            kind: what.to_string(),
            reason: "missing `kind`".into(),
        }),
    }
}

fn params<T: DeserializeOwned>(kind: &str, table: Table) -> Result<T> {
    T::deserialize(table).map_err(|e| Error::Descriptor {
        kind: kind.to_string(),
        reason: e.to_string(),
    })
}

/// Builds a duration law from a `{ kind = ..., ... }` table.
pub fn build_duration(value: &Value) -> Result<Arc<dyn DurationLaw>> {
    let (kind, table) = split_kind(value, "duration")?;
    duration_kind(&kind)?.build(table)
}

/// Builds an infectivity law from a `{ kind = ..., ... }` table.
pub fn build_law(value: &Value) -> Result<InfectivityLaw> {
    let (kind, table) = split_kind(value, "law")?;
    law_kind(&kind)?.build(table)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DeterministicParams {
    value: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExponentialParams {
    rate: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BetaAffineParams {
    a: f64,
    b: f64,
    #[serde(default)]
    shift: f64,
    #[serde(default = "one")]
    scale: f64,
}

fn one() -> f64 {
    1.0
}

impl DurationKind for DeterministicKind {
    fn name(&self) -> &'static str {
        "deterministic"
    }
    fn build(&self, table: Table) -> Result<Arc<dyn DurationLaw>> {
        let p: DeterministicParams = params(self.name(), table)?;
        Ok(Arc::new(Deterministic::new(p.value)?))
    }
}

impl DurationKind for ExponentialKind {
    fn name(&self) -> &'static str {
        "exponential"
    }
    fn build(&self, table: Table) -> Result<Arc<dyn DurationLaw>> {
        let p: ExponentialParams = params(self.name(), table)?;
        Ok(Arc::new(Exponential::new(p.rate)?))
    }
}

impl DurationKind for BetaAffineKind {
    fn name(&self) -> &'static str {
        "beta_affine"
    }
    fn build(&self, table: Table) -> Result<Arc<dyn DurationLaw>> {
        let p: BetaAffineParams = params(self.name(), table)?;
        Ok(Arc::new(BetaAffine::new(p.a, p.b, p.shift, p.scale)?))
    }
}

/// `(ζ, η)` given either as two independent laws or as a joint table
/// `durations = { kind = "joint_table", rows = [[ζ, η, weight], ...] }`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DurationParams {
    exposed: Option<Value>,
    infectious: Option<Value>,
    durations: Option<Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JointTableParams {
    rows: Vec<[f64; 3]>,
}

impl DurationParams {
    fn build(self) -> Result<JointDurations> {
        match (self.exposed, self.infectious, self.durations) {
            (exposed, Some(infectious), None) => {
                let exposed = match exposed {
                    Some(v) => build_duration(&v)?,
                    None => Arc::new(Deterministic::new(0.0)?),
                };
                Ok(JointDurations::independent(exposed, build_duration(&infectious)?))
            }
            (None, None, Some(joint)) => {
                let (kind, table) = split_kind(&joint, "durations")?;
                if kind != "joint_table" {
                    return Err(Error::UnknownKind {
                        registry: "joint duration",
                        kind,
                        known: "joint_table".into(),
                    });
                }
                let p: JointTableParams = params("joint_table", table)?;
                JointDurations::table(
                    p.rows
                        .into_iter()
                        .map(|[zeta, eta, weight]| JointAtom { zeta, eta, weight })
                        .collect(),
                )
            }
            _ => Err(Error::Descriptor {
                kind: "durations".into(),
                reason: "give `infectious` (and optionally `exposed`), or a `durations` joint table"
                    .into(),
            }),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantParams {
    beta: f64,
    #[serde(flatten)]
    durations: DurationParams,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TriangularParams {
    #[serde(default = "one")]
    alpha_scale: f64,
    #[serde(default = "default_peak")]
    peak_fraction: f64,
    #[serde(flatten)]
    durations: DurationParams,
}

fn default_peak() -> f64 {
    covid::PEAK_FRACTION
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MixtureParams {
    components: Vec<ComponentParams>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentParams {
    weight: f64,
    amplitude: f64,
    profile: ProfileParams,
    #[serde(flatten)]
    durations: DurationParams,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ProfileParams {
    Constant,
    Triangular { peak: f64 },
    Piecewise { knots: Vec<f64>, values: Vec<[f64; 2]> },
}

impl ProfileParams {
    fn build(self) -> Result<Profile> {
        match self {
            Self::Constant => Ok(Profile::constant()),
            Self::Triangular { peak } => Profile::triangular(peak),
            Self::Piecewise { knots, values } => {
                Profile::piecewise(knots, values.into_iter().map(|[a, b]| (a, b)).collect())
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CovidParams {
    p_r: f64,
    alpha: f64,
    #[serde(default = "default_peak")]
    peak_fraction: f64,
}

impl LawKind for ConstantKind {
    fn name(&self) -> &'static str {
        "constant"
    }
    fn build(&self, table: Table) -> Result<InfectivityLaw> {
        let p: ConstantParams = params(self.name(), table)?;
        InfectivityLaw::constant_joint(p.beta, p.durations.build()?)
    }
}

impl LawKind for TriangularKind {
    fn name(&self) -> &'static str {
        "triangular"
    }
    fn build(&self, table: Table) -> Result<InfectivityLaw> {
        let p: TriangularParams = params(self.name(), table)?;
        InfectivityLaw::triangular(p.alpha_scale, p.peak_fraction, p.durations.build()?)
    }
}

impl LawKind for MixtureKind {
    fn name(&self) -> &'static str {
        "mixture"
    }
    fn build(&self, table: Table) -> Result<InfectivityLaw> {
        let p: MixtureParams = params(self.name(), table)?;
        let components = p
            .components
            .into_iter()
            .map(|c| {
                Ok(Component {
                    weight: c.weight,
                    amplitude: c.amplitude,
                    profile: c.profile.build()?,
                    durations: c.durations.build()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        InfectivityLaw::mixture(self.name(), components)
    }
}

impl LawKind for CovidKind {
    fn name(&self) -> &'static str {
        "covid"
    }
    fn build(&self, table: Table) -> Result<InfectivityLaw> {
        let p: CovidParams = params(self.name(), table)?;
        covid::build_covid_law(&CovidScenario {
            p_r: p.p_r,
            alpha: p.alpha,
            peak_fraction: p.peak_fraction,
        })
    }
}
