//! Exact event-driven simulation of the finite-population model.
//!
//! New infections form a point process with intensity
//! `Υ(t) = S(t)/N · ℑ(t)`. Candidates are proposed at the piecewise-constant
//! rate `B = λ* · n_active · S/N` and accepted with probability `Υ/B`, so
//! paths are exact in distribution. ℑ is piecewise linear between
//! scheduled events; it is carried as a value and a slope and updated
//! whenever one of the active functions changes piece.

mod ensemble;

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{invalid, Error, Result};
use crate::infectivity::{InfectivityFunction, InfectivityLaw};
use crate::trajectory::Trajectory;

pub use ensemble::{
    percentile, replicate_rng, run_ensemble, simulate_replicates, ColumnStats, EnsembleSummary,
};

/// Grid spacing of recorded trajectories when none is given.
pub const DEFAULT_GRID_STEP: f64 = 0.1;

/// Relative slack allowed when checking `Υ ≤ B`; only roundoff in the
/// running value of ℑ can use it.
const DOMINANCE_SLACK: f64 = 1e-9;

/// ℑ is re-summed from scratch after this many piece changes; often in
/// unit tests so the re-summation itself gets exercised.
const RESUM_EVERY: usize = if cfg!(test) { 16 } else { 4096 };

/// How infected individuals are split between E and I.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Split {
    /// `E ≡ 0`; everyone with `t < τ + ζ + η` is in I.
    #[default]
    Merged,
    /// Exposed until `τ + ζ`, infectious until `τ + ζ + η`.
    Seir,
}

/// Infection ages of the individuals infected at time 0.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum InitialAges {
    /// All freshly infected at time 0.
    #[default]
    Fresh,
    /// Drawn from the stable age distribution of an epidemic growing at
    /// the given rate.
    Stationary(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub population: u64,
    pub initial_infected: u64,
    pub horizon: f64,
    pub grid_step: f64,
    pub split: Split,
    pub initial_ages: InitialAges,
    /// Stop as soon as the cumulative number of new infections reaches
    /// this count. The trajectory then ends at the last grid point before
    /// the stop.
    pub stop_at_cumulative: Option<u64>,
    /// Keep `(t, S, E, I, R, A)` after every event.
    pub record_events: bool,
}

impl SimConfig {
    pub fn new(population: u64, initial_infected: u64, horizon: f64) -> Self {
        Self {
            population,
            initial_infected,
            horizon,
            grid_step: DEFAULT_GRID_STEP,
            split: Split::Merged,
            initial_ages: InitialAges::Fresh,
            stop_at_cumulative: None,
            record_events: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population == 0 {
            return Err(invalid("population", "must be at least 1"));
        }
        if self.initial_infected == 0 || self.initial_infected >= self.population {
            return Err(invalid(
                "initial_infected",
                format!(
                    "need 0 < I0 < N, got I0 = {} with N = {}",
                    self.initial_infected, self.population
                ),
            ));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon", format!("must be finite and > 0, got {}", self.horizon)));
        }
        if !(self.grid_step > 0.0 && self.grid_step.is_finite()) {
            return Err(invalid("grid_step", format!("must be finite and > 0, got {}", self.grid_step)));
        }
        Ok(())
    }

    fn grid_len(&self) -> usize {
        (self.horizon / self.grid_step + 1e-9).floor() as usize + 1
    }
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    Horizon,
    /// The cumulative-infection threshold was reached at this time.
    Threshold(f64),
}

/// A new infection: its time and the infectivity drawn for it.
#[derive(Debug, Clone, PartialEq)]
pub struct Infection {
    pub tau: f64,
    pub lambda: InfectivityFunction,
}

/// Compartment counts right after one event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventCounts {
    pub t: f64,
    pub s: u64,
    pub e: u64,
    pub i: u64,
    pub r: u64,
    pub a: u64,
}

/// Final state of one run, with the full infection log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpidemicState {
    pub population: u64,
    /// Remaining infectivities of the individuals infected at time 0.
    pub initial: Vec<InfectivityFunction>,
    pub infections: Vec<Infection>,
    pub susceptible: u64,
    pub exposed: u64,
    pub infected: u64,
    pub removed: u64,
    /// Time of the last processed event.
    pub time: f64,
    /// First time nobody is left infected.
    pub extinct_at: Option<f64>,
    pub stop: Stop,
    pub events: Vec<EventCounts>,
}

impl EpidemicState {
    /// `A`, the number of infections after time 0.
    pub fn cumulative(&self) -> u64 {
        self.infections.len() as u64
    }

    /// ℑ(t) summed term by term over the whole log.
    pub fn force_of_infection(&self, t: f64) -> f64 {
        let initial: f64 = self.initial.iter().map(|f| f.eval(t)).sum();
        let later: f64 = self
            .infections
            .iter()
            .filter(|x| x.tau <= t)
            .map(|x| x.lambda.eval(t - x.tau))
            .sum();
        initial + later
    }

    /// Time at which `A` reaches `count`, or `+∞` if it never does.
    pub fn hitting_time(&self, count: u64) -> f64 {
        match count {
            0 => 0.0,
            k => self
                .infections
                .get(k as usize - 1)
                .map_or(f64::INFINITY, |x| x.tau),
        }
    }

    /// True if the run died out before `A` reached `N^exponent`.
    pub fn extinct_early(&self, exponent: f64) -> bool {
        self.extinct_at.is_some()
            && (self.cumulative() as f64) < (self.population as f64).powf(exponent)
    }

    /// CSV `i,tau,zeta,eta`, one row per new infection.
    pub fn event_log_csv(&self) -> String {
        let mut out = String::from("i,tau,zeta,eta\n");
        for (k, x) in self.infections.iter().enumerate() {
            let _ = writeln!(out, "{k},{},{},{}", x.tau, x.lambda.zeta(), x.lambda.eta());
        }
        out
    }
}

/// `(T_ε, T_α)`: first times with `A ≥ εN` and `A ≥ N^α`.
pub fn hitting_times(state: &EpidemicState, epsilon: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid("epsilon", format!("must lie in (0, 1), got {epsilon}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    let n = state.population as f64;
    let eps_count = (epsilon * n).ceil() as u64;
    let alpha_count = n.powf(alpha).ceil() as u64;
    Ok((state.hitting_time(eps_count), state.hitting_time(alpha_count)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    /// ℑ jumps by `jump` and its slope changes by `slope`.
    Piece { jump: f64, slope: f64 },
    /// End of the exposed period.
    Onset,
    /// End of the infection; `exposed` if it never became infectious.
    Removal { exposed: bool },
}

impl Kind {
    // on exact ties the last pieces of a removed individual go first, so
    // ℑ is exactly 0 once nobody is active
    fn rank(&self) -> u8 {
        match self {
            Kind::Piece { .. } => 0,
            Kind::Onset => 1,
            Kind::Removal { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Event {
    t: f64,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.t
            .total_cmp(&other.t)
            .then(self.kind.rank().cmp(&other.kind.rank()))
            .then(self.seq.cmp(&other.seq))
    }
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    lambda_star: f64,
    n: f64,
    queue: BinaryHeap<Reverse<Event>>,
    seq: u64,
    t: f64,
    force: f64,
    slope: f64,
    active: u64,
    pieces_since_resum: usize,
    state: EpidemicState,
    traj: Trajectory,
    next_grid: usize,
    grid_len: usize,
}

impl<'a> Engine<'a> {
    fn push(&mut self, t: f64, kind: Kind) {
        self.seq += 1;
        self.queue.push(Reverse(Event {
            t,
            seq: self.seq,
            kind,
        }));
    }

    /// Registers an individual infected at `tau` whose infectivity, counted
    /// from `tau`, is `f`.
    fn admit(&mut self, tau: f64, f: &InfectivityFunction) {
        let end = f.end();
        if end <= 0.0 {
            self.state.removed += 1;
            return;
        }
        self.active += 1;
        let exposed = self.cfg.split == Split::Seir && f.zeta() > 0.0;
        if exposed {
            self.state.exposed += 1;
            if f.eta() > 0.0 {
                self.push(tau + f.zeta(), Kind::Onset);
            }
        } else {
            self.state.infected += 1;
        }
        self.push(
            tau + end,
            Kind::Removal {
                exposed: exposed && f.eta() <= 0.0,
            },
        );
        // piece changes: value jumps and slope changes at every breakpoint
        let mut prev_value = 0.0;
        let mut prev_slope = 0.0;
        for s in f.segments() {
            let slope = s.slope();
            let jump = s.v0 - prev_value;
            let dslope = slope - prev_slope;
            if s.start == 0.0 {
                // positive from the time of infection on
                self.force += s.v0;
                self.slope += slope;
            } else if jump != 0.0 || dslope != 0.0 {
                self.push(tau + s.start, Kind::Piece { jump, slope: dslope });
            }
            prev_value = s.v1;
            prev_slope = slope;
        }
        if prev_value != 0.0 || prev_slope != 0.0 {
            self.push(
                tau + end,
                Kind::Piece {
                    jump: -prev_value,
                    slope: -prev_slope,
                },
            );
        }
    }

    fn advance(&mut self, to: f64) {
        self.force += self.slope * (to - self.t);
        self.t = to;
    }

    fn force_now(&self, at: f64) -> f64 {
        (self.force + self.slope * (at - self.t)).max(0.0)
    }

    fn record_until(&mut self, before: f64, inclusive: bool) {
        while self.next_grid < self.grid_len {
            let g = self.next_grid as f64 * self.cfg.grid_step;
            if g > before || (g == before && !inclusive) {
                break;
            }
            let s = &self.state;
            let f = if self.active == 0 { 0.0 } else { self.force_now(g) };
            self.traj.push(
                g,
                s.susceptible as f64 / self.n,
                f / self.n,
                s.exposed as f64 / self.n,
                s.infected as f64 / self.n,
                s.removed as f64 / self.n,
                s.infections.len() as f64 / self.n,
            );
            self.next_grid += 1;
        }
    }

    fn check_counts(&mut self) -> Result<()> {
        let s = &self.state;
        let total = s.susceptible + s.exposed + s.infected + s.removed;
        if total != s.population || s.susceptible + s.infections.len() as u64 + self.cfg.initial_infected != s.population {
            return Err(Error::Invariant(format!(
                "counts S={} E={} I={} R={} A={} do not add up to N={} at t={}",
                s.susceptible,
                s.exposed,
                s.infected,
                s.removed,
                s.infections.len(),
                s.population,
                self.t
            )));
        }
        if self.cfg.record_events {
            let c = EventCounts {
                t: self.t,
                s: s.susceptible,
                e: s.exposed,
                i: s.infected,
                r: s.removed,
                a: s.infections.len() as u64,
            };
            self.state.events.push(c);
        }
        Ok(())
    }

    /// Re-sums ℑ and its slope over the active individuals. Piece bounds
    /// are compared as absolute times `τ + start`, exactly as the queued
    /// events were stamped.
    fn resum(&mut self) {
        let t = self.t;
        let mut force = 0.0;
        let mut slope = 0.0;
        let mut add = |f: &InfectivityFunction, tau: f64| {
            if tau + f.end() > t {
                if let Some(s) = f.segments().iter().find(|s| tau + s.start <= t && t < tau + s.end) {
                    force += s.value_at(t - tau);
                    slope += s.slope();
                }
            }
        };
        for f in &self.state.initial {
            add(f, 0.0);
        }
        for x in &self.state.infections {
            add(&x.lambda, x.tau);
        }
        self.force = force;
        self.slope = slope;
        self.pieces_since_resum = 0;
    }

    fn process(&mut self, ev: Event) -> Result<()> {
        self.advance(ev.t);
        match ev.kind {
            Kind::Piece { jump, slope } => {
                self.force += jump;
                self.slope += slope;
                self.pieces_since_resum += 1;
                return Ok(());
            }
            Kind::Onset => {
                self.state.exposed -= 1;
                self.state.infected += 1;
            }
            Kind::Removal { exposed } => {
                if exposed {
                    self.state.exposed -= 1;
                } else {
                    self.state.infected -= 1;
                }
                self.state.removed += 1;
                self.active -= 1;
                if self.active == 0 {
                    self.force = 0.0;
                    self.slope = 0.0;
                    self.state.extinct_at.get_or_insert(ev.t);
                }
            }
        }
        self.state.time = ev.t;
        self.check_counts()
    }
}

/// One run seeded by `seed`; see [`simulate_with_rng`].
pub fn simulate(
    law: &InfectivityLaw,
    law0: &InfectivityLaw,
    cfg: &SimConfig,
    seed: u64,
) -> Result<(Trajectory, EpidemicState)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_with_rng(law, law0, cfg, &mut rng)
}

/// Simulates one path up to `cfg.horizon`. Initially infected individuals
/// draw their infectivity from `law0`, later ones from `law`.
pub fn simulate_with_rng(
    law: &InfectivityLaw,
    law0: &InfectivityLaw,
    cfg: &SimConfig,
    rng: &mut dyn RngCore,
) -> Result<(Trajectory, EpidemicState)> {
    cfg.validate()?;
    let n = cfg.population;
    let mut traj = Trajectory::with_capacity(cfg.grid_len());
    traj.population = Some(n);
    let mut engine = Engine {
        cfg,
        lambda_star: law.lambda_star().max(law0.lambda_star()),
        n: n as f64,
        queue: BinaryHeap::new(),
        seq: 0,
        t: 0.0,
        force: 0.0,
        slope: 0.0,
        active: 0,
        pieces_since_resum: 0,
        state: EpidemicState {
            population: n,
            initial: Vec::with_capacity(cfg.initial_infected as usize),
            infections: Vec::new(),
            susceptible: n - cfg.initial_infected,
            exposed: 0,
            infected: 0,
            removed: 0,
            time: 0.0,
            extinct_at: None,
            stop: Stop::Horizon,
            events: Vec::new(),
        },
        traj,
        next_grid: 0,
        grid_len: cfg.grid_len(),
    };

    for _ in 0..cfg.initial_infected {
        let f = match cfg.initial_ages {
            InitialAges::Fresh => law0.sample(rng),
            InitialAges::Stationary(rho) => law0.sample_stationary(rho, rng)?,
        };
        engine.admit(0.0, &f);
        engine.state.initial.push(f);
    }
    if engine.active == 0 {
        engine.state.extinct_at = Some(0.0);
    }
    engine.check_counts()?;

    let horizon = cfg.horizon;
    loop {
        let s = engine.state.susceptible;
        let bound = engine.lambda_star * engine.active as f64 * s as f64 / engine.n;
        let next_event = engine.queue.peek().map_or(f64::INFINITY, |e| e.0.t);
        // only between time stamps, so no queued jump is counted twice
        if engine.pieces_since_resum >= RESUM_EVERY && next_event > engine.t {
            engine.resum();
        }
        let proposal = if bound > 0.0 {
            let x: f64 = rng.sample(Exp1);
            engine.t + x / bound
        } else {
            f64::INFINITY
        };
        let next = next_event.min(proposal);
        if next > horizon {
            break;
        }
        engine.record_until(next, false);
        if next_event <= proposal {
            let Reverse(ev) = engine.queue.pop().expect("peeked event");
            engine.process(ev)?;
            continue;
        }

        engine.advance(proposal);
        let intensity = s as f64 / engine.n * engine.force.max(0.0);
        if intensity > bound * (1.0 + DOMINANCE_SLACK) + 1e-12 {
            return Err(Error::Dominance {
                t: proposal,
                intensity,
                bound,
            });
        }
        let u: f64 = rng.random();
        if u * bound >= intensity {
            continue;
        }
        let f = law.sample(rng);
        engine.state.susceptible -= 1;
        engine.admit(proposal, &f);
        engine.state.infections.push(Infection {
            tau: proposal,
            lambda: f,
        });
        engine.state.time = proposal;
        engine.check_counts()?;
        if let Some(limit) = cfg.stop_at_cumulative {
            if engine.state.cumulative() >= limit {
                engine.state.stop = Stop::Threshold(proposal);
                return Ok((engine.traj, engine.state));
            }
        }
    }
    engine.record_until(horizon, true);
    Ok((engine.traj, engine.state))
}
