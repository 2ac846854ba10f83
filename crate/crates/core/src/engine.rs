//! Round loop: mobility, consumption, range decision, charging, battery
//! update and metric collection, plus seeded repetitions and averaging.

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charging::{execute_charging_round, AgentRoundInput, ChargeEvent, ChargerState, RangeBounds};
use crate::energy::{apply_round_energy, assign_groups, sample_consumption, Battery, ConsumptionProfile};
use crate::geom::{Point, Segment};
use crate::mobility::{
    initial_deploy, step, update_speed_mode, Area, Constraint, MobilityError, MobilityScenario, SpeedMode,
};
use crate::policies::{AgentObservation, Policy, PolicyError, PolicySpec, RoundView};
use crate::SimRng;

/// Default efficiency constant of the received-energy law.
pub const DEFAULT_ALPHA: f64 = 50.0;
/// Default distance offset of the received-energy law.
pub const DEFAULT_BETA: f64 = 1.0;

const WORLD_STREAM: u64 = 0x776f_726c_645f_7273; // "world_rs"
const DECISION_STREAM: u64 = 0x6465_6369_6465_7273; // "deciders"

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of repetition `rep`: `splitmix64(master ^ splitmix64(rep))`.
pub fn repetition_seed(master_seed: u64, rep: u32) -> u64 {
    splitmix64(master_seed ^ splitmix64(u64::from(rep)))
}

/// Stream driving mobility, consumption and scenario draws. Shared by every
/// policy run on the same repetition.
pub fn world_rng(master_seed: u64, rep: u32) -> SimRng {
    SimRng::seed_from_u64(splitmix64(repetition_seed(master_seed, rep) ^ WORLD_STREAM))
}

/// Stream reserved for the policy's own randomness.
pub fn decision_rng(master_seed: u64, rep: u32) -> SimRng {
    SimRng::seed_from_u64(splitmix64(repetition_seed(master_seed, rep) ^ DECISION_STREAM))
}

/// Scenario as configured; unspecified parameters are drawn per repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioSpec {
    Free,
    /// Radius drawn uniformly from `[R_min, R_max / 2]` when absent.
    ForbiddenCircle {
        #[serde(default)]
        radius: Option<f64>,
    },
    /// Count drawn from `1..=n/10`, inner radius from
    /// `[R_min, (R_min + R_max)/4)`, outer from `[(R_min + R_max)/4, R_max]`.
    RingDwellers {
        #[serde(default)]
        inner: Option<f64>,
        #[serde(default)]
        outer: Option<f64>,
        #[serde(default)]
        count: Option<usize>,
    },
    /// Picks free / forbidden circle / ring dwellers per repetition with
    /// the given relative weights, each with randomly drawn parameters.
    Mixture {
        #[serde(default = "equal_weights")]
        weights: [f64; 3],
    },
}

fn equal_weights() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec::Free
    }
}

impl ScenarioSpec {
    pub fn resolve<R: Rng + ?Sized>(&self, n: usize, bounds: RangeBounds, rng: &mut R) -> MobilityScenario {
        match *self {
            ScenarioSpec::Free => MobilityScenario::Free,
            ScenarioSpec::ForbiddenCircle { radius } => MobilityScenario::ForbiddenCircle {
                radius: radius.unwrap_or_else(|| uniform(rng, bounds.min, (bounds.max / 2.0).max(bounds.min))),
            },
            ScenarioSpec::RingDwellers { inner, outer, count } => {
                let split = (bounds.min + bounds.max) / 4.0;
                let count = count.unwrap_or_else(|| {
                    let top = (n / 10).max(1).min(n);
                    rng.random_range(1..=top)
                });
                let inner = inner.unwrap_or_else(|| {
                    if split > bounds.min {
                        rng.random_range(bounds.min..split)
                    } else {
                        bounds.min
                    }
                });
                let outer = outer.unwrap_or_else(|| uniform(rng, split.max(inner), bounds.max));
                MobilityScenario::RingDwellers { inner, outer, count }
            }
            ScenarioSpec::Mixture { weights } => {
                let total: f64 = weights.iter().sum();
                let u = rng.random::<f64>() * total;
                let pick = if u < weights[0] {
                    ScenarioSpec::Free
                } else if u < weights[0] + weights[1] {
                    ScenarioSpec::ForbiddenCircle { radius: None }
                } else {
                    ScenarioSpec::RingDwellers {
                        inner: None,
                        outer: None,
                        count: None,
                    }
                };
                pick.resolve(n, bounds, rng)
            }
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// A policy plus whether it runs against an unlimited charger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    #[serde(flatten)]
    pub spec: PolicySpec,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub infinite_energy: bool,
}

impl PolicyEntry {
    pub fn finite(spec: PolicySpec) -> Self {
        PolicyEntry {
            spec,
            infinite_energy: false,
        }
    }

    pub fn label(&self) -> String {
        let base = self.spec.label();
        if self.infinite_energy {
            format!("{base}+inf")
        } else {
            base
        }
    }
}

/// Full declarative description of an experiment. Everything except `n`
/// defaults to the reference setup (25x25 area, C = 1e5, B = 1000,
/// v_max = 3, ranges in [1, 5], mode redraw probability 1/4).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    #[serde(default)]
    pub area: Area,
    #[serde(default = "one")]
    pub tau: f64,
    #[serde(default = "default_horizon")]
    pub horizon: u32,
    #[serde(default = "default_battery")]
    pub battery_capacity: f64,
    #[serde(default = "default_charger_energy")]
    pub charger_energy: f64,
    #[serde(default)]
    pub infinite_energy: bool,
    #[serde(default = "default_v_max")]
    pub v_max: f64,
    #[serde(default = "one")]
    pub r_min: f64,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_p_redraw")]
    pub p_mode_redraw: f64,
    #[serde(default)]
    pub scenario: ScenarioSpec,
    /// Policy for single-policy runs; fixed `R_max` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicyEntry>,
    /// Policies for comparisons.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub policies: Vec<PolicyEntry>,
    #[serde(default = "default_reps")]
    pub repetitions: u32,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    /// Bucket width of the per-agent charge-count histogram.
    #[serde(default = "default_hist_width")]
    pub histogram_bucket: u32,
}

fn one() -> f64 {
    1.0
}
fn default_horizon() -> u32 {
    500
}
fn default_battery() -> f64 {
    1000.0
}
fn default_charger_energy() -> f64 {
    1e5
}
fn default_v_max() -> f64 {
    3.0
}
fn default_r_max() -> f64 {
    5.0
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_beta() -> f64 {
    DEFAULT_BETA
}
fn default_p_redraw() -> f64 {
    0.25
}
fn default_reps() -> u32 {
    100
}
fn default_seed() -> u64 {
    1
}
fn default_hist_width() -> u32 {
    10
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: `{field}` {reason}")]
    Field { field: &'static str, reason: String },
    #[error("invalid policy: {0}")]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
}

fn field(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field,
        reason: reason.into(),
    }
}

impl ScenarioConfig {
    /// Reference setup with `n` agents and every other field at its default.
    pub fn reference(n: usize) -> Self {
        serde_json::from_value(serde_json::json!({ "n": n })).expect("defaults are valid")
    }

    pub fn from_json_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn bounds(&self) -> RangeBounds {
        RangeBounds {
            min: self.r_min,
            max: self.r_max,
        }
    }

    pub fn charger_position(&self) -> Point {
        self.area.center()
    }

    /// The single-run policy, defaulting to fixed maximum range.
    pub fn primary_policy(&self) -> PolicyEntry {
        self.policy
            .clone()
            .unwrap_or_else(|| PolicyEntry::finite(PolicySpec::Fixed { range: self.r_max }))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(field(name, format!("must be positive and finite (got {v})")))
            }
        };
        if self.n == 0 {
            return Err(field("n", "must be at least 1"));
        }
        positive("area.x_max", self.area.x_max)?;
        positive("area.y_max", self.area.y_max)?;
        positive("tau", self.tau)?;
        positive("battery_capacity", self.battery_capacity)?;
        positive("v_max", self.v_max)?;
        positive("r_max", self.r_max)?;
        positive("alpha", self.alpha)?;
        if self.horizon == 0 {
            return Err(field("horizon", "must be at least 1"));
        }
        if !(self.charger_energy >= 0.0 && self.charger_energy.is_finite()) {
            return Err(field("charger_energy", "must be finite and >= 0"));
        }
        if !(self.r_min >= 0.0 && self.r_min <= self.r_max) {
            return Err(field("r_min", "must satisfy 0 <= r_min <= r_max"));
        }
        if !(self.beta >= 0.0) {
            return Err(field("beta", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.p_mode_redraw) {
            return Err(field("p_mode_redraw", "must lie in [0, 1]"));
        }
        if self.repetitions == 0 {
            return Err(field("repetitions", "must be at least 1"));
        }
        if self.histogram_bucket == 0 {
            return Err(field("histogram_bucket", "must be at least 1"));
        }
        if let ScenarioSpec::Mixture { weights } = &self.scenario {
            if weights.iter().any(|w| !(*w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
                return Err(field("scenario.weights", "must be non-negative with a positive sum"));
            }
        }
        for entry in self.policy.iter().chain(&self.policies) {
            entry.spec.validate(self.bounds(), self.n)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub id: usize,
    pub position: Point,
    pub next_position: Point,
    pub mode: SpeedMode,
    pub velocity: f64,
    pub direction: f64,
    pub battery: Battery,
    pub profile: ConsumptionProfile,
    pub consumption: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: u32,
    pub range_used: f64,
    /// Charger energy after this round's charging.
    pub charger_energy: f64,
    pub charges_this_round: u32,
    pub charges_cumulative: u64,
    pub working_agents: u32,
    pub adequate_agents: u32,
    pub alive_agents: u32,
    /// Positive requests refused for lack of budget.
    pub skipped_requests: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub policy: String,
    pub repetition: u32,
    pub scenario: MobilityScenario,
    pub trace: Vec<RoundMetrics>,
    /// Number of rounds in which each agent was recharged.
    pub charge_counts: Vec<u32>,
    /// Last round with at least one working agent (0 if none).
    pub lifetime: u32,
    /// First round in which a request was refused or the budget hit zero.
    pub depletion_round: Option<u32>,
    pub initial_charger_energy: f64,
    pub total_delivered: f64,
}

impl RunResult {
    pub fn total_charges(&self) -> u64 {
        self.trace.last().map_or(0, |m| m.charges_cumulative)
    }

    pub fn final_charger_energy(&self) -> f64 {
        self.trace.last().map_or(self.initial_charger_energy, |m| m.charger_energy)
    }

    /// Depletion round, with `horizon + 1` standing in for "never".
    pub fn depletion_or_horizon(&self) -> u32 {
        self.depletion_round.unwrap_or(self.trace.len() as u32 + 1)
    }
}

/// One simulation run, advanced a round at a time.
pub struct Simulation {
    cfg: ScenarioConfig,
    label: String,
    repetition: u32,
    scenario: MobilityScenario,
    constraints: Vec<Constraint>,
    agents: Vec<AgentState>,
    charger: ChargerState,
    policy: Box<dyn Policy>,
    world: SimRng,
    decisions: SimRng,
    round: u32,
    charge_counts: Vec<u32>,
    charges_cumulative: u64,
    total_delivered: f64,
    depletion_round: Option<u32>,
    last_events: Vec<ChargeEvent>,
    last_delivered: Vec<f64>,
    trace: Vec<RoundMetrics>,
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig, entry: &PolicyEntry, repetition: u32) -> Result<Self, ConfigError> {
        cfg.validate()?;
        entry.spec.validate(cfg.bounds(), cfg.n)?;

        let mut world = world_rng(cfg.master_seed, repetition);
        let decisions = decision_rng(cfg.master_seed, repetition);
        let scenario = cfg.scenario.resolve(cfg.n, cfg.bounds(), &mut world);
        let profiles = assign_groups(cfg.n, &mut world);
        let positions = initial_deploy(cfg.n, &cfg.area, &scenario, &mut world)?;
        let center = cfg.charger_position();
        let constraints = (0..cfg.n).map(|id| scenario.constraint_for(id, center)).collect();
        let agents = positions
            .into_iter()
            .zip(profiles)
            .enumerate()
            .map(|(id, (position, profile))| AgentState {
                id,
                position,
                next_position: position,
                mode: SpeedMode::random(&mut world),
                velocity: 0.0,
                direction: 0.0,
                battery: Battery::full(cfg.battery_capacity),
                profile,
                consumption: 0.0,
            })
            .collect();
        let charger = ChargerState {
            position: center,
            energy: cfg.charger_energy,
            range: cfg.r_max,
            bounds: cfg.bounds(),
            alpha: cfg.alpha,
            beta: cfg.beta,
            infinite_energy: cfg.infinite_energy || entry.infinite_energy,
        };

        Ok(Simulation {
            cfg: cfg.clone(),
            label: entry.label(),
            repetition,
            scenario,
            constraints,
            agents,
            charger,
            policy: entry.spec.build(cfg.bounds()),
            world,
            decisions,
            round: 0,
            charge_counts: vec![0; cfg.n],
            charges_cumulative: 0,
            total_delivered: 0.0,
            depletion_round: None,
            last_events: Vec::new(),
            last_delivered: vec![0.0; cfg.n],
            trace: Vec::with_capacity(cfg.horizon as usize),
        })
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn charger(&self) -> &ChargerState {
        &self.charger
    }

    pub fn scenario(&self) -> &MobilityScenario {
        &self.scenario
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn is_finished(&self) -> bool {
        self.round >= self.cfg.horizon
    }

    pub fn last_events(&self) -> &[ChargeEvent] {
        &self.last_events
    }

    pub fn last_delivered(&self) -> &[f64] {
        &self.last_delivered
    }

    pub fn total_delivered(&self) -> f64 {
        self.total_delivered
    }

    /// Metrics of every round played so far.
    pub fn trace(&self) -> &[RoundMetrics] {
        &self.trace
    }

    fn full_view(&self) -> RoundView {
        RoundView {
            round: self.round,
            agents: self
                .agents
                .iter()
                .map(|a| AgentObservation {
                    id: a.id,
                    position: a.position,
                    next_position: Some(a.next_position),
                    velocity: Some(a.velocity),
                    energy: Some(a.battery.level),
                    consumption: Some(a.consumption),
                })
                .collect(),
            charger: self.charger.clone(),
            battery_capacity: self.cfg.battery_capacity,
            tau: self.cfg.tau,
        }
    }

    /// Advances one round and returns its metrics.
    pub fn step(&mut self) -> RoundMetrics {
        self.round += 1;
        let round = self.round;
        let cfg = &self.cfg;

        for agent in &mut self.agents {
            if round > 1 {
                agent.mode = update_speed_mode(agent.mode, cfg.p_mode_redraw, &mut self.world);
            }
            let s = step(
                agent.position,
                agent.mode,
                cfg.v_max,
                cfg.tau,
                &cfg.area,
                &self.constraints[agent.id],
                &mut self.world,
            );
            agent.next_position = s.next;
            agent.velocity = s.velocity;
            agent.direction = s.direction;
        }
        for agent in &mut self.agents {
            agent.consumption = sample_consumption(&agent.profile, &mut self.world);
        }

        let view = self.full_view().restricted(self.policy.knowledge());
        let range = cfg.bounds().clamp(self.policy.decide(&view, &mut self.decisions));
        self.charger.range = range;

        let inputs: Vec<AgentRoundInput> = self
            .agents
            .iter()
            .map(|a| AgentRoundInput {
                id: a.id,
                trajectory: Segment::new(a.position, a.next_position),
                velocity: a.velocity,
                battery: a.battery,
                consumed: a.consumption,
            })
            .collect();
        let outcome = execute_charging_round(&mut self.charger, &inputs, cfg.tau, round);

        let mut working = 0;
        let mut adequate = 0;
        let mut alive = 0;
        for (agent, &delivered) in self.agents.iter_mut().zip(&outcome.delivered) {
            let start = agent.battery.level;
            if start > 0.0 {
                alive += 1;
            }
            if start > 0.0 || delivered > 0.0 {
                working += 1;
            }
            if start + delivered >= agent.consumption {
                adequate += 1;
            }
            if delivered > 0.0 {
                self.charge_counts[agent.id] += 1;
            }
            agent.battery = apply_round_energy(agent.battery, agent.consumption, delivered);
            agent.position = agent.next_position;
        }

        let charges = outcome.events.len() as u32;
        self.charges_cumulative += u64::from(charges);
        self.total_delivered += outcome.total_delivered();
        if self.depletion_round.is_none()
            && !self.charger.infinite_energy
            && (outcome.skipped > 0 || self.charger.energy <= 0.0)
        {
            self.depletion_round = Some(round);
        }
        self.last_delivered = outcome.delivered;
        self.last_events = outcome.events;

        let metrics = RoundMetrics {
            round,
            range_used: range,
            charger_energy: self.charger.energy,
            charges_this_round: charges,
            charges_cumulative: self.charges_cumulative,
            working_agents: working,
            adequate_agents: adequate,
            alive_agents: alive,
            skipped_requests: outcome.skipped as u32,
        };
        self.trace.push(metrics);
        metrics
    }

    /// Runs the remaining rounds; the result covers every round played.
    pub fn run(mut self) -> RunResult {
        while !self.is_finished() {
            self.step();
        }
        let trace = self.trace;
        let lifetime = trace
            .iter()
            .rev()
            .find(|m| m.working_agents > 0)
            .map_or(0, |m| m.round);
        RunResult {
            policy: self.label,
            repetition: self.repetition,
            scenario: self.scenario,
            trace,
            charge_counts: self.charge_counts,
            lifetime,
            depletion_round: self.depletion_round,
            initial_charger_energy: self.cfg.charger_energy,
            total_delivered: self.total_delivered,
        }
    }
}

/// Runs repetition `rep` of `cfg` under `entry`. Deterministic in
/// `(cfg, cfg.master_seed, rep)`.
pub fn run_simulation(cfg: &ScenarioConfig, entry: &PolicyEntry, rep: u32) -> Result<RunResult, ConfigError> {
    Ok(Simulation::new(cfg, entry, rep)?.run())
}

/// Per-round means over repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanRoundMetrics {
    pub round: u32,
    pub range_used: f64,
    pub charger_energy: f64,
    pub charges_this_round: f64,
    pub charges_cumulative: f64,
    pub working_agents: f64,
    pub adequate_agents: f64,
    pub alive_agents: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub policy: String,
    pub runs: Vec<RunResult>,
    pub mean: Vec<MeanRoundMetrics>,
}

impl Experiment {
    pub fn mean_lifetime(&self) -> f64 {
        mean(self.runs.iter().map(|r| f64::from(r.lifetime)))
    }

    pub fn mean_total_charges(&self) -> f64 {
        mean(self.runs.iter().map(|r| r.total_charges() as f64))
    }

    pub fn mean_depletion_round(&self) -> f64 {
        mean(self.runs.iter().map(|r| f64::from(r.depletion_or_horizon())))
    }

    /// Mean number of agents per charge-count bucket `[k*w, (k+1)*w)`.
    pub fn charge_histogram(&self, bucket: u32) -> Vec<f64> {
        let bucket = bucket.max(1);
        let top = self
            .runs
            .iter()
            .flat_map(|r| r.charge_counts.iter())
            .max()
            .copied()
            .unwrap_or(0);
        let mut hist = vec![0.0; (top / bucket) as usize + 1];
        for run in &self.runs {
            for &c in &run.charge_counts {
                hist[(c / bucket) as usize] += 1.0;
            }
        }
        let reps = self.runs.len().max(1) as f64;
        hist.iter_mut().for_each(|h| *h /= reps);
        hist
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Arithmetic mean of the traces, round by round, in repetition order.
pub fn average_traces(runs: &[RunResult]) -> Vec<MeanRoundMetrics> {
    let len = runs.iter().map(|r| r.trace.len()).min().unwrap_or(0);
    let k = runs.len() as f64;
    (0..len)
        .map(|i| {
            let avg = |f: fn(&RoundMetrics) -> f64| runs.iter().map(|r| f(&r.trace[i])).sum::<f64>() / k;
            MeanRoundMetrics {
                round: runs[0].trace[i].round,
                range_used: avg(|m| m.range_used),
                charger_energy: avg(|m| m.charger_energy),
                charges_this_round: avg(|m| f64::from(m.charges_this_round)),
                charges_cumulative: avg(|m| m.charges_cumulative as f64),
                working_agents: avg(|m| f64::from(m.working_agents)),
                adequate_agents: avg(|m| f64::from(m.adequate_agents)),
                alive_agents: avg(|m| f64::from(m.alive_agents)),
            }
        })
        .collect()
}

/// All repetitions of `entry`, run in parallel and collected in order.
pub fn run_experiment(cfg: &ScenarioConfig, entry: &PolicyEntry) -> Result<Experiment, ConfigError> {
    cfg.validate()?;
    entry.spec.validate(cfg.bounds(), cfg.n)?;
    let runs = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| run_simulation(cfg, entry, rep))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Experiment {
        policy: entry.label(),
        mean: average_traces(&runs),
        runs,
    })
}

/// Same as [`run_experiment`] but strictly sequential.
pub fn run_experiment_serial(cfg: &ScenarioConfig, entry: &PolicyEntry) -> Result<Experiment, ConfigError> {
    cfg.validate()?;
    let runs = (0..cfg.repetitions)
        .map(|rep| run_simulation(cfg, entry, rep))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Experiment {
        policy: entry.label(),
        mean: average_traces(&runs),
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::reference(n);
        cfg.horizon = 60;
        cfg.repetitions = 3;
        cfg
    }

    fn fixed(r: f64) -> PolicyEntry {
        PolicyEntry::finite(PolicySpec::Fixed { range: r })
    }

    #[test]
    fn reference_defaults() {
        let cfg = ScenarioConfig::reference(100);
        assert_eq!(cfg.area, Area::new(25.0, 25.0));
        assert_eq!(cfg.charger_energy, 1e5);
        assert_eq!(cfg.battery_capacity, 1000.0);
        assert_eq!(cfg.v_max, 3.0);
        assert_eq!((cfg.r_min, cfg.r_max), (1.0, 5.0));
        assert_eq!(cfg.p_mode_redraw, 0.25);
        assert_eq!(cfg.horizon, 500);
        assert_eq!(cfg.repetitions, 100);
        assert_eq!(cfg.charger_position(), Point::new(12.5, 12.5));
    }

    #[test]
    fn missing_n_is_named() {
        let err = ScenarioConfig::from_json_str("{}").unwrap_err();
        assert!(err.to_string().contains("`n`"), "{err}");
    }

    #[test]
    fn bad_fields_are_named() {
        let err = ScenarioConfig::from_json_str(r#"{"n": 5, "r_min": 6}"#).unwrap_err();
        assert!(err.to_string().contains("r_min"));
        let err = ScenarioConfig::from_json_str(r#"{"n": 5, "policy": {"kind": "mwa", "mu": 9}}"#).unwrap_err();
        assert!(err.to_string().contains("mu"));
    }

    #[test]
    fn seeds_differ_per_repetition() {
        assert_ne!(repetition_seed(1, 0), repetition_seed(1, 1));
        assert_ne!(repetition_seed(1, 0), repetition_seed(2, 0));
        assert_eq!(repetition_seed(7, 3), repetition_seed(7, 3));
    }

    #[test]
    fn same_seed_same_run() {
        let cfg = small(30);
        let entry = PolicyEntry::finite(PolicySpec::Ldmax { q: 0.9 });
        assert_eq!(run_simulation(&cfg, &entry, 2).unwrap(), run_simulation(&cfg, &entry, 2).unwrap());
    }

    #[test]
    fn no_budget_no_charges() {
        let mut cfg = small(30);
        cfg.charger_energy = 0.0;
        let run = run_simulation(&cfg, &fixed(5.0), 0).unwrap();
        assert!(run.trace.iter().all(|m| m.charges_this_round == 0));
        assert_eq!(run.depletion_round, Some(1));
    }

    #[test]
    fn drained_world_has_no_workers() {
        let mut cfg = small(10);
        cfg.charger_energy = 0.0;
        cfg.battery_capacity = 1e-9;
        cfg.horizon = 30;
        let run = run_simulation(&cfg, &fixed(5.0), 0).unwrap();
        // Once a battery this small hits zero it never recovers.
        let last = run.trace.last().unwrap();
        assert!(last.working_agents <= last.alive_agents);
        assert!(run.trace.windows(2).all(|w| w[1].working_agents <= w[0].working_agents));
    }

    #[test]
    fn metric_bookkeeping() {
        let cfg = small(40);
        let mut sim = Simulation::new(&cfg, &fixed(5.0), 0).unwrap();
        let mut events = 0u64;
        let mut prev_energy = cfg.charger_energy;
        while !sim.is_finished() {
            let starts: Vec<f64> = sim.agents().iter().map(|a| a.battery.level).collect();
            let m = sim.step();
            events += sim.last_events().len() as u64;
            assert_eq!(m.charges_cumulative, events);
            assert!(m.charger_energy <= prev_energy);
            prev_energy = m.charger_energy;
            for ((a, start), delivered) in sim.agents().iter().zip(&starts).zip(sim.last_delivered()) {
                assert!(a.battery.level >= 0.0 && a.battery.level <= cfg.battery_capacity);
                if *start + delivered >= a.consumption && a.consumption > 0.0 {
                    assert!(*start > 0.0 || *delivered > 0.0);
                }
            }
            assert!(m.working_agents as usize <= cfg.n && m.adequate_agents as usize <= cfg.n);
        }
        let total = sim.total_delivered();
        let spent = cfg.charger_energy - sim.charger().energy;
        assert!((total - spent).abs() <= 1e-9 * spent.max(1.0));
    }

    #[test]
    fn histogram_sums_to_charges() {
        let cfg = small(30);
        let run = run_simulation(&cfg, &fixed(5.0), 1).unwrap();
        assert_eq!(run.charge_counts.iter().map(|&c| u64::from(c)).sum::<u64>(), run.total_charges());
    }

    #[test]
    fn single_repetition_mean_is_the_run() {
        let mut cfg = small(20);
        cfg.repetitions = 1;
        let exp = run_experiment(&cfg, &fixed(3.0)).unwrap();
        let run = &exp.runs[0];
        for (m, r) in exp.mean.iter().zip(&run.trace) {
            assert_eq!(m.charges_cumulative, r.charges_cumulative as f64);
            assert_eq!(m.working_agents, f64::from(r.working_agents));
            assert_eq!(m.range_used, r.range_used);
        }
    }

    #[test]
    fn averaging_two_runs() {
        let mk = |cum: u64| RunResult {
            policy: "x".into(),
            repetition: 0,
            scenario: MobilityScenario::Free,
            trace: vec![RoundMetrics {
                round: 1,
                range_used: 1.0,
                charger_energy: 0.0,
                charges_this_round: 0,
                charges_cumulative: cum,
                working_agents: 0,
                adequate_agents: 0,
                alive_agents: 0,
                skipped_requests: 0,
            }],
            charge_counts: vec![],
            lifetime: 0,
            depletion_round: None,
            initial_charger_energy: 0.0,
            total_delivered: 0.0,
        };
        let mean = average_traces(&[mk(10), mk(20)]);
        assert_eq!(mean[0].charges_cumulative, 15.0);
    }

    #[test]
    fn parallel_matches_serial() {
        let cfg = small(25);
        let entry = PolicyEntry::finite(PolicySpec::RandMinMax { p: 0.5 });
        assert_eq!(
            run_experiment(&cfg, &entry).unwrap(),
            run_experiment_serial(&cfg, &entry).unwrap()
        );
    }

    #[test]
    fn mixture_is_equiprobable() {
        let cfg = ScenarioConfig::reference(100);
        let spec = ScenarioSpec::Mixture { weights: equal_weights() };
        let reps = 300;
        let mut counts = [0usize; 3];
        for rep in 0..reps {
            let mut rng = world_rng(cfg.master_seed, rep);
            match spec.resolve(cfg.n, cfg.bounds(), &mut rng) {
                MobilityScenario::Free => counts[0] += 1,
                MobilityScenario::ForbiddenCircle { radius } => {
                    assert!((1.0..=2.5).contains(&radius));
                    counts[1] += 1;
                }
                MobilityScenario::RingDwellers { inner, outer, count } => {
                    assert!((1.0..1.5).contains(&inner) && (1.5..=5.0).contains(&outer));
                    assert!((1..=10).contains(&count));
                    counts[2] += 1;
                }
            }
        }
        let p = 1.0 / 3.0;
        let sigma = (reps as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - reps as f64 * p).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn world_is_policy_invariant() {
        let cfg = small(30);
        let a = Simulation::new(&cfg, &fixed(1.0), 4).unwrap();
        let b = Simulation::new(&cfg, &PolicyEntry::finite(PolicySpec::Mcer { lambda: 2.0, grid: None }), 4).unwrap();
        let (mut a, mut b) = (a, b);
        for _ in 0..30 {
            a.step();
            b.step();
            for (x, y) in a.agents().iter().zip(b.agents()) {
                assert_eq!(x.position, y.position);
                assert_eq!(x.consumption, y.consumption);
            }
        }
    }
}
