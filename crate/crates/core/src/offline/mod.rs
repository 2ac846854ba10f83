//! Full-information offline problems: maximize the number of charges (MNC)
//! or the number of alive rounds (MNL) by picking one range per round from
//! a finite set. Instances give each agent's contact with every candidate
//! disk directly, with `alpha = 1` and `beta = 0`.

mod kp;
mod reduction;
mod solver;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charging::received_energy;

pub use kp::{solve_kp, KnapsackInstance, KpItem, MAX_KP_CAPACITY};
pub use reduction::{default_mnc_range, kp_to_mnc, kp_to_mnl, kp_to_mnl_with_order};
pub use solver::{
    solve, solve_mnc_bruteforce, solve_mnc_dp, solve_mnl_bruteforce, Method, MAX_DP_CELLS, MAX_SEARCH_STATES,
};

/// Slack allowed when comparing an energy cost against the remaining budget.
pub const ENERGY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum OfflineError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error(
        "cost {value} in round {round} is not an integer multiple of 1/{denominator}; \
         set `energy_denominator` so that every cost becomes an integer, or use the brute-force method"
    )]
    NonIntegerCost { round: usize, value: f64, denominator: u64 },
    #[error("the dynamic program needs `battery_mode: reset_each_round`; use the brute-force method")]
    NotSeparable,
    #[error("invalid knapsack instance: {0}")]
    Knapsack(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Mnc,
    Mnl,
}

/// How battery levels evolve between rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatteryMode {
    /// Every round starts from `initial_levels`; rounds are independent.
    ResetEachRound,
    /// Levels carry over from round to round.
    #[default]
    Carry,
}

/// How a round's requests are paid for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetRule {
    /// The round's requests are served together or not at all.
    #[default]
    PerRound,
    /// Requests are served one by one in entry order, each all-or-nothing.
    PerAgent,
}

/// An agent's passage through one candidate disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub entry_distance: f64,
    pub in_range_time: f64,
    #[serde(default)]
    pub entry_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRound {
    pub agent: usize,
    /// Consumption under each candidate range, or a single value for all.
    pub consumption: Vec<f64>,
    /// Contact with each candidate disk (`None` when never in range).
    pub contacts: Vec<Option<Contact>>,
}

impl AgentRound {
    pub fn consumption_at(&self, range_index: usize) -> f64 {
        match self.consumption.as_slice() {
            [single] => *single,
            all => all[range_index],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OfflineRound {
    pub agents: Vec<AgentRound>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineInstance {
    /// Candidate ranges, strictly increasing.
    pub ranges: Vec<f64>,
    pub charger_energy: f64,
    pub battery_capacity: f64,
    /// Starting level of every agent; its length is the number of agents.
    pub initial_levels: Vec<f64>,
    #[serde(default)]
    pub battery_mode: BatteryMode,
    #[serde(default)]
    pub budget_rule: BudgetRule,
    /// Common denominator that turns every cost into an integer (DP only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_denominator: Option<u64>,
    pub rounds: Vec<OfflineRound>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineSolution {
    /// Index into `ranges` for each round.
    pub choices: Vec<usize>,
    pub ranges: Vec<f64>,
    pub objective: u64,
    pub energy_spent: f64,
}

/// Result of playing a fixed sequence of choices forward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub charges: u64,
    pub alive_rounds: u64,
    pub energy_spent: f64,
}

impl Evaluation {
    pub fn objective(&self, problem: Problem) -> u64 {
        match problem {
            Problem::Mnc => self.charges,
            Problem::Mnl => self.alive_rounds,
        }
    }
}

/// Outcome of one round under one range choice.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RoundOutcome {
    pub charges: u64,
    pub spent: f64,
    pub levels: Vec<f64>,
}

impl OfflineInstance {
    pub fn from_json_str(s: &str) -> Result<Self, OfflineError> {
        let inst: OfflineInstance =
            serde_json::from_str(s).map_err(|e| OfflineError::Invalid(e.to_string()))?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn horizon(&self) -> usize {
        self.rounds.len()
    }

    pub fn agent_count(&self) -> usize {
        self.initial_levels.len()
    }

    pub fn validate(&self) -> Result<(), OfflineError> {
        let bad = |m: String| Err(OfflineError::Invalid(m));
        let k = self.ranges.len();
        if k == 0 {
            return bad("`ranges` is empty".into());
        }
        if self.ranges.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return bad("`ranges` must be finite and non-negative".into());
        }
        if self.ranges.windows(2).any(|w| w[0] >= w[1]) {
            return bad("`ranges` must be strictly increasing".into());
        }
        if !(self.charger_energy.is_finite() && self.charger_energy >= 0.0) {
            return bad("`charger_energy` must be finite and >= 0".into());
        }
        if !(self.battery_capacity.is_finite() && self.battery_capacity >= 0.0) {
            return bad("`battery_capacity` must be finite and >= 0".into());
        }
        if self
            .initial_levels
            .iter()
            .any(|l| !(l.is_finite() && *l >= 0.0 && *l <= self.battery_capacity))
        {
            return bad("`initial_levels` must lie in [0, battery_capacity]".into());
        }
        if self.energy_denominator == Some(0) {
            return bad("`energy_denominator` must be positive".into());
        }
        let n = self.agent_count();
        for (t, round) in self.rounds.iter().enumerate() {
            let mut seen = vec![false; n];
            for a in &round.agents {
                if a.agent >= n {
                    return bad(format!("round {t}: agent {} has no initial level", a.agent));
                }
                if std::mem::replace(&mut seen[a.agent], true) {
                    return bad(format!("round {t}: agent {} listed twice", a.agent));
                }
                if a.consumption.len() != 1 && a.consumption.len() != k {
                    return bad(format!("round {t}: agent {} needs 1 or {k} consumption values", a.agent));
                }
                if a.consumption.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
                    return bad(format!("round {t}: agent {} has a negative consumption", a.agent));
                }
                if a.contacts.len() != k {
                    return bad(format!("round {t}: agent {} needs {k} contact entries", a.agent));
                }
                for c in a.contacts.iter().flatten() {
                    if !(c.entry_distance >= 0.0 && c.in_range_time >= 0.0 && c.entry_time.is_finite()) {
                        return bad(format!("round {t}: agent {} has an invalid contact", a.agent));
                    }
                }
            }
        }
        Ok(())
    }

    pub(crate) fn start_levels<'a>(&'a self, carried: &'a [f64]) -> &'a [f64] {
        match self.battery_mode {
            BatteryMode::ResetEachRound => &self.initial_levels,
            BatteryMode::Carry => carried,
        }
    }

    /// Requests `(entry_time, agent, amount)` of round `t` under range `j`,
    /// sorted by entry time then agent.
    pub(crate) fn requests(&self, t: usize, j: usize, levels: &[f64]) -> Vec<(f64, usize, f64)> {
        let range = self.ranges[j];
        let mut out: Vec<(f64, usize, f64)> = self.rounds[t]
            .agents
            .iter()
            .filter_map(|a| {
                let c = a.contacts[j]?;
                let after = (levels[a.agent] - a.consumption_at(j)).max(0.0);
                let offered = received_energy(range, c.in_range_time, c.entry_distance, 1.0, 0.0);
                let amount = offered.min(self.battery_capacity - after);
                (amount > 0.0).then_some((c.entry_time, a.agent, amount))
            })
            .collect();
        out.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        out
    }

    /// Plays round `t` with range `j` given carried levels and budget.
    pub(crate) fn play_round(&self, t: usize, j: usize, carried: &[f64], budget: f64) -> RoundOutcome {
        let start = self.start_levels(carried);
        let requests = self.requests(t, j, start);
        let mut delivered = vec![0.0; self.agent_count()];
        let mut spent = 0.0;
        let mut charges = 0;
        match self.budget_rule {
            BudgetRule::PerRound => {
                let total: f64 = requests.iter().map(|r| r.2).sum();
                if total <= budget + ENERGY_TOLERANCE {
                    for &(_, agent, amount) in &requests {
                        delivered[agent] = amount;
                    }
                    spent = total.min(budget);
                    charges = requests.len() as u64;
                }
            }
            BudgetRule::PerAgent => {
                let mut left = budget;
                for &(_, agent, amount) in &requests {
                    if amount <= left + ENERGY_TOLERANCE {
                        delivered[agent] = amount;
                        let pay = amount.min(left);
                        left -= pay;
                        spent += pay;
                        charges += 1;
                    }
                }
            }
        }
        let mut levels = start.to_vec();
        for a in &self.rounds[t].agents {
            let after = (levels[a.agent] - a.consumption_at(j)).max(0.0);
            levels[a.agent] = (after + delivered[a.agent]).min(self.battery_capacity);
        }
        RoundOutcome { charges, spent, levels }
    }

    /// Replays `choices` and reports charges, alive rounds and spend.
    /// A round is alive when some agent has positive energy at its start.
    pub fn evaluate(&self, choices: &[usize]) -> Result<Evaluation, OfflineError> {
        if choices.len() != self.horizon() {
            return Err(OfflineError::Invalid(format!(
                "expected {} choices, got {}",
                self.horizon(),
                choices.len()
            )));
        }
        if let Some(j) = choices.iter().find(|j| **j >= self.ranges.len()) {
            return Err(OfflineError::Invalid(format!("range index {j} out of bounds")));
        }
        let mut levels = self.initial_levels.clone();
        let mut budget = self.charger_energy;
        let mut eval = Evaluation {
            charges: 0,
            alive_rounds: 0,
            energy_spent: 0.0,
        };
        for (t, &j) in choices.iter().enumerate() {
            if self.start_levels(&levels).iter().any(|l| *l > 0.0) {
                eval.alive_rounds += 1;
            }
            let out = self.play_round(t, j, &levels, budget);
            budget = (budget - out.spent).max(0.0);
            eval.charges += out.charges;
            eval.energy_spent += out.spent;
            levels = out.levels;
        }
        Ok(eval)
    }

    pub(crate) fn solution(&self, choices: Vec<usize>, problem: Problem) -> Result<OfflineSolution, OfflineError> {
        let eval = self.evaluate(&choices)?;
        Ok(OfflineSolution {
            ranges: choices.iter().map(|&j| self.ranges[j]).collect(),
            objective: eval.objective(problem),
            energy_spent: eval.energy_spent,
            choices,
        })
    }
}
