//! Exact solvers. Both return the lexicographically smallest optimal
//! sequence of range indices.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{BatteryMode, BudgetRule, OfflineError, OfflineInstance, OfflineSolution, Problem, ENERGY_TOLERANCE};

/// Cap on distinct `(round, budget, levels)` states the search may visit.
pub const MAX_SEARCH_STATES: usize = 10_000_000;
/// Cap on `rounds * (budget + 1)` for the dynamic program.
pub const MAX_DP_CELLS: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dp,
    Brute,
}

pub fn solve(inst: &OfflineInstance, problem: Problem, method: Method) -> Result<OfflineSolution, OfflineError> {
    match (problem, method) {
        (Problem::Mnc, Method::Dp) => solve_mnc_dp(inst),
        (Problem::Mnc, Method::Brute) => solve_mnc_bruteforce(inst),
        (Problem::Mnl, Method::Brute) => solve_mnl_bruteforce(inst),
        (Problem::Mnl, Method::Dp) => Err(OfflineError::Invalid(
            "no dynamic program for MNL; use the brute-force method".into(),
        )),
    }
}

pub fn solve_mnc_bruteforce(inst: &OfflineInstance) -> Result<OfflineSolution, OfflineError> {
    search(inst, Problem::Mnc)
}

pub fn solve_mnl_bruteforce(inst: &OfflineInstance) -> Result<OfflineSolution, OfflineError> {
    search(inst, Problem::Mnl)
}

type StateKey = (usize, u64, Vec<u64>);

struct Search<'a> {
    inst: &'a OfflineInstance,
    problem: Problem,
    memo: HashMap<StateKey, (u64, usize)>,
}

fn key(t: usize, budget: f64, levels: &[f64]) -> StateKey {
    (t, budget.to_bits(), levels.iter().map(|l| l.to_bits()).collect())
}

impl Search<'_> {
    /// Best objective from round `t` on, memoized on the exact state.
    fn best(&mut self, t: usize, budget: f64, levels: &[f64]) -> Result<u64, OfflineError> {
        if t == self.inst.horizon() {
            return Ok(0);
        }
        let k = key(t, budget, levels);
        if let Some(&(v, _)) = self.memo.get(&k) {
            return Ok(v);
        }
        if self.memo.len() >= MAX_SEARCH_STATES {
            return Err(OfflineError::TooLarge(format!(
                "search exceeded {MAX_SEARCH_STATES} distinct states"
            )));
        }
        let alive = u64::from(self.inst.start_levels(levels).iter().any(|l| *l > 0.0));
        let mut top: Option<(u64, usize)> = None;
        for j in 0..self.inst.ranges.len() {
            let out = self.inst.play_round(t, j, levels, budget);
            let gain = match self.problem {
                Problem::Mnc => out.charges,
                Problem::Mnl => alive,
            };
            let rest = self.best(t + 1, (budget - out.spent).max(0.0), &out.levels)?;
            if top.is_none_or(|(v, _)| gain + rest > v) {
                top = Some((gain + rest, j));
            }
        }
        let top = top.expect("at least one range");
        self.memo.insert(k, top);
        Ok(top.0)
    }
}

fn search(inst: &OfflineInstance, problem: Problem) -> Result<OfflineSolution, OfflineError> {
    inst.validate()?;
    let mut s = Search {
        inst,
        problem,
        memo: HashMap::new(),
    };
    s.best(0, inst.charger_energy, &inst.initial_levels)?;

    let mut choices = Vec::with_capacity(inst.horizon());
    let mut budget = inst.charger_energy;
    let mut levels = inst.initial_levels.clone();
    for t in 0..inst.horizon() {
        let (_, j) = s.memo[&key(t, budget, &levels)];
        let out = inst.play_round(t, j, &levels, budget);
        budget = (budget - out.spent).max(0.0);
        levels = out.levels;
        choices.push(j);
    }
    inst.solution(choices, problem)
}

fn to_units(value: f64, denominator: u64, round: usize) -> Result<u64, OfflineError> {
    let scaled = value * denominator as f64;
    let nearest = scaled.round();
    if (scaled - nearest).abs() > ENERGY_TOLERANCE * scaled.abs().max(1.0) {
        return Err(OfflineError::NonIntegerCost {
            round,
            value,
            denominator,
        });
    }
    Ok(nearest as u64)
}

/// Per-round transition table: for each range, the charges and integer
/// cost of serving with `e` units left.
enum Transition {
    /// Served in full if affordable, otherwise nothing happens.
    Block { charges: u64, cost: u64 },
    /// Requests in service order, each paid only if affordable.
    Sequential(Vec<u64>),
}

impl Transition {
    fn apply(&self, e: u64) -> (u64, u64) {
        match self {
            Transition::Block { charges, cost } if *cost <= e => (*charges, *cost),
            Transition::Block { .. } => (0, 0),
            Transition::Sequential(costs) => {
                let mut left = e;
                let mut charges = 0;
                for &c in costs {
                    if c <= left {
                        left -= c;
                        charges += 1;
                    }
                }
                (charges, e - left)
            }
        }
    }
}

/// Dynamic program over (round, remaining integer energy). Needs rounds
/// that do not interact through battery levels and costs that are integer
/// multiples of `1 / energy_denominator`.
pub fn solve_mnc_dp(inst: &OfflineInstance) -> Result<OfflineSolution, OfflineError> {
    inst.validate()?;
    if inst.battery_mode != BatteryMode::ResetEachRound {
        return Err(OfflineError::NotSeparable);
    }
    let d = inst.energy_denominator.unwrap_or(1);
    let horizon = inst.horizon();
    let scaled_budget = inst.charger_energy * d as f64;
    let budget = (scaled_budget + ENERGY_TOLERANCE * scaled_budget.max(1.0)).floor();
    let cells = (horizon as f64 + 1.0) * (budget + 1.0);
    if cells > MAX_DP_CELLS as f64 {
        return Err(OfflineError::TooLarge(format!(
            "{horizon} rounds x {budget} energy units exceeds {MAX_DP_CELLS} cells"
        )));
    }
    let budget = budget as u64;

    let mut table: Vec<Vec<Transition>> = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let mut row = Vec::with_capacity(inst.ranges.len());
        for j in 0..inst.ranges.len() {
            let requests = inst.requests(t, j, &inst.initial_levels);
            row.push(match inst.budget_rule {
                BudgetRule::PerRound => Transition::Block {
                    charges: requests.len() as u64,
                    cost: to_units(requests.iter().map(|r| r.2).sum(), d, t)?,
                },
                BudgetRule::PerAgent => Transition::Sequential(
                    requests
                        .iter()
                        .map(|r| to_units(r.2, d, t))
                        .collect::<Result<_, _>>()?,
                ),
            });
        }
        table.push(row);
    }

    let width = budget as usize + 1;
    let mut best = vec![0u64; (horizon + 1) * width];
    for t in (0..horizon).rev() {
        for e in 0..=budget {
            let v = table[t]
                .iter()
                .map(|tr| {
                    let (gain, cost) = tr.apply(e);
                    gain + best[(t + 1) * width + (e - cost) as usize]
                })
                .max()
                .unwrap_or(0);
            best[t * width + e as usize] = v;
        }
    }

    let mut choices = Vec::with_capacity(horizon);
    let mut e = budget;
    for (t, row) in table.iter().enumerate() {
        let target = best[t * width + e as usize];
        let (j, cost) = row
            .iter()
            .enumerate()
            .find_map(|(j, tr)| {
                let (gain, cost) = tr.apply(e);
                (gain + best[(t + 1) * width + (e - cost) as usize] == target).then_some((j, cost))
            })
            .expect("optimum is attained");
        choices.push(j);
        e -= cost;
    }
    inst.solution(choices, Problem::Mnc)
}
