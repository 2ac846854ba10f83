//! Received-energy law and the per-round charging procedure of a single
//! static charger with a finite (or unlimited) energy budget.

use serde::{Deserialize, Serialize};

use crate::energy::Battery;
use crate::geom::{chord, in_range_time, Disk, Point, Segment};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeBounds {
    pub min: f64,
    pub max: f64,
}

impl RangeBounds {
    pub fn clamp(&self, r: f64) -> f64 {
        r.clamp(self.min, self.max)
    }

    pub fn contains(&self, r: f64) -> bool {
        (self.min..=self.max).contains(&r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargerState {
    pub position: Point,
    /// Remaining budget. Ignored when `infinite_energy` is set.
    pub energy: f64,
    pub range: f64,
    pub bounds: RangeBounds,
    pub alpha: f64,
    pub beta: f64,
    pub infinite_energy: bool,
}

impl ChargerState {
    pub fn disk(&self) -> Disk {
        Disk::new(self.position, self.range)
    }

    pub fn can_afford(&self, amount: f64) -> bool {
        self.infinite_energy || self.energy >= amount
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeEvent {
    pub agent: usize,
    pub round: u32,
    pub delivered: f64,
    pub entry_distance: f64,
}

/// Energy an agent picks up: `alpha * range^2 * t_in / (entry_distance + beta)^2`.
///
/// A zero denominator with positive in-range time gives `+inf`; the caller
/// caps it by battery headroom.
pub fn received_energy(range: f64, t_in: f64, entry_distance: f64, alpha: f64, beta: f64) -> f64 {
    if t_in <= 0.0 {
        return 0.0;
    }
    let denom = entry_distance + beta;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    alpha * range * range * t_in / (denom * denom)
}

/// What the charger sees of one agent in one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentRoundInput {
    pub id: usize,
    pub trajectory: Segment,
    pub velocity: f64,
    pub battery: Battery,
    pub consumed: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChargingOutcome {
    pub events: Vec<ChargeEvent>,
    /// Delivered energy per input, in input order.
    pub delivered: Vec<f64>,
    /// Positive requests refused because the budget fell short.
    pub skipped: usize,
}

impl ChargingOutcome {
    pub fn total_delivered(&self) -> f64 {
        self.delivered.iter().sum()
    }

    pub fn charges(&self) -> usize {
        self.events.len()
    }
}

struct Request {
    slot: usize,
    entry_time: f64,
    amount: f64,
    entry_distance: f64,
}

/// Charges every in-range agent that needs energy, in order of first entry
/// into the disk (ties by agent id). Each request is all-or-nothing.
pub fn execute_charging_round(
    charger: &mut ChargerState,
    agents: &[AgentRoundInput],
    tau: f64,
    round: u32,
) -> ChargingOutcome {
    let disk = charger.disk();
    let mut requests: Vec<Request> = agents
        .iter()
        .enumerate()
        .filter_map(|(slot, a)| {
            let ch = chord(&a.trajectory, &disk)?;
            let t_in = in_range_time(&a.trajectory, &disk, a.velocity, tau);
            let entry_distance = charger.position.distance(&ch.first);
            let offered = received_energy(charger.range, t_in, entry_distance, charger.alpha, charger.beta);
            let amount = offered.min(a.battery.headroom_after(a.consumed));
            (amount > 0.0).then_some(Request {
                slot,
                entry_time: ch.entry * tau,
                amount,
                entry_distance,
            })
        })
        .collect();
    requests.sort_by(|x, y| {
        x.entry_time
            .total_cmp(&y.entry_time)
            .then(agents[x.slot].id.cmp(&agents[y.slot].id))
    });

    let mut outcome = ChargingOutcome {
        events: Vec::new(),
        delivered: vec![0.0; agents.len()],
        skipped: 0,
    };
    for req in requests {
        if !charger.can_afford(req.amount) {
            outcome.skipped += 1;
            continue;
        }
        if !charger.infinite_energy {
            charger.energy -= req.amount;
        }
        outcome.delivered[req.slot] = req.amount;
        outcome.events.push(ChargeEvent {
            agent: agents[req.slot].id,
            round,
            delivered: req.amount,
            entry_distance: req.entry_distance,
        });
    }
    outcome
}
