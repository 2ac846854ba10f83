//! Knapsack instances rewritten as MNC and MNL instances whose optimum
//! equals the knapsack optimum.

use num_integer::Integer;

use super::{
    AgentRound, BatteryMode, BudgetRule, Contact, KnapsackInstance, OfflineError, OfflineInstance, OfflineRound,
};

fn check_range(range: f64) -> Result<(), OfflineError> {
    if range.is_finite() && range > 0.0 {
        Ok(())
    } else {
        Err(OfflineError::Invalid(format!("range must be positive and finite (got {range})")))
    }
}

/// `max_t sqrt(w_t / v_t)`, the range used when none is given (1 for an
/// empty instance).
pub fn default_mnc_range(kp: &KnapsackInstance) -> f64 {
    kp.items
        .iter()
        .map(|i| (i.weight as f64 / i.value as f64).sqrt())
        .reduce(f64::max)
        .unwrap_or(1.0)
}

/// One round per item `t`, with `v_t` agents that each need `w_t / v_t`
/// when the charger is on and nothing when it is off. Serving round `t`
/// costs `w_t` in total and yields `v_t` charges. Ranges are `{0, R}`.
///
/// Agents sit at distance `R * sqrt(v/w)` for the whole round when that is
/// inside the disk; otherwise they skim the boundary for `w/v` of the round.
pub fn kp_to_mnc(kp: &KnapsackInstance, range: f64) -> Result<OfflineInstance, OfflineError> {
    kp.validate()?;
    check_range(range)?;
    let per_agent = |v: u64, w: u64| w as f64 / v as f64;
    let n = kp.items.iter().map(|i| i.value).max().unwrap_or(0) as usize;
    let capacity = kp
        .items
        .iter()
        .map(|i| per_agent(i.value, i.weight))
        .fold(0.0, f64::max);
    let denominator = kp.items.iter().fold(1u64, |acc, i| acc.lcm(&i.value));

    let rounds = kp
        .items
        .iter()
        .map(|item| {
            let need = per_agent(item.value, item.weight);
            let contact = if item.weight >= item.value {
                Contact {
                    entry_distance: range * (item.value as f64 / item.weight as f64).sqrt(),
                    in_range_time: 1.0,
                    entry_time: 0.0,
                }
            } else {
                Contact {
                    entry_distance: range,
                    in_range_time: need,
                    entry_time: 0.0,
                }
            };
            OfflineRound {
                agents: (0..item.value as usize)
                    .map(|agent| AgentRound {
                        agent,
                        consumption: vec![0.0, need],
                        contacts: vec![None, Some(contact)],
                    })
                    .collect(),
            }
        })
        .collect();

    Ok(OfflineInstance {
        ranges: vec![0.0, range],
        charger_energy: kp.capacity as f64,
        battery_capacity: capacity,
        initial_levels: vec![capacity; n],
        battery_mode: BatteryMode::ResetEachRound,
        budget_rule: BudgetRule::PerRound,
        energy_denominator: Some(denominator),
        rounds,
    })
}

/// [`kp_to_mnl_with_order`] with the items in input order.
pub fn kp_to_mnl(kp: &KnapsackInstance, range: f64) -> Result<OfflineInstance, OfflineError> {
    let order: Vec<usize> = (0..kp.items.len()).collect();
    kp_to_mnl_with_order(kp, range, &order)
}

/// A single agent, empty at the start, and `1 + sum v` rounds. After the
/// opening round each item gets a block of `v_i` rounds. The agent can be
/// topped up with exactly `w_i` (standing at distance `R / sqrt(w_i)`) in
/// the round just before block `i`; it spends that energy evenly over the
/// block and is drained in the block's last round. A block is alive for
/// all `v_i` rounds iff its charge was bought.
pub fn kp_to_mnl_with_order(
    kp: &KnapsackInstance,
    range: f64,
    order: &[usize],
) -> Result<OfflineInstance, OfflineError> {
    kp.validate()?;
    check_range(range)?;
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..kp.items.len()).collect::<Vec<_>>() {
        return Err(OfflineError::Invalid("order must be a permutation of the items".into()));
    }
    let capacity = kp.items.iter().map(|i| i.weight).max().unwrap_or(0) as f64;
    let horizon = 1 + kp.items.iter().map(|i| i.value as usize).sum::<usize>();

    let mut consumption = vec![0.0; horizon];
    let mut charge: Vec<Option<Contact>> = vec![None; horizon];
    let mut start = 1;
    for &idx in order {
        let item = kp.items[idx];
        let w = item.weight as f64;
        let v = item.value as usize;
        charge[start - 1] = Some(Contact {
            entry_distance: range / w.sqrt(),
            in_range_time: 1.0,
            entry_time: 0.0,
        });
        for c in &mut consumption[start..start + v - 1] {
            *c = w / v as f64;
        }
        consumption[start + v - 1] = capacity;
        start += v;
    }

    let rounds = consumption
        .into_iter()
        .zip(charge)
        .map(|(c, contact)| OfflineRound {
            agents: vec![AgentRound {
                agent: 0,
                consumption: vec![c],
                contacts: vec![None, contact],
            }],
        })
        .collect();

    Ok(OfflineInstance {
        ranges: vec![0.0, range],
        charger_energy: kp.capacity as f64,
        battery_capacity: capacity,
        initial_levels: vec![0.0],
        battery_mode: BatteryMode::Carry,
        budget_rule: BudgetRule::PerRound,
        energy_denominator: None,
        rounds,
    })
}
