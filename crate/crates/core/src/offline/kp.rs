use serde::{Deserialize, Serialize};

use super::OfflineError;

/// Largest knapsack capacity the DP accepts.
pub const MAX_KP_CAPACITY: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KpItem {
    pub value: u64,
    pub weight: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnapsackInstance {
    pub items: Vec<KpItem>,
    pub capacity: u64,
}

impl KnapsackInstance {
    pub fn new(items: &[(u64, u64)], capacity: u64) -> Self {
        KnapsackInstance {
            items: items.iter().map(|&(value, weight)| KpItem { value, weight }).collect(),
            capacity,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self, OfflineError> {
        let inst: KnapsackInstance = serde_json::from_str(s).map_err(|e| OfflineError::Knapsack(e.to_string()))?;
        inst.validate()?;
        Ok(inst)
    }

    /// Items must have positive value and weight.
    pub fn validate(&self) -> Result<(), OfflineError> {
        for (i, item) in self.items.iter().enumerate() {
            if item.value == 0 {
                return Err(OfflineError::Knapsack(format!("item {i} has zero value")));
            }
            if item.weight == 0 {
                return Err(OfflineError::Knapsack(format!("item {i} has zero weight")));
            }
        }
        Ok(())
    }
}

/// Optimal 0/1 knapsack value by dynamic programming over capacity.
pub fn solve_kp(inst: &KnapsackInstance) -> Result<u64, OfflineError> {
    if inst.capacity > MAX_KP_CAPACITY {
        return Err(OfflineError::TooLarge(format!(
            "capacity {} exceeds {MAX_KP_CAPACITY}",
            inst.capacity
        )));
    }
    let cap = inst.capacity as usize;
    let mut best = vec![0u64; cap + 1];
    for item in &inst.items {
        let w = item.weight as usize;
        if w > cap {
            continue;
        }
        for c in (w..=cap).rev() {
            best[c] = best[c].max(best[c - w] + item.value);
        }
    }
    Ok(best[cap])
}
