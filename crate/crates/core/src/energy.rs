//! Agent energy: heterogeneous Poisson consumption and battery bookkeeping.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

/// Probabilities of the four consumption groups.
pub const GROUP_PROBABILITIES: [f64; 4] = [0.5, 0.25, 0.125, 0.125];

/// Upper end of the mean-consumption interval of `group` (1-based): `10 * 2^(group-1)`.
pub fn group_rate_cap(group: u8) -> f64 {
    10.0 * f64::from(1u32 << (group.clamp(1, 4) - 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsumptionProfile {
    /// Poisson mean, in energy units per round.
    pub gamma: f64,
    pub group: u8,
}

impl ConsumptionProfile {
    /// One round's consumption.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_consumption(self, rng)
    }
}

/// Assigns each agent a group with probabilities (1/2, 1/4, 1/8, 1/8) and a
/// mean rate uniform in that group's interval.
pub fn assign_groups<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<ConsumptionProfile> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut group = 4u8;
            for (i, p) in GROUP_PROBABILITIES.iter().enumerate() {
                acc += p;
                if u < acc {
                    group = i as u8 + 1;
                    break;
                }
            }
            let gamma = rng.random_range(0.0..=group_rate_cap(group));
            ConsumptionProfile { gamma, group }
        })
        .collect()
}

/// A single Poisson draw with mean `profile.gamma`.
pub fn sample_consumption<R: Rng + ?Sized>(profile: &ConsumptionProfile, rng: &mut R) -> f64 {
    if profile.gamma <= 0.0 {
        return 0.0;
    }
    // gamma > 0 and finite is the only failure condition of Poisson::new.
    Poisson::new(profile.gamma)
        .map(|d| d.sample(rng))
        .unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Battery {
    pub level: f64,
    pub capacity: f64,
}

impl Battery {
    pub fn full(capacity: f64) -> Self {
        Battery {
            level: capacity,
            capacity,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.level <= 0.0
    }

    /// Level left after `consumed`, floored at zero.
    pub fn after_consumption(&self, consumed: f64) -> f64 {
        (self.level - consumed).max(0.0)
    }

    /// Room left for charging once this round's consumption is paid.
    pub fn headroom_after(&self, consumed: f64) -> f64 {
        (self.capacity - self.after_consumption(consumed)).max(0.0)
    }
}

/// Level after one round: consumption (floored at 0), then the delivered
/// energy, capped at capacity.
pub fn apply_round_energy(battery: Battery, consumed: f64, delivered: f64) -> Battery {
    Battery {
        level: (battery.after_consumption(consumed) + delivered).min(battery.capacity),
        capacity: battery.capacity,
    }
}
