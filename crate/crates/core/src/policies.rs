//! Charging-range policies.
//!
//! Every policy declares a [`Knowledge`] level and only ever receives a
//! [`RoundView`] filtered down to that level:
//!
//! | policy        | knowledge                                                  |
//! |---------------|------------------------------------------------------------|
//! | fixed, random | none                                                       |
//! | LdMax         | current positions of agents inside the maximum range       |
//! | MWA           | current and next positions and energy levels of all agents |
//! | MCER          | MWA's fields plus velocities and this round's consumption  |

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::charging::{execute_charging_round, AgentRoundInput, ChargerState, RangeBounds};
use crate::energy::Battery;
use crate::geom::{Disk, Point, Segment};
use crate::SimRng;

/// Relative slack added to an MWA covering radius so that the covered agent
/// ends up with a positive in-range time instead of a single touching point.
pub const MWA_COVER_SLACK: f64 = 1e-9;

/// Default number of evenly spaced MCER candidate ranges.
pub const MCER_DEFAULT_GRID: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Knowledge {
    Oblivious,
    NearbyPositions,
    PositionsAndEnergy,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentObservation {
    pub id: usize,
    pub position: Point,
    pub next_position: Option<Point>,
    pub velocity: Option<f64>,
    pub energy: Option<f64>,
    pub consumption: Option<f64>,
}

/// Per-round information handed to a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundView {
    pub round: u32,
    pub agents: Vec<AgentObservation>,
    /// Charger state at the start of the round (range not yet chosen).
    pub charger: ChargerState,
    pub battery_capacity: f64,
    pub tau: f64,
}

impl RoundView {
    pub fn bounds(&self) -> RangeBounds {
        self.charger.bounds
    }

    pub fn max_disk(&self) -> Disk {
        Disk::new(self.charger.position, self.charger.bounds.max)
    }

    /// Copy of the view with everything above `level` removed.
    pub fn restricted(&self, level: Knowledge) -> RoundView {
        let max_disk = self.max_disk();
        let agents = match level {
            Knowledge::Oblivious => Vec::new(),
            Knowledge::NearbyPositions => self
                .agents
                .iter()
                .filter(|a| max_disk.contains(&a.position))
                .map(|a| AgentObservation {
                    id: a.id,
                    position: a.position,
                    next_position: None,
                    velocity: None,
                    energy: None,
                    consumption: None,
                })
                .collect(),
            Knowledge::PositionsAndEnergy => self
                .agents
                .iter()
                .map(|a| AgentObservation {
                    velocity: None,
                    consumption: None,
                    ..*a
                })
                .collect(),
            Knowledge::Full => self.agents.clone(),
        };
        RoundView {
            agents,
            ..self.clone()
        }
    }
}

pub trait Policy: Send {
    fn knowledge(&self) -> Knowledge;

    /// Range for this round; callers clamp to the charger bounds.
    fn decide(&mut self, view: &RoundView, rng: &mut SimRng) -> f64;

    fn label(&self) -> String;
}

#[derive(Debug, Clone)]
pub struct FixedRange {
    pub range: f64,
}

impl Policy for FixedRange {
    fn knowledge(&self) -> Knowledge {
        Knowledge::Oblivious
    }

    fn decide(&mut self, _view: &RoundView, _rng: &mut SimRng) -> f64 {
        self.range
    }

    fn label(&self) -> String {
        format!("fixed({})", self.range)
    }
}

/// `R_min` with probability `p_min`, `R_max` otherwise.
#[derive(Debug, Clone)]
pub struct RandMinMax {
    pub p_min: f64,
}

pub fn rand_min_max<R: Rng + ?Sized>(bounds: RangeBounds, p_min: f64, rng: &mut R) -> f64 {
    if rng.random_bool(p_min.clamp(0.0, 1.0)) {
        bounds.min
    } else {
        bounds.max
    }
}

impl Policy for RandMinMax {
    fn knowledge(&self) -> Knowledge {
        Knowledge::Oblivious
    }

    fn decide(&mut self, view: &RoundView, rng: &mut SimRng) -> f64 {
        rand_min_max(view.bounds(), self.p_min, rng)
    }

    fn label(&self) -> String {
        format!("rand_min_max({})", self.p_min)
    }
}

/// Least distant agent or maximum range.
#[derive(Debug, Clone)]
pub struct LdMax {
    pub q: f64,
}

/// LdMax's deterministic branch: distance of the nearest agent inside the
/// maximum range, at least `R_min`; `R_max` when nobody is that close.
pub fn least_distant_range(view: &RoundView) -> f64 {
    let bounds = view.bounds();
    let max_disk = view.max_disk();
    view.agents
        .iter()
        .filter(|a| max_disk.contains(&a.position))
        .map(|a| a.position.distance(&view.charger.position))
        .min_by(f64::total_cmp)
        .map_or(bounds.max, |d| d.max(bounds.min))
}

impl Policy for LdMax {
    fn knowledge(&self) -> Knowledge {
        Knowledge::NearbyPositions
    }

    fn decide(&mut self, view: &RoundView, rng: &mut SimRng) -> f64 {
        if rng.random_bool(self.q.clamp(0.0, 1.0)) {
            least_distant_range(view)
        } else {
            view.bounds().max
        }
    }

    fn label(&self) -> String {
        format!("ldmax({})", self.q)
    }
}

/// Maintain at least `mu` working agents.
#[derive(Debug, Clone)]
pub struct Mwa {
    pub mu: usize,
}

/// Smallest radius covering `needed` of the candidate cover distances.
/// `needed == 0` needs no radius at all.
pub fn smallest_covering_radius(cover_distances: &[f64], needed: usize) -> Option<f64> {
    if needed == 0 {
        return Some(0.0);
    }
    let mut sorted = cover_distances.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.get(needed - 1).copied()
}

/// Distance at which a zero-energy agent becomes reachable: its closest
/// approach to the charger over the round's trajectory (start position for
/// agents whose next position is unknown).
fn cover_distance(a: &AgentObservation, charger: Point) -> f64 {
    match a.next_position {
        Some(next) => Segment::new(a.position, next).distance_to(&charger),
        None => a.position.distance(&charger),
    }
}

pub fn mwa_range(view: &RoundView, mu: usize) -> f64 {
    let bounds = view.bounds();
    let max_disk = view.max_disk();
    let charger = view.charger.position;
    let positive = |a: &AgentObservation| a.energy.is_some_and(|e| e > 0.0);

    let k1 = view
        .agents
        .iter()
        .filter(|a| positive(a) && max_disk.contains(&a.position))
        .count();
    if k1 >= mu {
        return bounds.min;
    }

    let zero_energy: Vec<f64> = view
        .agents
        .iter()
        .filter(|a| !positive(a))
        .filter(|a| {
            max_disk.contains(&a.position) || a.next_position.is_some_and(|p| max_disk.contains(&p))
        })
        .map(|a| cover_distance(a, charger))
        .collect();
    let needed = mu - k1;
    match smallest_covering_radius(&zero_energy, needed) {
        Some(r) => bounds.clamp(r * (1.0 + MWA_COVER_SLACK)),
        None => bounds.max,
    }
}

impl Policy for Mwa {
    fn knowledge(&self) -> Knowledge {
        Knowledge::PositionsAndEnergy
    }

    fn decide(&mut self, view: &RoundView, _rng: &mut SimRng) -> f64 {
        mwa_range(view, self.mu)
    }

    fn label(&self) -> String {
        format!("mwa({})", self.mu)
    }
}

/// Maximize charges over energy: picks the grid range with the best
/// `charges^lambda / energy` in a dry run of this round's charging.
#[derive(Debug, Clone)]
pub struct Mcer {
    pub lambda: f64,
    pub grid: Vec<f64>,
}

impl Mcer {
    /// `points` evenly spaced values from `bounds.min` to `bounds.max`.
    pub fn even_grid(bounds: RangeBounds, points: usize) -> Vec<f64> {
        match points {
            0 => Vec::new(),
            1 => vec![bounds.min],
            _ => (0..points)
                .map(|i| bounds.min + (bounds.max - bounds.min) * i as f64 / (points - 1) as f64)
                .collect(),
        }
    }
}

/// Score `nu^lambda / eps`, zero when nobody is charged.
pub fn mcer_score(charges: usize, energy: f64, lambda: f64) -> f64 {
    if charges == 0 || energy <= 0.0 {
        0.0
    } else {
        (charges as f64).powf(lambda) / energy
    }
}

/// Grid entry with the highest score; ties go to the smaller range, and an
/// all-zero table yields `fallback`.
pub fn mcer_pick(scored: &[(f64, f64)], fallback: f64) -> f64 {
    let mut best: Option<(f64, f64)> = None;
    for &(range, score) in scored {
        if score <= 0.0 {
            continue;
        }
        best = match best {
            Some((r, s)) if s > score || (s == score && r <= range) => Some((r, s)),
            _ => Some((range, score)),
        };
    }
    best.map_or(fallback, |(r, _)| r)
}

pub fn mcer_range(view: &RoundView, lambda: f64, grid: &[f64]) -> f64 {
    let inputs: Vec<AgentRoundInput> = view
        .agents
        .iter()
        .filter_map(|a| {
            Some(AgentRoundInput {
                id: a.id,
                trajectory: Segment::new(a.position, a.next_position?),
                velocity: a.velocity?,
                battery: Battery {
                    level: a.energy?,
                    capacity: view.battery_capacity,
                },
                consumed: a.consumption?,
            })
        })
        .collect();
    let scored: Vec<(f64, f64)> = grid
        .iter()
        .map(|&range| {
            let mut trial = view.charger.clone();
            trial.range = range;
            let out = execute_charging_round(&mut trial, &inputs, view.tau, view.round);
            (range, mcer_score(out.charges(), out.total_delivered(), lambda))
        })
        .collect();
    mcer_pick(&scored, view.bounds().min)
}

impl Policy for Mcer {
    fn knowledge(&self) -> Knowledge {
        Knowledge::Full
    }

    fn decide(&mut self, view: &RoundView, _rng: &mut SimRng) -> f64 {
        mcer_range(view, self.lambda, &self.grid)
    }

    fn label(&self) -> String {
        format!("mcer({})", self.lambda)
    }
}

/// Declarative policy choice, as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    Fixed {
        range: f64,
    },
    RandMinMax {
        #[serde(default = "half")]
        p: f64,
    },
    Ldmax {
        #[serde(default = "default_q")]
        q: f64,
    },
    Mwa {
        #[serde(default = "default_mu")]
        mu: usize,
    },
    Mcer {
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid: Option<Vec<f64>>,
    },
}

fn half() -> f64 {
    0.5
}
fn default_q() -> f64 {
    0.9
}
fn default_mu() -> usize {
    15
}
fn default_lambda() -> f64 {
    2.0
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PolicyError {
    #[error("fixed range {range} outside [{min}, {max}]")]
    RangeOutOfBounds { range: f64, min: f64, max: f64 },
    #[error("probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("mwa needs 1 <= mu <= n (mu = {mu}, n = {n})")]
    Mu { mu: usize, n: usize },
    #[error("mcer needs lambda >= 1 (got {0})")]
    Lambda(f64),
    #[error("mcer grid must be non-empty and inside the range bounds")]
    Grid,
}

impl PolicySpec {
    pub fn validate(&self, bounds: RangeBounds, n: usize) -> Result<(), PolicyError> {
        let prob = |p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(PolicyError::Probability(p))
            }
        };
        match self {
            PolicySpec::Fixed { range } if !bounds.contains(*range) => Err(PolicyError::RangeOutOfBounds {
                range: *range,
                min: bounds.min,
                max: bounds.max,
            }),
            PolicySpec::Fixed { .. } => Ok(()),
            PolicySpec::RandMinMax { p } => prob(*p),
            PolicySpec::Ldmax { q } => prob(*q),
            PolicySpec::Mwa { mu } if *mu < 1 || *mu > n => Err(PolicyError::Mu { mu: *mu, n }),
            PolicySpec::Mwa { .. } => Ok(()),
            PolicySpec::Mcer { lambda, .. } if !(*lambda >= 1.0) => Err(PolicyError::Lambda(*lambda)),
            PolicySpec::Mcer { grid: Some(g), .. } if g.is_empty() || g.iter().any(|r| !bounds.contains(*r)) => {
                Err(PolicyError::Grid)
            }
            PolicySpec::Mcer { .. } => Ok(()),
        }
    }

    pub fn build(&self, bounds: RangeBounds) -> Box<dyn Policy> {
        match self {
            PolicySpec::Fixed { range } => Box::new(FixedRange { range: *range }),
            PolicySpec::RandMinMax { p } => Box::new(RandMinMax { p_min: *p }),
            PolicySpec::Ldmax { q } => Box::new(LdMax { q: *q }),
            PolicySpec::Mwa { mu } => Box::new(Mwa { mu: *mu }),
            PolicySpec::Mcer { lambda, grid } => Box::new(Mcer {
                lambda: *lambda,
                grid: grid
                    .clone()
                    .unwrap_or_else(|| Mcer::even_grid(bounds, MCER_DEFAULT_GRID)),
            }),
        }
    }

    pub fn label(&self) -> String {
        self.build(RangeBounds { min: 0.0, max: 0.0 }).label()
    }
}
