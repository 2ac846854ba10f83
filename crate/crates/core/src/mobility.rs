//! Random-walk mobility with three speed modes, plus the scenario constraints
//! (free movement, a forbidden central disk, ring-dwelling agents).

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{chord, Disk, Point, Segment};

/// Rejections allowed per agent during initial deployment.
pub const MAX_DEPLOY_REJECTIONS: usize = 100_000;
/// Redraws of (direction, velocity) before an agent is held in place.
pub const MAX_STEP_REDRAWS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum MobilityError {
    #[error("could not place agent {agent} after {MAX_DEPLOY_REJECTIONS} rejections; scenario geometry leaves no admissible region")]
    Deployment { agent: usize },
}

/// Rectangle spanned by `(0, 0)` and `(x_max, y_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub x_max: f64,
    pub y_max: f64,
}

impl Area {
    pub const fn new(x_max: f64, y_max: f64) -> Self {
        Area { x_max, y_max }
    }

    pub fn center(&self) -> Point {
        Point::new(self.x_max / 2.0, self.y_max / 2.0)
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0.0..=self.x_max).contains(&p.x) && (0.0..=self.y_max).contains(&p.y)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point::new(
            rng.random_range(0.0..=self.x_max),
            rng.random_range(0.0..=self.y_max),
        )
    }
}

impl Default for Area {
    fn default() -> Self {
        Area::new(25.0, 25.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpeedMode {
    Slow,
    Medium,
    Fast,
}

impl SpeedMode {
    pub const ALL: [SpeedMode; 3] = [SpeedMode::Slow, SpeedMode::Medium, SpeedMode::Fast];

    /// Mode number in `{1, 2, 3}`.
    pub fn index(self) -> u8 {
        match self {
            SpeedMode::Slow => 1,
            SpeedMode::Medium => 2,
            SpeedMode::Fast => 3,
        }
    }

    /// Bounds of the velocity interval: `[0, v/4]`, `(v/4, v/2]`, `(v/2, v]`.
    pub fn bounds(self, v_max: f64) -> (f64, f64) {
        match self {
            SpeedMode::Slow => (0.0, v_max / 4.0),
            SpeedMode::Medium => (v_max / 4.0, v_max / 2.0),
            SpeedMode::Fast => (v_max / 2.0, v_max),
        }
    }

    pub fn admits(self, v: f64, v_max: f64) -> bool {
        let (lo, hi) = self.bounds(v_max);
        match self {
            SpeedMode::Slow => (lo..=hi).contains(&v),
            _ => v > lo && v <= hi,
        }
    }

    pub fn sample_velocity<R: Rng + ?Sized>(self, v_max: f64, rng: &mut R) -> f64 {
        let (lo, hi) = self.bounds(v_max);
        let u: f64 = rng.random();
        match self {
            SpeedMode::Slow => lo + (hi - lo) * u,
            // hi - (hi - lo) * u with u in [0, 1) lands in (lo, hi]
            _ => hi - (hi - lo) * u,
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> SpeedMode {
        SpeedMode::ALL[rng.random_range(0..3)]
    }
}

/// A concrete mobility scenario for one repetition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MobilityScenario {
    Free,
    /// No trajectory may touch the disk of this radius around the charger.
    ForbiddenCircle { radius: f64 },
    /// The first `count` agents live in the ring `inner <= d <= outer`.
    RingDwellers { inner: f64, outer: f64, count: usize },
}

impl MobilityScenario {
    pub fn label(&self) -> &'static str {
        match self {
            MobilityScenario::Free => "free",
            MobilityScenario::ForbiddenCircle { .. } => "forbidden_circle",
            MobilityScenario::RingDwellers { .. } => "ring_dwellers",
        }
    }

    /// Movement constraint for agent `id` around the charger at `center`.
    pub fn constraint_for(&self, id: usize, center: Point) -> Constraint {
        match *self {
            MobilityScenario::Free => Constraint::None,
            MobilityScenario::ForbiddenCircle { radius } => {
                Constraint::AvoidDisk(Disk::new(center, radius))
            }
            MobilityScenario::RingDwellers {
                inner,
                outer,
                count,
            } if id < count => Constraint::StayInRing {
                center,
                inner,
                outer,
            },
            MobilityScenario::RingDwellers { .. } => Constraint::None,
        }
    }
}

/// Per-agent restriction on positions and trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constraint {
    None,
    AvoidDisk(Disk),
    StayInRing { center: Point, inner: f64, outer: f64 },
}

impl Constraint {
    pub fn admits_point(&self, p: &Point) -> bool {
        match self {
            Constraint::None => true,
            Constraint::AvoidDisk(disk) => !disk.contains(p),
            Constraint::StayInRing {
                center,
                inner,
                outer,
            } => {
                let d = p.distance(center);
                d >= *inner && d <= *outer
            }
        }
    }

    /// Whether the whole segment respects the constraint.
    pub fn admits_segment(&self, seg: &Segment) -> bool {
        match self {
            Constraint::None => true,
            Constraint::AvoidDisk(disk) => chord(seg, disk).is_none(),
            Constraint::StayInRing {
                center,
                inner,
                outer,
            } => {
                // The outer disk is convex, so endpoints suffice for it.
                seg.start.distance(center) <= *outer
                    && seg.end.distance(center) <= *outer
                    && seg.distance_to(center) >= *inner
            }
        }
    }
}

/// Uniform initial positions, each admissible for its agent's constraint.
pub fn initial_deploy<R: Rng + ?Sized>(
    n: usize,
    area: &Area,
    scenario: &MobilityScenario,
    rng: &mut R,
) -> Result<Vec<Point>, MobilityError> {
    let center = area.center();
    (0..n)
        .map(|id| {
            let constraint = scenario.constraint_for(id, center);
            (0..MAX_DEPLOY_REJECTIONS)
                .map(|_| area.sample(rng))
                .find(|p| constraint.admits_point(p))
                .ok_or(MobilityError::Deployment { agent: id })
        })
        .collect()
}

/// Keeps the mode, or with probability `p_redraw` draws a fresh uniform one.
pub fn update_speed_mode<R: Rng + ?Sized>(current: SpeedMode, p_redraw: f64, rng: &mut R) -> SpeedMode {
    if rng.random_bool(p_redraw.clamp(0.0, 1.0)) {
        SpeedMode::random(rng)
    } else {
        current
    }
}

/// Outcome of one round of movement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub next: Point,
    pub velocity: f64,
    pub direction: f64,
}

/// End of a straight move of speed `velocity` for time `tau` along `theta`.
pub fn candidate_endpoint(pos: Point, velocity: f64, theta: f64, tau: f64) -> Point {
    pos.offset_polar(velocity * tau, theta)
}

/// One random-walk move. Direction and velocity are redrawn until the
/// endpoint stays in the area and the trajectory respects `constraint`;
/// after [`MAX_STEP_REDRAWS`] failures the agent stays put with zero speed.
pub fn step<R: Rng + ?Sized>(
    pos: Point,
    mode: SpeedMode,
    v_max: f64,
    tau: f64,
    area: &Area,
    constraint: &Constraint,
    rng: &mut R,
) -> Step {
    for _ in 0..MAX_STEP_REDRAWS {
        let direction = rng.random_range(0.0..TAU);
        let velocity = mode.sample_velocity(v_max, rng);
        let next = candidate_endpoint(pos, velocity, direction, tau);
        if area.contains(&next) && constraint.admits_segment(&Segment::new(pos, next)) {
            return Step {
                next,
                velocity,
                direction,
            };
        }
    }
    Step {
        next: pos,
        velocity: 0.0,
        direction: 0.0,
    }
}
