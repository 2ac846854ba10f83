//! Planar geometry: points, segments, disks and the segment/disk chord that
//! determines how long a moving agent stays inside the charging range.

use serde::{Deserialize, Serialize};

/// Discriminants in `[-DISCRIMINANT_SLACK, 0)` are treated as tangency.
const DISCRIMINANT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_squared(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Point reached after travelling `length` along direction `theta` (radians).
    pub fn offset_polar(&self, length: f64, theta: f64) -> Point {
        Point::new(self.x + length * theta.cos(), self.y + length * theta.sin())
    }

    fn lerp(&self, other: &Point, s: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * s,
            self.y + (other.y - self.y) * s,
        )
    }
}

/// Directed straight-line trajectory; `start == end` describes a static agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: Point,
    pub end: Point,
}

impl Segment {
    pub const fn new(start: Point, end: Point) -> Self {
        Segment { start, end }
    }

    pub const fn stationary(at: Point) -> Self {
        Segment { start: at, end: at }
    }

    pub fn length(&self) -> f64 {
        self.start.distance(&self.end)
    }

    pub fn is_degenerate(&self) -> bool {
        self.start == self.end
    }

    /// Point at parameter `s` in `[0, 1]` along the segment.
    pub fn at(&self, s: f64) -> Point {
        self.start.lerp(&self.end, s)
    }

    /// Euclidean distance from `p` to the closest point of the segment.
    pub fn distance_to(&self, p: &Point) -> f64 {
        let dx = self.end.x - self.start.x;
        let dy = self.end.y - self.start.y;
        let len2 = dx * dx + dy * dy;
        if len2 == 0.0 {
            return self.start.distance(p);
        }
        let s = ((p.x - self.start.x) * dx + (p.y - self.start.y) * dy) / len2;
        self.at(s.clamp(0.0, 1.0)).distance(p)
    }
}

/// Closed disk. The boundary counts as inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Point,
    pub radius: f64,
}

impl Disk {
    pub const fn new(center: Point, radius: f64) -> Self {
        Disk { center, radius }
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.distance_squared(&self.center) <= self.radius * self.radius
    }
}

/// The maximal closed sub-segment of a trajectory lying inside a disk.
///
/// `entry` and `exit` are the segment parameters (in `[0, 1]`) of the first
/// and last in-range points, so `entry <= exit` always holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chord {
    pub first: Point,
    pub last: Point,
    pub entry: f64,
    pub exit: f64,
}

impl Chord {
    pub fn length(&self) -> f64 {
        self.first.distance(&self.last)
    }

    /// A single touching point (tangency, or a static agent).
    pub fn is_point(&self) -> bool {
        self.first == self.last
    }
}

/// Intersects a trajectory with a closed disk.
///
/// Returns `None` when the segment misses the disk. Tangent segments yield a
/// chord whose first and last points coincide.
pub fn chord(seg: &Segment, disk: &Disk) -> Option<Chord> {
    let r = disk.radius.max(0.0);
    let dx = seg.end.x - seg.start.x;
    let dy = seg.end.y - seg.start.y;
    let fx = seg.start.x - disk.center.x;
    let fy = seg.start.y - disk.center.y;

    // |f + s d|^2 = r^2  ->  a s^2 + 2 h s + c = 0
    let a = dx * dx + dy * dy;
    let h = fx * dx + fy * dy;
    let c = fx * fx + fy * fy - r * r;

    if a == 0.0 {
        return (c <= 0.0).then_some(Chord {
            first: seg.start,
            last: seg.start,
            entry: 0.0,
            exit: 0.0,
        });
    }

    let mut disc = h * h - a * c;
    if disc < 0.0 {
        if disc < -DISCRIMINANT_SLACK {
            return None;
        }
        disc = 0.0;
    }

    // Stable root pair: q = -(h + sign(h) sqrt(disc)), roots q/a and c/q.
    let sq = disc.sqrt();
    let q = -(h + if h >= 0.0 { sq } else { -sq });
    let (r1, r2) = if q == 0.0 {
        (0.0, 0.0)
    } else {
        (q / a, c / q)
    };
    let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };

    let entry = lo.max(0.0);
    let exit = hi.min(1.0);
    if entry > exit {
        return None;
    }

    let first = if entry == 0.0 { seg.start } else { seg.at(entry) };
    let last = if exit == entry {
        first
    } else if exit == 1.0 {
        seg.end
    } else {
        seg.at(exit)
    };
    Some(Chord {
        first,
        last,
        entry,
        exit,
    })
}

/// Time an agent spends inside `disk` during a round of length `tau`, moving
/// along `seg` at speed `velocity`.
///
/// A moving agent contributes its chord length divided by its speed; a
/// static agent inside the disk stays the full round; everything else,
/// including tangency at non-zero speed, contributes nothing.
pub fn in_range_time(seg: &Segment, disk: &Disk, velocity: f64, tau: f64) -> f64 {
    match chord(seg, disk) {
        Some(ch) if !ch.is_point() && velocity != 0.0 => (ch.length() / velocity).clamp(0.0, tau),
        Some(ch) if ch.is_point() && velocity == 0.0 => tau,
        _ => 0.0,
    }
}
