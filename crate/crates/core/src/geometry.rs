//! Planar vectors, angles and arc-length parameterized polylines.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(length: f64, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(length * c, length * s)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Rotate counter-clockwise by `angle` radians.
    pub fn rotate(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Map an angle into (-π, π]. Angles already in range are returned unchanged,
/// which makes the map exactly idempotent.
pub fn normalize_angle(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let r = theta.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Smallest absolute difference between two headings, in [0, π].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    normalize_angle(a - b).abs()
}

/// Closest point of a polyline to a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length of the closest point.
    pub station: f64,
    /// Signed lateral offset, positive to the left of the travel direction.
    pub lateral: f64,
    /// Tangent heading at the closest point.
    pub heading: f64,
}

/// A polyline with cumulative arc lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    points: Vec<Vec2>,
    stations: Vec<f64>,
}

impl Path {
    /// Consecutive duplicate points are dropped. Returns `None` when fewer
    /// than two distinct points remain.
    pub fn new(points: impl IntoIterator<Item = Vec2>) -> Option<Self> {
        let mut pts: Vec<Vec2> = Vec::new();
        for p in points {
            if pts.last().is_none_or(|last| (p - *last).norm() > 1e-9) {
                pts.push(p);
            }
        }
        if pts.len() < 2 {
            return None;
        }
        let mut stations = Vec::with_capacity(pts.len());
        let mut s = 0.0;
        stations.push(0.0);
        for w in pts.windows(2) {
            s += (w[1] - w[0]).norm();
            stations.push(s);
        }
        Some(Self {
            points: pts,
            stations,
        })
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        *self.stations.last().expect("path has points")
    }

    pub fn project(&self, p: Vec2) -> Projection {
        let mut best = Projection {
            station: 0.0,
            lateral: f64::INFINITY,
            heading: 0.0,
        };
        let mut best_d2 = f64::INFINITY;
        for (i, w) in self.points.windows(2).enumerate() {
            let seg = w[1] - w[0];
            let len2 = seg.norm_squared();
            let t = ((p - w[0]).dot(seg) / len2).clamp(0.0, 1.0);
            let foot = w[0] + seg * t;
            let d2 = (p - foot).norm_squared();
            if d2 < best_d2 {
                best_d2 = d2;
                let side = seg.cross(p - w[0]);
                let dist = d2.sqrt();
                best = Projection {
                    station: self.stations[i] + t * len2.sqrt(),
                    lateral: if side < 0.0 { -dist } else { dist },
                    heading: seg.angle(),
                };
            }
        }
        best
    }

    /// Point and tangent heading at arc length `s`, clamped to the path ends.
    pub fn point_at(&self, s: f64) -> (Vec2, f64) {
        let s = s.clamp(0.0, self.length());
        let i = match self.stations.partition_point(|&st| st <= s) {
            0 => 0,
            k => (k - 1).min(self.points.len() - 2),
        };
        let seg = self.points[i + 1] - self.points[i];
        let len = self.stations[i + 1] - self.stations[i];
        let t = if len > 0.0 {
            (s - self.stations[i]) / len
        } else {
            0.0
        };
        (self.points[i] + seg * t, seg.angle())
    }

    pub fn distance_to(&self, p: Vec2) -> f64 {
        self.project(p).lateral.abs()
    }
}
