//! Scene state: agents, ego, map context, histories and plans.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Path, Vec2};

/// Half of a standard 3.5 m lane.
pub const LANE_HALF_WIDTH: f64 = 1.75;

/// Default simulation and prediction step in seconds.
pub const DEFAULT_DT: f64 = 0.1;

macro_rules! id_type {
    ($name:ident, $prefix:literal) => {
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(AgentId, "");
id_type!(LaneId, "lane ");
id_type!(LightId, "light ");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Vehicle,
    Pedestrian,
    Bicycle,
}

/// Half-length (along heading) and half-width of a rectangular footprint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub half_length: f64,
    pub half_width: f64,
}

impl Extent {
    pub const fn new(half_length: f64, half_width: f64) -> Self {
        Self {
            half_length,
            half_width,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.half_length > 0.0 && self.half_width > 0.0
    }

    pub fn circumradius(&self) -> f64 {
        self.half_length.hypot(self.half_width)
    }

    /// Half-size of the footprint measured along a direction at `rel_heading`
    /// from the body axis.
    pub fn support(&self, rel_heading: f64) -> f64 {
        let (s, c) = rel_heading.sin_cos();
        self.half_length * c.abs() + self.half_width * s.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: AgentId,
    pub kind: AgentKind,
    pub position: Vec2,
    /// Radians in (-π, π]; also the direction of travel.
    pub heading: f64,
    /// m/s, non-negative.
    pub speed: f64,
    pub extent: Extent,
}

impl AgentState {
    pub fn velocity(&self) -> Vec2 {
        Vec2::from_polar(self.speed, self.heading)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    pub extent: Extent,
    /// Lanes the ego intends to drive, in order.
    pub route: Vec<LaneId>,
}

impl EgoState {
    pub fn velocity(&self) -> Vec2 {
        Vec2::from_polar(self.speed, self.heading)
    }

    pub fn pose(&self) -> Pose {
        Pose {
            position: self.position,
            heading: self.heading,
            speed: self.speed,
        }
    }

    pub fn set_pose(&mut self, pose: &Pose) {
        self.position = pose.position;
        self.heading = pose.heading;
        self.speed = pose.speed;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub id: LaneId,
    pub centerline: Vec<Vec2>,
    pub speed_limit: f64,
    /// Travel runs against the point order of `centerline`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reversed: bool,
}

impl Lane {
    /// Centerline ordered in the direction of travel.
    pub fn travel_points(&self) -> Vec<Vec2> {
        let mut pts = self.centerline.clone();
        if self.reversed {
            pts.reverse();
        }
        pts
    }

    pub fn path(&self) -> Option<Path> {
        Path::new(self.travel_points())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightState {
    Red,
    Green,
}

impl LightState {
    pub fn flipped(self) -> Self {
        match self {
            LightState::Red => LightState::Green,
            LightState::Green => LightState::Red,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficLight {
    pub id: LightId,
    pub lane: LaneId,
    /// Arc length of the stop line along the lane's direction of travel.
    pub station: f64,
    pub state: LightState,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MapContext {
    pub lanes: Vec<Lane>,
    #[serde(default)]
    pub traffic_lights: Vec<TrafficLight>,
}

impl MapContext {
    pub fn lane(&self, id: LaneId) -> Option<&Lane> {
        self.lanes.iter().find(|l| l.id == id)
    }

    pub fn light(&self, id: LightId) -> Option<&TrafficLight> {
        self.traffic_lights.iter().find(|l| l.id == id)
    }

    pub fn light_mut(&mut self, id: LightId) -> Option<&mut TrafficLight> {
        self.traffic_lights.iter_mut().find(|l| l.id == id)
    }

    /// Concatenate the lanes of a route into one travel path.
    pub fn route_path(&self, route: &[LaneId]) -> Option<RoutePath> {
        let mut points = Vec::new();
        let mut lane_starts = Vec::with_capacity(route.len());
        for id in route {
            let lane = self.lane(*id)?;
            let lane_path = lane.path()?;
            let start = match Path::new(points.iter().copied()) {
                Some(p) => {
                    // The lane's first point joins the previous lane's last one.
                    let gap = (lane_path.points()[0] - *points.last().unwrap()).norm();
                    p.length() + gap
                }
                None => 0.0,
            };
            lane_starts.push((*id, start));
            points.extend(lane_path.points().iter().copied());
        }
        let path = Path::new(points)?;
        Some(RoutePath { path, lane_starts })
    }
}

/// A route path that remembers where each lane begins.
#[derive(Debug, Clone)]
pub struct RoutePath {
    pub path: Path,
    lane_starts: Vec<(LaneId, f64)>,
}

impl RoutePath {
    /// Path station of a point given by lane-local station.
    pub fn station_of(&self, lane: LaneId, lane_station: f64) -> Option<f64> {
        self.lane_starts
            .iter()
            .find(|(id, _)| *id == lane)
            .map(|(_, start)| start + lane_station)
    }

    /// Lane covering a path station.
    pub fn lane_at(&self, station: f64) -> LaneId {
        self.lane_starts
            .iter()
            .rev()
            .find(|(_, start)| *start <= station)
            .or(self.lane_starts.first())
            .map(|(id, _)| *id)
            .expect("route has lanes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub time: f64,
    pub ego: EgoState,
    pub agents: Vec<AgentState>,
    pub map: Arc<MapContext>,
}

impl WorldState {
    pub fn agent(&self, id: AgentId) -> Option<&AgentState> {
        self.agents.iter().find(|a| a.id == id)
    }

    pub fn agent_mut(&mut self, id: AgentId) -> Option<&mut AgentState> {
        self.agents.iter_mut().find(|a| a.id == id)
    }

    pub fn remove_agent(&mut self, id: AgentId) -> Option<AgentState> {
        let idx = self.agents.iter().position(|a| a.id == id)?;
        Some(self.agents.remove(idx))
    }
}

/// Time-ordered world states at a fixed step.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldHistory {
    dt: f64,
    states: Vec<WorldState>,
}

impl WorldHistory {
    pub fn new(dt: f64, states: Vec<WorldState>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param(format!("history dt must be positive, got {dt}")));
        }
        if states.is_empty() {
            return Err(Error::param("history must be non-empty"));
        }
        for w in states.windows(2) {
            let step = w[1].time - w[0].time;
            if (step - dt).abs() > 1e-6 * dt.max(1.0) {
                return Err(Error::param(format!(
                    "history step {step} at t={} differs from dt={dt}",
                    w[0].time
                )));
            }
        }
        Ok(Self { dt, states })
    }

    pub fn single(state: WorldState, dt: f64) -> Result<Self> {
        Self::new(dt, vec![state])
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn states(&self) -> &[WorldState] {
        &self.states
    }

    pub fn latest(&self) -> &WorldState {
        self.states.last().expect("history is non-empty")
    }

    /// Replace the latest state, keeping the earlier ones.
    pub fn with_latest(&self, state: WorldState) -> Self {
        let mut states = self.states.clone();
        *states.last_mut().expect("history is non-empty") = state;
        Self { dt: self.dt, states }
    }

    pub fn push(&mut self, state: WorldState) {
        self.states.push(state);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
}

/// Ego motion plan: `poses[k]` is the pose at `(k + 1) * dt` after planning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoPlan {
    pub dt: f64,
    pub poses: Vec<Pose>,
}

impl EgoPlan {
    pub fn horizon(&self) -> usize {
        self.poses.len()
    }

    /// Checks the per-step displacement bound against `start`.
    pub fn is_kinematically_continuous(&self, start: &Pose, tolerance: f64) -> bool {
        let mut prev = *start;
        for pose in &self.poses {
            let step = (pose.position - prev.position).norm();
            if step > prev.speed.max(pose.speed) * self.dt + tolerance {
                return false;
            }
            prev = *pose;
        }
        true
    }

    /// Rigidly move the plan from `from` to `to`.
    pub fn transformed(&self, from: &Pose, to: &Pose) -> EgoPlan {
        let rot = normalize_angle(to.heading - from.heading);
        let poses = self
            .poses
            .iter()
            .map(|p| Pose {
                position: to.position + (p.position - from.position).rotate(rot),
                heading: normalize_angle(p.heading + rot),
                speed: p.speed,
            })
            .collect();
        EgoPlan { dt: self.dt, poses }
    }
}
