//! Scenario description: map, initial scene, agent policies and faults.
//!
//! This is the only serialized form of the scene types. Files carry a
//! `schema_version` so the loader can reject incompatible corpora early.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_PI_6, PI};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::world::{
    AgentId, AgentKind, AgentState, EgoState, LaneId, LightId, MapContext, WorldState, DEFAULT_DT,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultMode {
    MisdetectOrientation,
    MisdetectSize,
    MisdetectVelocity,
    MisdetectTrafficLight,
    GhostObstacle,
    MissingObstacle,
    Mislocalization,
}

impl FaultMode {
    pub const ALL: [FaultMode; 7] = [
        FaultMode::MisdetectOrientation,
        FaultMode::MisdetectSize,
        FaultMode::MisdetectVelocity,
        FaultMode::MisdetectTrafficLight,
        FaultMode::GhostObstacle,
        FaultMode::MissingObstacle,
        FaultMode::Mislocalization,
    ];

    /// Modes whose target is an agent id.
    pub fn targets_agent(self) -> bool {
        matches!(
            self,
            FaultMode::MisdetectOrientation
                | FaultMode::MisdetectSize
                | FaultMode::MisdetectVelocity
                | FaultMode::MissingObstacle
        )
    }

    pub fn is_misdetection(self) -> bool {
        matches!(
            self,
            FaultMode::MisdetectOrientation
                | FaultMode::MisdetectSize
                | FaultMode::MisdetectVelocity
                | FaultMode::MisdetectTrafficLight
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FaultMode::MisdetectOrientation => "misdetect_orientation",
            FaultMode::MisdetectSize => "misdetect_size",
            FaultMode::MisdetectVelocity => "misdetect_velocity",
            FaultMode::MisdetectTrafficLight => "misdetect_traffic_light",
            FaultMode::GhostObstacle => "ghost_obstacle",
            FaultMode::MissingObstacle => "missing_obstacle",
            FaultMode::Mislocalization => "mislocalization",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultSubtype {
    InPath,
    NotInPath,
    #[default]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    #[default]
    Static,
    Dynamic,
}

/// Where a fabricated ghost appears, relative to the ego route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GhostPlacement {
    /// Route arc length of the ghost center.
    pub station: f64,
    /// Signed lateral offset from the route centerline.
    #[serde(default)]
    pub lateral: f64,
    #[serde(default = "default_ghost_kind")]
    pub kind: AgentKind,
    #[serde(default)]
    pub speed: f64,
    /// Heading relative to the route tangent.
    #[serde(default)]
    pub heading_offset: f64,
}

fn default_ghost_kind() -> AgentKind {
    AgentKind::Vehicle
}

/// Mode-specific noise parameters. Unset fields fall back to per-mode defaults.
///
/// | mode | `mean` / `std` meaning | default |
/// |---|---|---|
/// | misdetect_orientation | heading offset (rad) | π/6, 0.1 |
/// | misdetect_size | extent scale factor | 1.5, 0.1 |
/// | misdetect_velocity | speed scale factor | 0.3, 0.05 |
/// | mislocalization | position offset `offset` (m), `std` per axis | (1, 1), 0.2 |
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
    /// Extra heading offset for velocity misdetections (direction error).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading_offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Vec2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading_std: Option<f64>,
    /// Dynamic schedules: activation probability per second.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation_rate: Option<f64>,
    /// Dynamic schedules: minimum active duration in seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_duration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ghost: Option<GhostPlacement>,
}

impl FaultParams {
    pub fn mean_or(&self, mode: FaultMode) -> f64 {
        self.mean.unwrap_or(match mode {
            FaultMode::MisdetectOrientation => FRAC_PI_6,
            FaultMode::MisdetectSize => 1.5,
            FaultMode::MisdetectVelocity => 0.3,
            _ => 0.0,
        })
    }

    pub fn std_or(&self, mode: FaultMode) -> f64 {
        self.std.unwrap_or(match mode {
            FaultMode::MisdetectOrientation => 0.1,
            FaultMode::MisdetectSize => 0.1,
            FaultMode::MisdetectVelocity => 0.05,
            FaultMode::Mislocalization => 0.2,
            _ => 0.0,
        })
    }

    pub fn offset_or_default(&self) -> Vec2 {
        self.offset.unwrap_or(Vec2::new(1.0, 1.0))
    }

    pub fn heading_std_or_default(&self) -> f64 {
        self.heading_std.unwrap_or(0.05)
    }

    pub fn activation_rate_or_default(&self) -> f64 {
        self.activation_rate.unwrap_or(0.25)
    }

    pub fn min_duration_or_default(&self) -> f64 {
        self.min_duration.unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub mode: FaultMode,
    #[serde(default)]
    pub subtype: FaultSubtype,
    #[serde(default)]
    pub schedule: ScheduleKind,
    /// Agent id for agent faults, light id for traffic-light faults.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<u32>,
    #[serde(default)]
    pub params: FaultParams,
}

impl FaultSpec {
    pub fn target_agent(&self) -> Option<AgentId> {
        self.target
            .filter(|_| self.mode.targets_agent() || self.mode == FaultMode::GhostObstacle)
            .map(AgentId)
    }

    pub fn target_light(&self) -> Option<LightId> {
        self.target
            .filter(|_| self.mode == FaultMode::MisdetectTrafficLight)
            .map(LightId)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AgentPolicy {
    /// Car-following along a lane sequence.
    Idm {
        route: Vec<LaneId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        desired_speed: Option<f64>,
    },
    /// Open-loop replay of a recorded trajectory.
    Replay { trajectory: Vec<Waypoint> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialScene {
    pub ego: EgoState,
    #[serde(default)]
    pub agents: Vec<AgentState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub map: MapContext,
    pub initial: InitialScene,
    #[serde(default)]
    pub policies: BTreeMap<AgentId, AgentPolicy>,
    #[serde(default)]
    pub faults: Vec<FaultSpec>,
    pub duration: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

impl ScenarioSpec {
    pub fn initial_world(&self) -> WorldState {
        WorldState {
            time: 0.0,
            ego: self.initial.ego.clone(),
            agents: self.initial.agents.clone(),
            map: Arc::new(self.map.clone()),
        }
    }

    /// Number of simulation steps, if `duration / dt` is integral.
    pub fn step_count(&self) -> Option<usize> {
        let ratio = self.duration / self.dt;
        let rounded = ratio.round();
        if ratio.is_finite() && rounded >= 1.0 && (ratio - rounded).abs() <= 1e-6 {
            Some(rounded as usize)
        } else {
            None
        }
    }

    pub fn without_faults(&self) -> ScenarioSpec {
        ScenarioSpec {
            faults: Vec::new(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

fn check_body(
    out: &mut Vec<Violation>,
    field: &str,
    position: Vec2,
    heading: f64,
    speed: f64,
    extent_ok: bool,
) {
    if !extent_ok {
        out.push(Violation::new(field, "extent must be positive"));
    }
    if !position.is_finite() {
        out.push(Violation::new(field, "position must be finite"));
    }
    if !(heading > -PI && heading <= PI) {
        out.push(Violation::new(field, "heading must be normalized to (-pi, pi]"));
    }
    if !(speed >= 0.0 && speed.is_finite()) {
        out.push(Violation::new(field, "speed must be non-negative"));
    }
}

/// Check every type invariant of a scenario. An empty result means valid.
pub fn validate_scenario(spec: &ScenarioSpec) -> Vec<Violation> {
    let mut out = Vec::new();

    if spec.schema_version != SCHEMA_VERSION {
        out.push(Violation::new(
            "schema_version",
            format!("expected {SCHEMA_VERSION}, found {}", spec.schema_version),
        ));
    }

    let mut lane_ids = BTreeSet::new();
    for lane in &spec.map.lanes {
        let field = format!("lane {}", lane.id.0);
        if !lane_ids.insert(lane.id) {
            out.push(Violation::new(&field, "duplicate lane id"));
        }
        if lane.centerline.len() < 2 {
            out.push(Violation::new(&field, "polyline needs at least 2 points"));
        } else if lane.path().is_none() {
            out.push(Violation::new(&field, "polyline has zero length"));
        }
        if !(lane.speed_limit > 0.0 && lane.speed_limit.is_finite()) {
            out.push(Violation::new(&field, "speed_limit must be positive"));
        }
    }

    let mut light_ids = BTreeSet::new();
    for light in &spec.map.traffic_lights {
        let field = format!("light {}", light.id.0);
        if !light_ids.insert(light.id) {
            out.push(Violation::new(&field, "duplicate light id"));
        }
        if !lane_ids.contains(&light.lane) {
            out.push(Violation::new(&field, "stop point references unknown lane"));
        }
        if !(light.station >= 0.0 && light.station.is_finite()) {
            out.push(Violation::new(&field, "station must be non-negative"));
        }
    }

    let ego = &spec.initial.ego;
    check_body(
        &mut out,
        "ego",
        ego.position,
        ego.heading,
        ego.speed,
        ego.extent.is_positive(),
    );
    if ego.route.is_empty() {
        out.push(Violation::new("ego", "route must be non-empty"));
    }
    for lane in &ego.route {
        if !lane_ids.contains(lane) {
            out.push(Violation::new("ego", format!("route references unknown {lane}")));
        }
    }

    let mut agent_ids = BTreeSet::new();
    for agent in &spec.initial.agents {
        let field = format!("agent {}", agent.id.0);
        if !agent_ids.insert(agent.id) {
            out.push(Violation::new(&field, "duplicate agent id"));
        }
        check_body(
            &mut out,
            &field,
            agent.position,
            agent.heading,
            agent.speed,
            agent.extent.is_positive(),
        );
        match spec.policies.get(&agent.id) {
            None => out.push(Violation::new(&field, "missing policy")),
            Some(AgentPolicy::Idm { route, desired_speed }) => {
                if route.is_empty() {
                    out.push(Violation::new(&field, "idm route must be non-empty"));
                }
                for lane in route {
                    if !lane_ids.contains(lane) {
                        out.push(Violation::new(
                            &field,
                            format!("idm route references unknown {lane}"),
                        ));
                    }
                }
                if desired_speed.is_some_and(|v| !(v > 0.0)) {
                    out.push(Violation::new(&field, "desired_speed must be positive"));
                }
            }
            Some(AgentPolicy::Replay { trajectory }) => {
                if trajectory.is_empty() {
                    out.push(Violation::new(&field, "replay trajectory must be non-empty"));
                }
                if trajectory.windows(2).any(|w| !(w[1].t > w[0].t)) {
                    out.push(Violation::new(&field, "replay times must increase"));
                }
            }
        }
    }
    for id in spec.policies.keys() {
        if !agent_ids.contains(id) {
            out.push(Violation::new(
                format!("policy {}", id.0),
                "references unknown agent",
            ));
        }
    }

    for (i, fault) in spec.faults.iter().enumerate() {
        let field = format!("fault {i}");
        let is_obstacle = matches!(
            fault.mode,
            FaultMode::GhostObstacle | FaultMode::MissingObstacle
        );
        if is_obstacle && fault.subtype == FaultSubtype::None {
            out.push(Violation::new(&field, "ghost/missing faults require a subtype"));
        }
        let needs_target = fault.mode.is_misdetection() || fault.mode == FaultMode::MissingObstacle;
        match fault.target {
            None if needs_target => out.push(Violation::new(&field, "target required")),
            Some(t) if fault.mode == FaultMode::MisdetectTrafficLight => {
                if !light_ids.contains(&LightId(t)) {
                    out.push(Violation::new(&field, "unknown target"));
                }
            }
            Some(t) if fault.mode.targets_agent() => {
                if !agent_ids.contains(&AgentId(t)) {
                    out.push(Violation::new(&field, "unknown target"));
                }
            }
            Some(t) if fault.mode == FaultMode::GhostObstacle => {
                if agent_ids.contains(&AgentId(t)) {
                    out.push(Violation::new(&field, "ghost id collides with a real agent"));
                }
            }
            Some(_) if fault.mode == FaultMode::Mislocalization => {
                out.push(Violation::new(&field, "mislocalization takes no target"));
            }
            _ => {}
        }
        if let Some(rate) = fault.params.activation_rate {
            if !(0.0..=1.0).contains(&rate) {
                out.push(Violation::new(&field, "activation_rate must be in [0, 1]"));
            }
        }
        if fault.params.std.is_some_and(|s| !(s >= 0.0)) {
            out.push(Violation::new(&field, "std must be non-negative"));
        }
    }

    // A removed agent cannot carry a second fault.
    for (i, fault) in spec.faults.iter().enumerate() {
        let Some(id) = fault.target_agent() else { continue };
        let removed_elsewhere = spec.faults.iter().enumerate().any(|(j, other)| {
            j != i && other.mode == FaultMode::MissingObstacle && other.target_agent() == Some(id)
        });
        if removed_elsewhere {
            out.push(Violation::new(
                format!("fault {i}"),
                "target is also removed by a missing-obstacle fault",
            ));
        }
    }

    if !(spec.dt > 0.0 && spec.dt.is_finite()) {
        out.push(Violation::new("dt", "must be positive"));
    }
    if !(spec.duration > 0.0 && spec.duration.is_finite()) {
        out.push(Violation::new("duration", "must be positive"));
    } else if spec.dt > 0.0 && spec.step_count().is_none() {
        out.push(Violation::new("duration", "duration/dt must be an integer step count"));
    }

    out
}
