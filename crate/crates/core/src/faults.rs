//! Fault injection: turns the ground-truth stream into the perceived stream.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Vec2};
use crate::rng::{gaussian, Stream};
use crate::scenario::{FaultMode, FaultSpec, FaultSubtype, GhostPlacement, ScenarioSpec, ScheduleKind};
use crate::world::{
    AgentId, AgentKind, AgentState, Extent, LightId, RoutePath, WorldState, LANE_HALF_WIDTH,
};

/// Fabricated agents get ids from this base plus the fault index.
pub const GHOST_ID_BASE: u32 = 10_000;

/// Distance ahead of the ego used when a ghost has no explicit placement.
const DEFAULT_GHOST_AHEAD: f64 = 30.0;
/// Lateral offset of a default not-in-path ghost.
const DEFAULT_GHOST_LATERAL: f64 = 6.0;
/// Minimum lateral offset of a not-in-path ghost.
pub const NOT_IN_PATH_MIN_LATERAL: f64 = 5.0;
/// Maximum lateral offset of an in-path ghost.
pub const IN_PATH_MAX_LATERAL: f64 = 0.5;

pub fn default_extent(kind: AgentKind) -> Extent {
    match kind {
        AgentKind::Vehicle => Extent::new(2.4, 0.95),
        AgentKind::Pedestrian => Extent::new(0.3, 0.3),
        AgentKind::Bicycle => Extent::new(0.9, 0.3),
    }
}

/// Active windows of one fault, as half-open step ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSchedule {
    pub dt: f64,
    pub steps: Vec<(usize, usize)>,
}

impl FaultSchedule {
    /// `[t_on, t_off)` pairs in seconds.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        self.steps
            .iter()
            .map(|&(a, b)| (a as f64 * self.dt, b as f64 * self.dt))
            .collect()
    }

    pub fn is_active(&self, step: usize) -> bool {
        self.steps.iter().any(|&(a, b)| a <= step && step < b)
    }

    pub fn active_steps(&self) -> usize {
        self.steps.iter().map(|&(a, b)| b - a).sum()
    }
}

fn steps_for(duration: f64, dt: f64) -> Result<usize> {
    if !(duration > 0.0 && dt > 0.0) {
        return Err(Error::param("duration and dt must be positive"));
    }
    Ok((duration / dt).round() as usize)
}

/// Static faults cover the whole run. Dynamic faults switch on with a per-step
/// probability derived from the per-second rate, stay on for at least the
/// minimum duration and then switch off with the same per-step probability.
/// A window never opens when less than the minimum duration remains.
pub fn schedule_faults(spec: &FaultSpec, duration: f64, dt: f64, stream: Stream) -> Result<FaultSchedule> {
    let total = steps_for(duration, dt)?;
    if spec.schedule == ScheduleKind::Static {
        return Ok(FaultSchedule {
            dt,
            steps: vec![(0, total)],
        });
    }
    let rate = spec.params.activation_rate_or_default();
    let p_step = 1.0 - (1.0 - rate).powf(dt);
    let min_steps = ((spec.params.min_duration_or_default() / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut rng = stream.rng();
    let mut steps = Vec::new();
    let mut on: Option<usize> = None;
    for k in 0..total {
        let u: f64 = rng.random();
        match on {
            None => {
                if total - k >= min_steps && u < p_step {
                    on = Some(k);
                }
            }
            Some(start) => {
                if k - start >= min_steps && u < p_step {
                    steps.push((start, k));
                    on = None;
                }
            }
        }
    }
    if let Some(start) = on {
        steps.push((start, total));
    }
    Ok(FaultSchedule { dt, steps })
}

/// A fault with its scenario-level context resolved: the index in the
/// scenario's fault list and, for ghosts, the fabricated agent at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedFault {
    pub index: usize,
    pub spec: FaultSpec,
    pub ghost: Option<AgentState>,
}

impl ResolvedFault {
    pub fn mode(&self) -> FaultMode {
        self.spec.mode
    }

    /// Agent the fault refers to in the perceived or true scene.
    pub fn agent_id(&self) -> Option<AgentId> {
        match &self.ghost {
            Some(g) => Some(g.id),
            None => self.spec.target_agent(),
        }
    }

    pub fn light_id(&self) -> Option<LightId> {
        self.spec.target_light()
    }

    fn ghost_at(&self, time: f64) -> Option<AgentState> {
        self.ghost.as_ref().map(|g| {
            let mut g = g.clone();
            g.position = g.position + g.velocity() * time;
            g
        })
    }
}

/// Signed-lateral test of a position against the route corridor.
pub fn is_in_path(route: &RoutePath, position: Vec2) -> bool {
    let pr = route.path.project(position);
    let len = route.path.length();
    pr.lateral.abs() < LANE_HALF_WIDTH && pr.station > 0.0 && pr.station < len
}

fn resolve_ghost(
    index: usize,
    spec: &FaultSpec,
    route: &RoutePath,
    ego_station: f64,
) -> Result<AgentState> {
    let placement = spec.params.ghost.unwrap_or(GhostPlacement {
        station: ego_station + DEFAULT_GHOST_AHEAD,
        lateral: match spec.subtype {
            FaultSubtype::InPath => 0.0,
            _ => DEFAULT_GHOST_LATERAL,
        },
        kind: AgentKind::Vehicle,
        speed: 0.0,
        heading_offset: 0.0,
    });
    let unresolvable = |reason: &str| Error::UnresolvableFault {
        index,
        reason: reason.to_string(),
    };
    match spec.subtype {
        FaultSubtype::InPath if placement.lateral.abs() > IN_PATH_MAX_LATERAL => {
            return Err(unresolvable("in-path ghost must lie on the ego route"));
        }
        FaultSubtype::NotInPath if placement.lateral.abs() < NOT_IN_PATH_MIN_LATERAL => {
            return Err(unresolvable("not-in-path ghost must be at least 5 m off the route"));
        }
        _ => {}
    }
    if placement.station < 0.0 || placement.station > route.path.length() {
        return Err(unresolvable("ghost station lies outside the ego route"));
    }
    let (center, tangent) = route.path.point_at(placement.station);
    let normal = Vec2::from_polar(1.0, tangent + std::f64::consts::FRAC_PI_2);
    Ok(AgentState {
        id: AgentId(spec.target.unwrap_or(GHOST_ID_BASE + index as u32)),
        kind: placement.kind,
        position: center + normal * placement.lateral,
        heading: normalize_angle(tangent + placement.heading_offset),
        speed: placement.speed.max(0.0),
        extent: default_extent(placement.kind),
    })
}

/// Resolve every fault of a scenario against its initial scene.
pub fn resolve_faults(spec: &ScenarioSpec) -> Result<Vec<ResolvedFault>> {
    let route = spec
        .map
        .route_path(&spec.initial.ego.route)
        .ok_or_else(|| Error::param("ego route does not form a path"))?;
    let ego_station = route.path.project(spec.initial.ego.position).station;
    spec.faults
        .iter()
        .enumerate()
        .map(|(index, f)| {
            let ghost = if f.mode == FaultMode::GhostObstacle {
                Some(resolve_ghost(index, f, &route, ego_station)?)
            } else {
                None
            };
            Ok(ResolvedFault {
                index,
                spec: f.clone(),
                ghost,
            })
        })
        .collect()
}

fn target_of<'w>(w: &'w mut WorldState, fault: &ResolvedFault) -> Result<&'w mut AgentState> {
    let id = fault.spec.target_agent().ok_or_else(|| Error::UnresolvableFault {
        index: fault.index,
        reason: "target required".into(),
    })?;
    w.agent_mut(id).ok_or(Error::UnknownAgent(id))
}

/// Apply one active fault to `perceived`, drawing noise from `rng`.
pub fn apply_fault<R: Rng + ?Sized>(
    perceived: &mut WorldState,
    fault: &ResolvedFault,
    rng: &mut R,
) -> Result<()> {
    let params = &fault.spec.params;
    let mode = fault.mode();
    match mode {
        FaultMode::MisdetectOrientation => {
            let offset = params.mean_or(mode) + gaussian(rng, params.std_or(mode));
            let a = target_of(perceived, fault)?;
            a.heading = normalize_angle(a.heading + offset);
        }
        FaultMode::MisdetectSize => {
            let scale = (params.mean_or(mode) + gaussian(rng, params.std_or(mode))).max(0.1);
            let a = target_of(perceived, fault)?;
            a.extent = Extent::new(a.extent.half_length * scale, a.extent.half_width * scale);
        }
        FaultMode::MisdetectVelocity => {
            let scale = (params.mean_or(mode) + gaussian(rng, params.std_or(mode))).max(0.0);
            let turn = params.heading_offset.unwrap_or(0.0);
            let a = target_of(perceived, fault)?;
            a.speed *= scale;
            a.heading = normalize_angle(a.heading + turn);
        }
        FaultMode::MisdetectTrafficLight => {
            let id = fault.light_id().ok_or_else(|| Error::UnresolvableFault {
                index: fault.index,
                reason: "target required".into(),
            })?;
            let map = Arc::make_mut(&mut perceived.map);
            let light = map.light_mut(id).ok_or(Error::UnknownLight(id.0))?;
            light.state = light.state.flipped();
        }
        FaultMode::GhostObstacle => {
            let ghost = fault
                .ghost_at(perceived.time)
                .ok_or_else(|| Error::UnresolvableFault {
                    index: fault.index,
                    reason: "ghost not resolved".into(),
                })?;
            if perceived.agent(ghost.id).is_some() {
                return Err(Error::UnresolvableFault {
                    index: fault.index,
                    reason: format!("ghost id {} is already in the scene", ghost.id),
                });
            }
            perceived.agents.push(ghost);
        }
        FaultMode::MissingObstacle => {
            let id = target_of(perceived, fault)?.id;
            perceived.remove_agent(id);
        }
        FaultMode::Mislocalization => {
            let offset = params.offset_or_default();
            let std = params.std_or(mode);
            let dx = gaussian(rng, std);
            let dy = gaussian(rng, std);
            let dh = gaussian(rng, params.heading_std_or_default());
            let ego = &mut perceived.ego;
            ego.position = ego.position + offset + Vec2::new(dx, dy);
            ego.heading = normalize_angle(ego.heading + dh);
        }
    }
    Ok(())
}

/// Perceived scene and truth hint for a single fault. An inactive fault
/// passes the truth through and yields no hint.
pub fn inject(
    truth: &WorldState,
    fault: &ResolvedFault,
    active: bool,
    stream: Stream,
) -> Result<(WorldState, Option<WorldState>)> {
    let mut perceived = truth.clone();
    if !active {
        return Ok((perceived, None));
    }
    apply_fault(&mut perceived, fault, &mut stream.rng())?;
    Ok((perceived, Some(truth.clone())))
}

/// Apply all active faults in list order. Fault `i` draws from `stream.child(i)`.
pub fn inject_all(
    truth: &WorldState,
    faults: &[ResolvedFault],
    active: &[bool],
    stream: Stream,
) -> Result<WorldState> {
    let mut perceived = truth.clone();
    for (fault, &on) in faults.iter().zip(active) {
        if on {
            apply_fault(&mut perceived, fault, &mut stream.child(fault.index as u64).rng())?;
        }
    }
    Ok(perceived)
}
