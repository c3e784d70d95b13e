//! Risk costs of a (predicted) scene: higher means riskier.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_diff, Path, Vec2};
use crate::world::{
    AgentKind, AgentState, EgoState, LaneId, LightState, MapContext, TrafficLight, WorldState,
    LANE_HALF_WIDTH,
};

/// Beyond this distance from every centerline the ego counts as off-road.
pub const OFF_ROAD_DISTANCE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMetric {
    Ttc,
    #[default]
    Msd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsdWeights {
    pub vehicle: f64,
    pub pedestrian: f64,
    pub bicycle: f64,
}

impl Default for MsdWeights {
    fn default() -> Self {
        Self {
            vehicle: 0.5,
            pedestrian: 1.0,
            bicycle: 1.0,
        }
    }
}

impl MsdWeights {
    pub fn get(&self, kind: AgentKind) -> f64 {
        match kind {
            AgentKind::Vehicle => self.vehicle,
            AgentKind::Pedestrian => self.pedestrian,
            AgentKind::Bicycle => self.bicycle,
        }
    }

    fn max(&self) -> f64 {
        self.vehicle.max(self.pedestrian).max(self.bicycle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConfig {
    pub metric: CostMetric,
    /// TTC normalization cap in seconds.
    pub ttc_cap: f64,
    pub msd_weights: MsdWeights,
    /// Use `exp(w * delta / 2)` instead of the decaying default.
    pub msd_literal_formula: bool,
    /// Added once per active traffic-rule violation.
    pub rule_penalty: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            metric: CostMetric::Msd,
            ttc_cap: 3.0,
            msd_weights: MsdWeights::default(),
            msd_literal_formula: false,
            rule_penalty: 1.0,
        }
    }
}

impl CostConfig {
    pub fn with_metric(metric: CostMetric) -> Self {
        Self {
            metric,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ttc_cap > 0.0 && self.ttc_cap.is_finite()) {
            return Err(Error::param("ttc_cap must be positive"));
        }
        let w = self.msd_weights;
        if !(w.vehicle > 0.0 && w.pedestrian > 0.0 && w.bicycle > 0.0) {
            return Err(Error::param("msd weights must be positive"));
        }
        if !(self.rule_penalty >= 0.0 && self.rule_penalty.is_finite()) {
            return Err(Error::param("rule_penalty must be non-negative"));
        }
        Ok(())
    }

    /// Cost of a full scene with the configured metric.
    pub fn evaluate(&self, world: &WorldState) -> f64 {
        let violations = rule_penalty(world);
        self.evaluate_with_violations(&world.ego, &world.agents, violations)
    }

    /// Cost given a precomputed violation count.
    pub fn evaluate_with_violations(
        &self,
        ego: &EgoState,
        agents: &[AgentState],
        violations: u32,
    ) -> f64 {
        let penalty = self.rule_penalty * f64::from(violations);
        let risk = match self.metric {
            CostMetric::Ttc => agents
                .iter()
                .map(|a| 1.0 - (ttc_pair(ego, a) / self.ttc_cap).min(1.0))
                .fold(0.0, f64::max),
            CostMetric::Msd => agents
                .iter()
                .map(|a| self.msd_agent(ego, a))
                .fold(0.0, f64::max),
        };
        penalty + risk
    }

    fn msd_agent(&self, ego: &EgoState, agent: &AgentState) -> f64 {
        let delta = msd_delta(ego, agent);
        let w = self.msd_weights.get(agent.kind);
        if self.msd_literal_formula {
            (w * delta / 2.0).exp().min(f64::MAX)
        } else {
            w * (-delta / 2.0).exp()
        }
    }

    /// Largest value the agent term can take with the default MSD form.
    pub fn max_agent_term(&self) -> f64 {
        match self.metric {
            CostMetric::Ttc => 1.0,
            CostMetric::Msd => self.msd_weights.max(),
        }
    }
}

/// Time until the circumscribed discs of ego and agent touch under constant
/// velocities. Zero if they already overlap, infinite if they never meet.
pub fn ttc_pair(ego: &EgoState, agent: &AgentState) -> f64 {
    let r = agent.position - ego.position;
    let w = agent.velocity() - ego.velocity();
    let radius = ego.extent.circumradius() + agent.extent.circumradius();
    let c = r.norm_squared() - radius * radius;
    if c <= 0.0 {
        return 0.0;
    }
    let a = w.norm_squared();
    if a == 0.0 {
        return f64::INFINITY;
    }
    let b = 2.0 * r.dot(w);
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    // c > 0, so both roots share a sign; the smaller one is the first contact.
    let t = (-b - disc.sqrt()) / (2.0 * a);
    if t >= 0.0 {
        t
    } else {
        f64::INFINITY
    }
}

pub fn ttc_cost(world: &WorldState, cfg: &CostConfig) -> f64 {
    CostConfig {
        metric: CostMetric::Ttc,
        ..*cfg
    }
    .evaluate(world)
}

pub fn msd_cost(world: &WorldState, cfg: &CostConfig) -> f64 {
    CostConfig {
        metric: CostMetric::Msd,
        ..*cfg
    }
    .evaluate(world)
}

/// Components of `v` along and perpendicular (left positive) to `ego_heading`.
pub fn decompose(v: Vec2, ego_heading: f64) -> (f64, f64) {
    let (s, c) = ego_heading.sin_cos();
    (v.x * c + v.y * s, -v.x * s + v.y * c)
}

pub fn msd_delta(ego: &EgoState, agent: &AgentState) -> f64 {
    let (dx_par, dx_perp) = decompose(agent.position - ego.position, ego.heading);
    let (dv_par, dv_perp) = decompose(agent.velocity() - ego.velocity(), ego.heading);
    (dx_par * dv_par).powi(2) + (dx_perp * dv_perp).powi(2)
}

/// Number of traffic-rule violations of the ego: driving against the lane
/// direction (or off every lane) and crossing a red stop line while moving.
pub fn rule_penalty(world: &WorldState) -> u32 {
    rule_violations(&world.ego, &world.map)
}

pub fn rule_violations(ego: &EgoState, map: &MapContext) -> u32 {
    LaneGeometry::new(map).violations(ego, &map.traffic_lights)
}

/// Lane paths of a map, built once and reused across many rule checks.
#[derive(Debug, Clone)]
pub struct LaneGeometry {
    paths: Vec<(LaneId, Path)>,
}

impl LaneGeometry {
    pub fn new(map: &MapContext) -> Self {
        Self {
            paths: map
                .lanes
                .iter()
                .filter_map(|l| l.path().map(|p| (l.id, p)))
                .collect(),
        }
    }

    fn path(&self, id: LaneId) -> Option<&Path> {
        self.paths.iter().find(|(l, _)| *l == id).map(|(_, p)| p)
    }

    /// Violation count with light states taken from `lights`.
    pub fn violations(&self, ego: &EgoState, lights: &[TrafficLight]) -> u32 {
        let mut count = 0;

        // At junctions several lane corridors overlap; matching the direction
        // of any of them is enough.
        let mut nearest: Option<(f64, f64)> = None;
        let mut in_corridor = false;
        let mut aligned = false;
        for (_, path) in &self.paths {
            let pr = path.project(ego.position);
            let dist = pr.lateral.abs();
            if dist <= LANE_HALF_WIDTH {
                in_corridor = true;
                aligned |= angle_diff(ego.heading, pr.heading) <= FRAC_PI_2;
            }
            if nearest.is_none_or(|(d, _)| dist < d) {
                nearest = Some((dist, pr.heading));
            }
        }
        let wrong_way = match nearest {
            None => true,
            Some((d, _)) if d > OFF_ROAD_DISTANCE => true,
            Some(_) if in_corridor => !aligned,
            Some((_, heading)) => angle_diff(ego.heading, heading) > FRAC_PI_2,
        };
        if wrong_way {
            count += 1;
        }

        if ego.speed > 0.0 {
            for light in lights {
                if light.state != LightState::Red {
                    continue;
                }
                if let Some(path) = self.path(light.lane) {
                    if crosses_stop_line(ego, path, light.station) {
                        count += 1;
                    }
                }
            }
        }
        count
    }
}

fn crosses_stop_line(ego: &EgoState, lane: &Path, station: f64) -> bool {
    let (stop, heading) = lane.point_at(station);
    if angle_diff(ego.heading, heading) > FRAC_PI_2 {
        return false;
    }
    let (along, across) = decompose(ego.position - stop, heading);
    let rel = ego.heading - heading;
    along.abs() <= ego.extent.support(rel)
        && across.abs() <= LANE_HALF_WIDTH + ego.extent.support(rel + FRAC_PI_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{AgentId, Extent, Lane, LightId};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn unit_disc() -> Extent {
        Extent::new(0.6, 0.8)
    }

    fn ego_at(x: f64, heading: f64, speed: f64) -> EgoState {
        EgoState {
            position: Vec2::new(x, 0.0),
            heading,
            speed,
            extent: unit_disc(),
            route: vec![LaneId(1)],
        }
    }

    fn agent(id: u32, kind: AgentKind, pos: Vec2, heading: f64, speed: f64) -> AgentState {
        AgentState {
            id: AgentId(id),
            kind,
            position: pos,
            heading,
            speed,
            extent: unit_disc(),
        }
    }

    fn straight_map(lights: Vec<TrafficLight>) -> Arc<MapContext> {
        Arc::new(MapContext {
            lanes: vec![Lane {
                id: LaneId(1),
                centerline: vec![Vec2::new(-100.0, 0.0), Vec2::new(100.0, 0.0)],
                speed_limit: 10.0,
                reversed: false,
            }],
            traffic_lights: lights,
        })
    }

    fn world(ego: EgoState, agents: Vec<AgentState>) -> WorldState {
        WorldState {
            time: 0.0,
            ego,
            agents,
            map: straight_map(vec![]),
        }
    }

    fn no_penalty(metric: CostMetric) -> CostConfig {
        CostConfig {
            metric,
            rule_penalty: 0.0,
            ..CostConfig::default()
        }
    }

    #[test]
    fn ttc_head_on() {
        let ego = ego_at(0.0, 0.0, 5.0);
        let a = agent(1, AgentKind::Vehicle, Vec2::new(30.0, 0.0), PI, 5.0);
        let t = ttc_pair(&ego, &a);
        // |30 - 10 t| = 2
        assert!((t - 2.8).abs() < 1e-12);
    }

    #[test]
    fn ttc_receding_and_overlap() {
        let ego = ego_at(0.0, 0.0, 5.0);
        let away = agent(1, AgentKind::Vehicle, Vec2::new(30.0, 0.0), 0.0, 8.0);
        assert_eq!(ttc_pair(&ego, &away), f64::INFINITY);
        let on_top = agent(1, AgentKind::Vehicle, Vec2::new(1.5, 0.0), 0.0, 8.0);
        assert_eq!(ttc_pair(&ego, &on_top), 0.0);
        let parallel = agent(1, AgentKind::Vehicle, Vec2::new(0.0, 10.0), 0.0, 5.0);
        assert_eq!(ttc_pair(&ego, &parallel), f64::INFINITY);
    }

    #[test]
    fn ttc_cost_examples() {
        let cfg = no_penalty(CostMetric::Ttc);
        let ego = ego_at(0.0, 0.0, 5.0);
        let a = agent(1, AgentKind::Vehicle, Vec2::new(30.0, 0.0), PI, 5.0);
        let c = ttc_cost(&world(ego.clone(), vec![a]), &cfg);
        assert!((c - (1.0 - 2.8 / 3.0)).abs() < 1e-12);

        assert_eq!(ttc_cost(&world(ego.clone(), vec![]), &cfg), 0.0);

        // TTC 0.5 s: 7 m apart closing at 10 m/s with radii summing to 2.
        let near = agent(1, AgentKind::Vehicle, Vec2::new(7.0, 0.0), PI, 5.0);
        let far = agent(2, AgentKind::Vehicle, Vec2::new(0.0, 50.0), 0.0, 5.0);
        assert!((ttc_pair(&ego, &near) - 0.5).abs() < 1e-12);
        let c = ttc_cost(&world(ego, vec![near, far]), &cfg);
        assert!((c - (1.0 - 1.0 / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn decompose_examples() {
        assert_eq!(decompose(Vec2::new(1.0, 0.0), 0.0), (1.0, 0.0));
        let (a, b) = decompose(Vec2::new(1.0, 0.0), FRAC_PI_2);
        assert!(a.abs() < 1e-15 && (b + 1.0).abs() < 1e-15);
    }

    #[test]
    fn msd_examples() {
        let cfg = no_penalty(CostMetric::Msd);
        let ego = ego_at(0.0, 0.0, 5.0);
        let co_moving = agent(1, AgentKind::Vehicle, Vec2::new(20.0, 0.0), 0.0, 5.0);
        assert_eq!(msd_cost(&world(ego.clone(), vec![co_moving]), &cfg), 0.5);

        // dx_par = 2, dv_par = 1, no lateral components.
        let ped = agent(1, AgentKind::Pedestrian, Vec2::new(2.0, 0.0), 0.0, 6.0);
        assert!((msd_delta(&ego, &ped) - 4.0).abs() < 1e-12);
        let c = msd_cost(&world(ego.clone(), vec![ped]), &cfg);
        assert!((c - (-2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn msd_penalty_only() {
        let map = straight_map(vec![TrafficLight {
            id: LightId(1),
            lane: LaneId(1),
            station: 100.0,
            state: LightState::Red,
        }]);
        let w = WorldState {
            time: 0.0,
            ego: ego_at(0.0, 0.0, 5.0),
            agents: vec![],
            map,
        };
        assert_eq!(rule_penalty(&w), 1);
        assert_eq!(msd_cost(&w, &CostConfig::default()), 1.0);
    }

    #[test]
    fn literal_msd_stays_finite() {
        let cfg = CostConfig {
            msd_literal_formula: true,
            rule_penalty: 0.0,
            ..CostConfig::default()
        };
        let ego = ego_at(0.0, 0.0, 5.0);
        let far = agent(1, AgentKind::Vehicle, Vec2::new(1e4, 0.0), PI, 30.0);
        let c = msd_cost(&world(ego, vec![far]), &cfg);
        assert_eq!(c, f64::MAX);
    }

    #[test]
    fn rule_penalty_examples() {
        let red = |state| TrafficLight {
            id: LightId(1),
            lane: LaneId(1),
            station: 100.0,
            state,
        };
        let mk = |heading, state| WorldState {
            time: 0.0,
            ego: ego_at(0.5, heading, 5.0),
            agents: vec![],
            map: straight_map(vec![red(state)]),
        };
        assert_eq!(rule_penalty(&mk(0.0, LightState::Green)), 0);
        assert_eq!(rule_penalty(&mk(PI, LightState::Green)), 1);
        // The wrong-way ego also sits on the red stop line, but crossing only
        // counts in the lane's direction of travel.
        assert_eq!(rule_penalty(&mk(PI, LightState::Red)), 1);
        assert_eq!(rule_penalty(&mk(0.0, LightState::Red)), 1);

        let mut off = mk(0.0, LightState::Green);
        off.ego.position = Vec2::new(0.0, 20.0);
        assert_eq!(rule_penalty(&off), 1);

        let mut stopped = mk(0.0, LightState::Red);
        stopped.ego.speed = 0.0;
        assert_eq!(rule_penalty(&stopped), 0);
    }

    #[test]
    fn red_light_plus_wrong_way_counts_twice() {
        // The ego straddles two lanes: its center is in the corridor of a lane
        // running the other way while its footprint reaches over the red stop
        // line of the neighbouring lane.
        let map = Arc::new(MapContext {
            lanes: vec![
                Lane {
                    id: LaneId(1),
                    centerline: vec![Vec2::new(-100.0, 0.0), Vec2::new(100.0, 0.0)],
                    speed_limit: 10.0,
                    reversed: true,
                },
                Lane {
                    id: LaneId(2),
                    centerline: vec![Vec2::new(-100.0, 4.0), Vec2::new(100.0, 4.0)],
                    speed_limit: 10.0,
                    reversed: false,
                },
            ],
            traffic_lights: vec![TrafficLight {
                id: LightId(1),
                lane: LaneId(2),
                station: 100.0,
                state: LightState::Red,
            }],
        });
        let mut ego = ego_at(0.0, 0.0, 5.0);
        ego.position = Vec2::new(0.0, 1.7);
        let w = WorldState {
            time: 0.0,
            ego,
            agents: vec![],
            map,
        };
        assert_eq!(rule_penalty(&w), 2);
    }
}
