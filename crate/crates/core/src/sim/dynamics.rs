//! Ground-truth dynamics: IDM ego and vehicles, replayed trajectories.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::scenario::{AgentPolicy, ScenarioSpec, Waypoint};
use crate::sim::idm::{desired_speed, find_leader, follow_route, idm_accel_toward, plan_ego, Body, IdmParams};
use crate::world::{AgentId, AgentState, RoutePath, WorldState};

enum Policy {
    Idm { route: RoutePath, desired: Option<f64> },
    Replay(Vec<Waypoint>),
}

/// Steps a world forward with the scenario's policies. All agents react to
/// the state at the start of the step.
pub struct TruthDynamics {
    policies: BTreeMap<AgentId, Policy>,
    idm: IdmParams,
    dt: f64,
}

impl TruthDynamics {
    pub fn new(spec: &ScenarioSpec, idm: &IdmParams) -> Result<Self> {
        let mut policies = BTreeMap::new();
        for (id, p) in &spec.policies {
            let policy = match p {
                AgentPolicy::Idm { route, desired_speed } => Policy::Idm {
                    route: spec.map.route_path(route).ok_or_else(|| {
                        Error::param(format!("agent {id}: route does not form a path"))
                    })?,
                    desired: *desired_speed,
                },
                AgentPolicy::Replay { trajectory } => Policy::Replay(trajectory.clone()),
            };
            policies.insert(*id, policy);
        }
        Ok(Self {
            policies,
            idm: *idm,
            dt: spec.dt,
        })
    }

    pub fn step(&self, world: &WorldState) -> Result<WorldState> {
        let mut next = world.clone();
        next.time = world.time + self.dt;

        let ego_plan = plan_ego(world, &self.idm, 1, self.dt)?;
        next.ego.set_pose(&ego_plan.poses[0]);

        for (i, agent) in world.agents.iter().enumerate() {
            let updated = match self.policies.get(&agent.id) {
                Some(Policy::Idm { route, desired }) => self.idm_step(world, agent, route, *desired),
                Some(Policy::Replay(traj)) => replay_step(agent, traj, next.time),
                None => return Err(Error::UnknownAgent(agent.id)),
            };
            next.agents[i] = updated;
        }
        Ok(next)
    }

    fn idm_step(&self, world: &WorldState, agent: &AgentState, route: &RoutePath, desired: Option<f64>) -> AgentState {
        let station = route.path.project(agent.position).station;
        let ego = &world.ego;
        let others = world
            .agents
            .iter()
            .filter(|a| a.id != agent.id)
            .map(|a| Body {
                position: a.position,
                heading: a.heading,
                speed: a.speed,
                extent: a.extent,
            })
            .chain(std::iter::once(Body {
                position: ego.position,
                heading: ego.heading,
                speed: ego.speed,
                extent: ego.extent,
            }));
        let leader = find_leader(route, &world.map, station, agent.extent.half_length, others);
        let params = match desired {
            Some(v) => self.idm.with_desired_speed(v),
            None => self.idm,
        };
        let v0 = desired_speed(&params, &world.map, route, station);
        let accel = match leader {
            Some(l) => idm_accel_toward(l.gap, agent.speed, l.speed, v0, &params),
            None => idm_accel_toward(f64::INFINITY, agent.speed, 0.0, v0, &params),
        };
        let pose = follow_route(
            &crate::world::Pose {
                position: agent.position,
                heading: agent.heading,
                speed: agent.speed,
            },
            route,
            accel,
            self.dt,
        );
        AgentState {
            position: pose.position,
            heading: pose.heading,
            speed: pose.speed,
            ..agent.clone()
        }
    }
}

/// Position on a piecewise-linear trajectory at time `t`, held at the ends.
pub fn replay_position(traj: &[Waypoint], t: f64) -> (Vec2, Option<Vec2>) {
    let first = traj[0];
    let last = traj[traj.len() - 1];
    if t <= first.t {
        return (Vec2::new(first.x, first.y), None);
    }
    if t >= last.t {
        return (Vec2::new(last.x, last.y), None);
    }
    let i = traj.partition_point(|w| w.t <= t) - 1;
    let (a, b) = (traj[i], traj[i + 1]);
    let u = (t - a.t) / (b.t - a.t);
    let pa = Vec2::new(a.x, a.y);
    let pb = Vec2::new(b.x, b.y);
    let velocity = (pb - pa) * (1.0 / (b.t - a.t));
    (pa + (pb - pa) * u, Some(velocity))
}

fn replay_step(agent: &AgentState, traj: &[Waypoint], t: f64) -> AgentState {
    let (position, velocity) = replay_position(traj, t);
    let (heading, speed) = match velocity {
        Some(v) if v.norm() > 1e-9 => (v.angle(), v.norm()),
        _ => (agent.heading, 0.0),
    };
    AgentState {
        position,
        heading,
        speed,
        ..agent.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_interpolates_and_holds() {
        let traj = vec![
            Waypoint { t: 0.0, x: 0.0, y: 0.0 },
            Waypoint { t: 2.0, x: 0.0, y: 4.0 },
        ];
        let (p, v) = replay_position(&traj, 1.0);
        assert_eq!(p, Vec2::new(0.0, 2.0));
        assert_eq!(v, Some(Vec2::new(0.0, 2.0)));
        let (p, v) = replay_position(&traj, 5.0);
        assert_eq!(p, Vec2::new(0.0, 4.0));
        assert!(v.is_none());
    }
}
