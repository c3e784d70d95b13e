//! Plausible-scene generator: undoes the identified faults using the truth
//! hint, with Gaussian uncertainty on every restored quantity.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::faults::ResolvedFault;
use crate::geometry::{normalize_angle, Vec2};
use crate::rng::{gaussian, Stream};
use crate::scenario::FaultMode;
use crate::world::{AgentId, AgentState, Extent, WorldHistory, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub pos_std: f64,
    pub heading_std: f64,
    pub speed_std: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            pos_std: 0.2,
            heading_std: 0.1,
            speed_std: 0.1,
        }
    }
}

impl NoiseModel {
    pub const ZERO: NoiseModel = NoiseModel {
        pos_std: 0.0,
        heading_std: 0.0,
        speed_std: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pos_std", self.pos_std),
            ("heading_std", self.heading_std),
            ("speed_std", self.speed_std),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }
}

fn hinted_agent(hint: &WorldState, id: AgentId) -> Result<&AgentState> {
    hint.agent(id).ok_or(Error::UnknownAgent(id))
}

fn target_of(fault: &ResolvedFault) -> Result<AgentId> {
    fault.agent_id().ok_or_else(|| Error::UnresolvableFault {
        index: fault.index,
        reason: "target required".into(),
    })
}

/// Draw one plausible scene from the latest perceived state.
pub fn generate_plausible(
    perceived: &WorldHistory,
    faults: &[ResolvedFault],
    truth_hint: &WorldState,
    noise: &NoiseModel,
    stream: Stream,
) -> Result<WorldState> {
    plausible_from(perceived.latest(), faults, truth_hint, noise, &mut stream.rng())
}

pub fn plausible_from<R: Rng + ?Sized>(
    perceived: &WorldState,
    faults: &[ResolvedFault],
    hint: &WorldState,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<WorldState> {
    if faults.is_empty() {
        return Err(Error::NoActiveFaults);
    }
    let mut scene = perceived.clone();
    for fault in faults {
        match fault.mode() {
            FaultMode::MissingObstacle => {
                let id = target_of(fault)?;
                let truth = hinted_agent(hint, id)?;
                let mut agent = truth.clone();
                agent.position =
                    agent.position + Vec2::new(gaussian(rng, noise.pos_std), gaussian(rng, noise.pos_std));
                agent.heading = normalize_angle(agent.heading + gaussian(rng, noise.heading_std));
                agent.speed = (agent.speed + gaussian(rng, noise.speed_std)).max(0.0);
                scene.remove_agent(id);
                insert_in_hint_order(&mut scene, agent, hint);
            }
            FaultMode::GhostObstacle => {
                let id = target_of(fault)?;
                scene.remove_agent(id).ok_or(Error::UnknownAgent(id))?;
            }
            FaultMode::MisdetectOrientation => {
                let id = target_of(fault)?;
                let heading = hinted_agent(hint, id)?.heading;
                let agent = scene.agent_mut(id).ok_or(Error::UnknownAgent(id))?;
                agent.heading = normalize_angle(heading + gaussian(rng, noise.heading_std));
            }
            FaultMode::MisdetectSize => {
                let id = target_of(fault)?;
                let e = hinted_agent(hint, id)?.extent;
                let agent = scene.agent_mut(id).ok_or(Error::UnknownAgent(id))?;
                agent.extent = Extent::new(
                    (e.half_length + gaussian(rng, noise.pos_std)).max(0.05),
                    (e.half_width + gaussian(rng, noise.pos_std)).max(0.05),
                );
            }
            FaultMode::MisdetectVelocity => {
                let id = target_of(fault)?;
                let truth = hinted_agent(hint, id)?.clone();
                let turned = fault.spec.params.heading_offset.is_some();
                let agent = scene.agent_mut(id).ok_or(Error::UnknownAgent(id))?;
                agent.speed = (truth.speed + gaussian(rng, noise.speed_std)).max(0.0);
                if turned {
                    agent.heading = normalize_angle(truth.heading + gaussian(rng, noise.heading_std));
                }
            }
            FaultMode::MisdetectTrafficLight => {
                let id = fault.light_id().ok_or_else(|| Error::UnresolvableFault {
                    index: fault.index,
                    reason: "target required".into(),
                })?;
                let state = hint.map.light(id).ok_or(Error::UnknownLight(id.0))?.state;
                let map = Arc::make_mut(&mut scene.map);
                map.light_mut(id).ok_or(Error::UnknownLight(id.0))?.state = state;
            }
            FaultMode::Mislocalization => {
                let truth = &hint.ego;
                scene.ego.position = truth.position
                    + Vec2::new(gaussian(rng, noise.pos_std), gaussian(rng, noise.pos_std));
                scene.ego.heading = normalize_angle(truth.heading + gaussian(rng, noise.heading_std));
            }
        }
    }
    Ok(scene)
}

/// Insert `agent` so that agents shared with the hint keep the hint's order.
fn insert_in_hint_order(scene: &mut WorldState, agent: AgentState, hint: &WorldState) {
    let rank = |id: AgentId| hint.agents.iter().position(|a| a.id == id);
    let target = rank(agent.id);
    let pos = scene
        .agents
        .iter()
        .position(|a| match (rank(a.id), target) {
            (Some(r), Some(t)) => r > t,
            _ => false,
        })
        .unwrap_or(scene.agents.len());
    scene.agents.insert(pos, agent);
}
