//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use taskrisk::sim::{plan_ego, IdmParams};
use taskrisk::world::{Lane, LaneId};
use taskrisk::{AgentId, AgentKind, AgentState, EgoPlan, EgoState, Extent, MapContext, Vec2, WorldState};

/// Deterministic pseudo-uniform samples in [0, 1) from a multiplicative
/// congruential sequence, so fixtures need no RNG dependency.
pub fn uniform_samples(n: usize, seed: u64) -> Vec<f64> {
    let mut x = seed.wrapping_mul(2).wrapping_add(1);
    (0..n)
        .map(|_| {
            x = x.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
            (x >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}

/// A straight two-lane road with `agents` vehicles spread ahead of the ego.
pub fn highway_scene(agents: usize) -> WorldState {
    let lane = |id, y, reversed| Lane {
        id: LaneId(id),
        centerline: vec![Vec2::new(0.0, y), Vec2::new(400.0, y)],
        speed_limit: 10.0,
        reversed,
    };
    let agents = (0..agents)
        .map(|i| AgentState {
            id: AgentId(i as u32 + 1),
            kind: AgentKind::Vehicle,
            position: Vec2::new(30.0 + 12.0 * i as f64, if i % 2 == 0 { 0.0 } else { 3.5 }),
            heading: if i % 2 == 0 { 0.0 } else { std::f64::consts::PI },
            speed: 6.0,
            extent: Extent::new(2.4, 0.95),
        })
        .collect();
    WorldState {
        time: 0.0,
        ego: EgoState {
            position: Vec2::new(10.0, 0.0),
            heading: 0.0,
            speed: 10.0,
            extent: Extent::new(2.4, 0.95),
            route: vec![LaneId(1)],
        },
        agents,
        map: Arc::new(MapContext {
            lanes: vec![lane(1, 0.0, false), lane(2, 3.5, true)],
            traffic_lights: vec![],
        }),
    }
}

pub fn ego_plan(world: &WorldState, horizon: usize) -> EgoPlan {
    plan_ego(world, &IdmParams::default(), horizon, 0.1).expect("fixture plan")
}
