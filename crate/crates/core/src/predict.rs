//! Seeded multimodal trajectory sampler and the cost-sampling pipeline.
//!
//! Rollout `i` draws from `stream.child(i)`, and inside a rollout every agent
//! draws from its own child stream keyed by agent id. Two scenes that share an
//! agent therefore move it identically in rollout `i`.

use std::borrow::Cow;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costs::{CostConfig, LaneGeometry};
use crate::error::{Error, Result};
use crate::faults::ResolvedFault;
use crate::geometry::normalize_angle;
use crate::plausible::{plausible_from, NoiseModel};
use crate::rng::{gaussian, Stream};
use crate::sim::collision::{collision, Footprint};
use crate::world::{AgentState, EgoPlan, Pose, WorldHistory, WorldState, DEFAULT_DT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentMode {
    pub name: String,
    pub probability: f64,
    /// Longitudinal acceleration held for the whole rollout, m/s².
    pub accel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    pub horizon: usize,
    pub dt: f64,
    /// Heading random-walk intensity, rad/√s.
    pub heading_noise_std: f64,
    /// Per-step acceleration noise, m/s².
    pub accel_noise_std: f64,
    pub modes: Vec<IntentMode>,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            horizon: 30,
            dt: DEFAULT_DT,
            heading_noise_std: 0.05,
            accel_noise_std: 0.3,
            modes: vec![
                IntentMode {
                    name: "keep".into(),
                    probability: 0.6,
                    accel: 0.0,
                },
                IntentMode {
                    name: "brake".into(),
                    probability: 0.2,
                    accel: -3.0,
                },
                IntentMode {
                    name: "accelerate".into(),
                    probability: 0.2,
                    accel: 1.0,
                },
            ],
        }
    }
}

impl PredictorConfig {
    /// Noise-free constant-velocity extrapolation.
    pub fn deterministic(horizon: usize, dt: f64) -> Self {
        Self {
            horizon,
            dt,
            heading_noise_std: 0.0,
            accel_noise_std: 0.0,
            modes: vec![IntentMode {
                name: "keep".into(),
                probability: 1.0,
                accel: 0.0,
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::param("predictor horizon must be at least 1"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("predictor dt must be positive"));
        }
        if !(self.heading_noise_std >= 0.0 && self.accel_noise_std >= 0.0) {
            return Err(Error::param("predictor noise must be non-negative"));
        }
        if self.modes.is_empty() {
            return Err(Error::param("at least one intent mode is required"));
        }
        if self
            .modes
            .iter()
            .any(|m| !(0.0..=1.0).contains(&m.probability) || !m.accel.is_finite())
        {
            return Err(Error::param("mode probabilities must lie in [0, 1]"));
        }
        let total: f64 = self.modes.iter().map(|m| m.probability).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::param(format!("mode probabilities sum to {total}, not 1")));
        }
        Ok(())
    }

    fn draw_mode<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for m in &self.modes {
            acc += m.probability;
            if u < acc {
                return m.accel;
            }
        }
        self.modes.last().map_or(0.0, |m| m.accel)
    }
}

struct AgentSampler {
    rng: rand_chacha::ChaCha8Rng,
    accel: f64,
}

/// One rollout of `scene`. The ego follows `plan`, moved rigidly from `origin`
/// to the scene's ego pose. `visit(k, world)` sees the state at step `k + 1`.
fn rollout<F>(
    scene: &WorldState,
    plan: &EgoPlan,
    origin: &Pose,
    cfg: &PredictorConfig,
    stream: Stream,
    mut visit: F,
) where
    F: FnMut(usize, &WorldState),
{
    let start = scene.ego.pose();
    let plan: Cow<'_, EgoPlan> = if start == *origin {
        Cow::Borrowed(plan)
    } else {
        Cow::Owned(plan.transformed(origin, &start))
    };
    let mut samplers: Vec<AgentSampler> = scene
        .agents
        .iter()
        .map(|a| {
            let mut rng = stream.child(u64::from(a.id.0)).rng();
            let accel = cfg.draw_mode(&mut rng);
            AgentSampler { rng, accel }
        })
        .collect();
    let mut world = scene.clone();
    let dt = cfg.dt;
    let heading_std = cfg.heading_noise_std * dt.sqrt();
    for k in 0..cfg.horizon {
        world.time = scene.time + (k + 1) as f64 * dt;
        world.ego.set_pose(&plan.poses[k]);
        for (agent, s) in world.agents.iter_mut().zip(samplers.iter_mut()) {
            step_agent(agent, s, cfg.accel_noise_std, heading_std, dt);
        }
        visit(k, &world);
    }
}

fn step_agent(agent: &mut AgentState, s: &mut AgentSampler, accel_std: f64, heading_std: f64, dt: f64) {
    let a = s.accel + gaussian(&mut s.rng, accel_std);
    let dh = gaussian(&mut s.rng, heading_std);
    agent.speed = (agent.speed + a * dt).max(0.0);
    agent.heading = normalize_angle(agent.heading + dh);
    agent.position = agent.position + agent.velocity() * dt;
}

fn check_plan(plan: &EgoPlan, cfg: &PredictorConfig) -> Result<()> {
    cfg.validate()?;
    if plan.horizon() < cfg.horizon {
        return Err(Error::param(format!(
            "plan has {} poses, predictor horizon is {}",
            plan.horizon(),
            cfg.horizon
        )));
    }
    if (plan.dt - cfg.dt).abs() > 1e-9 {
        return Err(Error::param("plan dt differs from predictor dt"));
    }
    Ok(())
}

/// One Monte-Carlo future of the latest state in `history`.
pub fn sample_future(
    history: &WorldHistory,
    plan: &EgoPlan,
    cfg: &PredictorConfig,
    stream: Stream,
) -> Result<Vec<WorldState>> {
    check_plan(plan, cfg)?;
    let scene = history.latest();
    let mut out = Vec::with_capacity(cfg.horizon);
    rollout(scene, plan, &scene.ego.pose(), cfg, stream, |_, w| out.push(w.clone()));
    Ok(out)
}

/// Where the scene of rollout `i` comes from.
pub trait SceneSource: Sync {
    /// The scene every rollout is built around.
    fn reference(&self) -> &WorldState;
    fn scene(&self, rollout: usize) -> Result<Cow<'_, WorldState>>;
}

/// The perceived scene, identical for every rollout.
pub struct PerceivedSource<'a> {
    pub scene: &'a WorldState,
}

impl SceneSource for PerceivedSource<'_> {
    fn reference(&self) -> &WorldState {
        self.scene
    }

    fn scene(&self, _rollout: usize) -> Result<Cow<'_, WorldState>> {
        Ok(Cow::Borrowed(self.scene))
    }
}

/// A fresh plausible scene per rollout, drawn from `stream.child(i)`.
pub struct PlausibleSource<'a> {
    pub perceived: &'a WorldState,
    pub faults: &'a [ResolvedFault],
    pub hint: &'a WorldState,
    pub noise: NoiseModel,
    pub stream: Stream,
}

impl SceneSource for PlausibleSource<'_> {
    fn reference(&self) -> &WorldState {
        self.perceived
    }

    fn scene(&self, rollout: usize) -> Result<Cow<'_, WorldState>> {
        let mut rng = self.stream.child(rollout as u64).rng();
        plausible_from(self.perceived, self.faults, self.hint, &self.noise, &mut rng).map(Cow::Owned)
    }
}

/// Costs of `n` rollouts at every lookahead step, plus per-rollout collision
/// flags of the ego footprint against any agent.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    horizon: usize,
    /// Step-major: `costs[(tau - 1) * n + i]`.
    costs: Vec<f64>,
    collided: Vec<bool>,
}

impl CostMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Samples at lookahead `tau` in `1..=horizon`, in rollout order.
    pub fn at(&self, tau: usize) -> &[f64] {
        assert!((1..=self.horizon).contains(&tau), "tau {tau} out of range");
        &self.costs[(tau - 1) * self.n..tau * self.n]
    }

    pub fn collided(&self) -> &[bool] {
        &self.collided
    }

    pub fn collision_fraction(&self) -> f64 {
        self.collided.iter().filter(|&&c| c).count() as f64 / self.n as f64
    }
}

/// Run `n` rollouts of `source` and evaluate the cost at every step.
pub fn cost_matrix(
    source: &dyn SceneSource,
    plan: &EgoPlan,
    origin: &Pose,
    predictor: &PredictorConfig,
    cost: &CostConfig,
    n: usize,
    stream: Stream,
) -> Result<CostMatrix> {
    check_plan(plan, predictor)?;
    if n < 2 {
        return Err(Error::param("at least 2 rollouts are required"));
    }
    let horizon = predictor.horizon;
    let reference = source.reference();
    let lanes = LaneGeometry::new(&reference.map);
    let violations_for = |scene: &WorldState| -> Vec<u32> {
        let start = scene.ego.pose();
        let mut ego = scene.ego.clone();
        let moved;
        let plan = if start == *origin {
            plan
        } else {
            moved = plan.transformed(origin, &start);
            &moved
        };
        plan.poses[..horizon]
            .iter()
            .map(|p| {
                ego.set_pose(p);
                lanes.violations(&ego, &scene.map.traffic_lights)
            })
            .collect()
    };
    let reference_violations = violations_for(reference);
    let same_rules = |scene: &WorldState| {
        scene.ego.pose() == reference.ego.pose()
            && scene.map.traffic_lights == reference.map.traffic_lights
    };

    let per_rollout: Vec<(Vec<f64>, bool)> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<(Vec<f64>, bool)> {
            let scene = source.scene(i)?;
            let own;
            let violations = if same_rules(&scene) {
                &reference_violations
            } else {
                own = violations_for(&scene);
                &own
            };
            let mut costs = Vec::with_capacity(horizon);
            let mut hit = false;
            rollout(&scene, plan, origin, predictor, stream.child(i as u64), |k, w| {
                costs.push(cost.evaluate_with_violations(&w.ego, &w.agents, violations[k]));
                if !hit {
                    let ego = Footprint::of_ego(&w.ego);
                    hit = w.agents.iter().any(|a| collision(&ego, &Footprint::of_agent(a)));
                }
            });
            Ok((costs, hit))
        })
        .collect::<Result<_>>()?;

    let mut costs = vec![0.0; n * horizon];
    let mut collided = Vec::with_capacity(n);
    for (i, (row, hit)) in per_rollout.into_iter().enumerate() {
        for (k, c) in row.into_iter().enumerate() {
            costs[k * n + i] = c;
        }
        collided.push(hit);
    }
    Ok(CostMatrix {
        n,
        horizon,
        costs,
        collided,
    })
}

/// Per-rollout flags: does the ego footprint touch any agent within the horizon?
pub fn collision_flags(
    source: &dyn SceneSource,
    plan: &EgoPlan,
    origin: &Pose,
    predictor: &PredictorConfig,
    n: usize,
    stream: Stream,
) -> Result<Vec<bool>> {
    check_plan(plan, predictor)?;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let scene = source.scene(i)?;
            let mut hit = false;
            rollout(&scene, plan, origin, predictor, stream.child(i as u64), |_, w| {
                if !hit {
                    let ego = Footprint::of_ego(&w.ego);
                    hit = w.agents.iter().any(|a| collision(&ego, &Footprint::of_agent(a)));
                }
            });
            Ok(hit)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostSampleRequest {
    pub history: WorldHistory,
    pub plan: EgoPlan,
    /// Lookahead step in `1..=horizon`.
    pub tau: usize,
    pub n: usize,
    pub cost: CostConfig,
    pub seed: u64,
}

/// `n` cost samples of the latest scene in the request at lookahead `tau`.
pub fn cost_samples(req: &CostSampleRequest, predictor: &PredictorConfig) -> Result<Vec<f64>> {
    if req.tau == 0 || req.tau > predictor.horizon {
        return Err(Error::param(format!(
            "tau must lie in 1..={}, got {}",
            predictor.horizon, req.tau
        )));
    }
    let scene = req.history.latest();
    let m = cost_matrix(
        &PerceivedSource { scene },
        &req.plan,
        &scene.ego.pose(),
        predictor,
        &req.cost,
        req.n,
        Stream::new(req.seed),
    )?;
    Ok(m.at(req.tau).to_vec())
}
