//! Closed-loop scenario runs with the risk monitor in the loop.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{baseline_probabilities, baseline_rule};
use crate::config::{DetectorKind, RunConfig};
use crate::error::{Error, Result};
use crate::faults::{inject_all, resolve_faults, schedule_faults, FaultSchedule, ResolvedFault};
use crate::predict::{cost_matrix, PerceivedSource, PlausibleSource};
use crate::rng::Stream;
use crate::scenario::{validate_scenario, ScenarioSpec};
use crate::sim::collision::{collision, Footprint};
use crate::sim::dynamics::TruthDynamics;
use crate::sim::idm::{plan_ego, IdmParams};
use crate::stats::Ecdf;
use crate::world::{AgentState, EgoPlan, EgoState, LightId, LightState, WorldState};

/// Compact scene record for logs: the map is static and left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub ego: EgoState,
    pub agents: Vec<AgentState>,
    pub lights: Vec<(LightId, LightState)>,
}

impl Snapshot {
    pub fn of(w: &WorldState) -> Self {
        Self {
            ego: w.ego.clone(),
            agents: w.agents.clone(),
            lights: w.map.traffic_lights.iter().map(|l| (l.id, l.state)).collect(),
        }
    }
}

/// RSR monitor output at one step: bounds at the lookahead with the largest
/// lower bound, and whether any lookahead raised an alarm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RsrStep {
    pub lower: f64,
    pub upper: f64,
    pub tau: usize,
    pub fired: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionProbStep {
    pub perceived: f64,
    pub plausible: f64,
    pub fired: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub truth: Snapshot,
    pub perceived: Snapshot,
    /// Indices of the faults active at this step.
    pub active_faults: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan: Option<EgoPlan>,
    pub collision: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rsr: Option<RsrStep>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collision_prob: Option<CollisionProbStep>,
    /// Wall-clock seconds spent in the monitor; excluded from logs so that
    /// they stay reproducible.
    #[serde(skip)]
    pub monitor_seconds: Option<f64>,
}

impl StepRecord {
    pub fn alarm(&self, kind: DetectorKind) -> bool {
        match kind {
            DetectorKind::Rsr => self.rsr.is_some_and(|r| r.fired),
            DetectorKind::CollisionProb => self.collision_prob.is_some_and(|c| c.fired),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimLog {
    pub scenario: String,
    pub seed: u64,
    pub dt: f64,
    pub schedules: Vec<FaultSchedule>,
    pub steps: Vec<StepRecord>,
    pub first_collision_time: Option<f64>,
}

impl SimLog {
    pub fn alarm_times(&self, kind: DetectorKind) -> Vec<f64> {
        self.steps
            .iter()
            .filter(|s| s.alarm(kind))
            .map(|s| s.time)
            .collect()
    }

    pub fn first_alarm(&self, kind: DetectorKind) -> Option<f64> {
        self.steps.iter().find(|s| s.alarm(kind)).map(|s| s.time)
    }

    pub fn truth_states(&self) -> impl Iterator<Item = &Snapshot> {
        self.steps.iter().map(|s| &s.truth)
    }

    pub fn monitor_runtimes(&self) -> Vec<f64> {
        self.steps.iter().filter_map(|s| s.monitor_seconds).collect()
    }

    /// Fraction of steps with at least one active fault.
    pub fn fault_coverage(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        let active = self.steps.iter().filter(|s| !s.active_faults.is_empty()).count();
        active as f64 / self.steps.len() as f64
    }
}

/// Which monitors run at each fault-active step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Monitors {
    pub rsr: bool,
    pub collision_prob: bool,
}

impl Monitors {
    pub const NONE: Monitors = Monitors {
        rsr: false,
        collision_prob: false,
    };
    pub const ALL: Monitors = Monitors {
        rsr: true,
        collision_prob: true,
    };

    pub fn only(kind: DetectorKind) -> Self {
        Self {
            rsr: kind == DetectorKind::Rsr,
            collision_prob: kind == DetectorKind::CollisionProb,
        }
    }

    fn any(self) -> bool {
        self.rsr || self.collision_prob
    }
}

fn ego_collides(w: &WorldState) -> bool {
    let ego = Footprint::of_ego(&w.ego);
    w.agents.iter().any(|a| collision(&ego, &Footprint::of_agent(a)))
}

/// Ground truth and perceived streams without any monitor.
pub fn simulate(spec: &ScenarioSpec, idm: &IdmParams, seed: u64) -> Result<SimLog> {
    let config = RunConfig {
        idm: *idm,
        ..RunConfig::default()
    };
    run_scenario(spec, &config, Monitors::NONE, seed)
}

/// Run a scenario closed-loop. The truth stream never depends on faults; the
/// monitors see the perceived stream and a plausible scene per rollout.
pub fn run_scenario(spec: &ScenarioSpec, config: &RunConfig, monitors: Monitors, seed: u64) -> Result<SimLog> {
    let violations = validate_scenario(spec);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    config.validate()?;
    if monitors.any() && (config.predictor.dt - spec.dt).abs() > 1e-9 {
        return Err(Error::param("predictor dt must equal the scenario dt"));
    }
    let steps = spec.step_count().expect("validated step count");
    let stream = Stream::new(seed).named(&spec.name);
    let faults = resolve_faults(spec)?;
    let schedules = faults
        .iter()
        .map(|f| schedule_faults(&f.spec, spec.duration, spec.dt, stream.named("schedule").child(f.index as u64)))
        .collect::<Result<Vec<_>>>()?;
    let dynamics = TruthDynamics::new(spec, &config.idm)?;

    let mut truth = spec.initial_world();
    let mut records = Vec::with_capacity(steps);
    let mut first_collision = None;
    for k in 0..steps {
        truth.time = k as f64 * spec.dt;
        let active: Vec<bool> = schedules.iter().map(|s| s.is_active(k)).collect();
        let perceived = inject_all(&truth, &faults, &active, stream.named("inject").child(k as u64))?;
        let collided = ego_collides(&truth);
        if collided && first_collision.is_none() {
            first_collision = Some(truth.time);
        }
        let active_faults: Vec<ResolvedFault> = faults
            .iter()
            .zip(&active)
            .filter(|(_, &on)| on)
            .map(|(f, _)| f.clone())
            .collect();

        let mut record = StepRecord {
            step: k,
            time: truth.time,
            truth: Snapshot::of(&truth),
            perceived: Snapshot::of(&perceived),
            active_faults: active_faults.iter().map(|f| f.index).collect(),
            plan: None,
            collision: collided,
            rsr: None,
            collision_prob: None,
            monitor_seconds: None,
        };
        if monitors.any() && !active_faults.is_empty() {
            let started = Instant::now();
            let out = monitor_step(
                &perceived,
                &truth,
                &active_faults,
                config,
                monitors,
                stream.named("monitor").child(k as u64),
            )?;
            record.monitor_seconds = Some(started.elapsed().as_secs_f64());
            record.plan = Some(out.plan);
            record.rsr = out.rsr;
            record.collision_prob = out.collision_prob;
        }
        records.push(record);
        truth = dynamics.step(&truth)?;
    }

    Ok(SimLog {
        scenario: spec.name.clone(),
        seed,
        dt: spec.dt,
        schedules,
        steps: records,
        first_collision_time: first_collision,
    })
}

struct MonitorOut {
    plan: EgoPlan,
    rsr: Option<RsrStep>,
    collision_prob: Option<CollisionProbStep>,
}

fn monitor_step(
    perceived: &WorldState,
    truth: &WorldState,
    faults: &[ResolvedFault],
    config: &RunConfig,
    monitors: Monitors,
    stream: Stream,
) -> Result<MonitorOut> {
    let predictor = &config.predictor;
    let plan = plan_ego(perceived, &config.idm, predictor.horizon, predictor.dt)?;
    let origin = perceived.ego.pose();
    let a_src = PerceivedSource { scene: perceived };
    let b_src = PlausibleSource {
        perceived,
        faults,
        hint: truth,
        noise: config.noise,
        stream: stream.named("plausible"),
    };
    let rollouts = stream.named("predict");
    let n = config.detector.n();

    let mut rsr = None;
    if monitors.rsr {
        let a = cost_matrix(&a_src, &plan, &origin, predictor, &config.cost, n, rollouts)?;
        let b = cost_matrix(&b_src, &plan, &origin, predictor, &config.cost, n, rollouts)?;
        let mut best: Option<RsrStep> = None;
        let mut any_fired = false;
        for tau in 1..=predictor.horizon {
            let ea = Ecdf::new(a.at(tau))?;
            let eb = Ecdf::new(b.at(tau))?;
            let bounds = config.detector.bounds(&ea, &eb)?;
            let fired = config.detector.fires(&bounds);
            any_fired |= fired;
            let step = RsrStep {
                lower: bounds.lower,
                upper: bounds.upper,
                tau,
                fired,
            };
            if best.is_none_or(|b| step.lower > b.lower) {
                best = Some(step);
            }
        }
        rsr = best.map(|b| RsrStep {
            fired: any_fired,
            ..b
        });
    }

    let mut collision_prob = None;
    if monitors.collision_prob {
        let (pe, pl) = baseline_probabilities(
            &a_src,
            &b_src,
            &plan,
            &origin,
            predictor,
            config.baseline.n,
            stream.named("baseline"),
        )?;
        collision_prob = Some(CollisionProbStep {
            perceived: pe,
            plausible: pl,
            fired: baseline_rule(pl, pe, config.baseline.gamma),
        });
    }
    Ok(MonitorOut {
        plan,
        rsr,
        collision_prob,
    })
}
