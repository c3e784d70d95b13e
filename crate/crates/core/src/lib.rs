//! Task-level risk monitoring for perception faults.
//!
//! Two pieces: PAC bounds on the perception-related share of task risk,
//! estimated from cost samples under the perceived and a plausible scene,
//! and a fault-injected closed-loop driving simulator to benchmark the
//! resulting detector against a collision-probability baseline.

pub mod baselines;
pub mod config;
pub mod costs;
pub mod error;
pub mod faults;
pub mod geometry;
pub mod harness;
pub mod plausible;
pub mod predict;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod stats;
pub mod world;

pub use baselines::{baseline_detect, baseline_rule, BaselineParams};
pub use config::{DetectorKind, RunConfig};
pub use costs::{CostConfig, CostMetric};
pub use error::{Error, Result};
pub use faults::{FaultSchedule, ResolvedFault};
pub use geometry::{Path, Vec2};
pub use plausible::NoiseModel;
pub use predict::{cost_samples, CostSampleRequest, PredictorConfig};
pub use rng::Stream;
pub use scenario::{FaultMode, FaultSpec, FaultSubtype, ScenarioSpec, ScheduleKind};
pub use stats::{detect, dkw_epsilon, rsr_bounds, DetectorParams, Ecdf, QuantileTail, RiskBounds};
pub use world::{AgentId, AgentKind, AgentState, EgoPlan, EgoState, Extent, MapContext, WorldHistory, WorldState};
