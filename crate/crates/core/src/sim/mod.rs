//! Closed-loop simulation: truth dynamics, planning, collisions and runs.

pub mod collision;
pub mod dynamics;
pub mod idm;
pub mod run;

pub use collision::{collision, Footprint};
pub use idm::{idm_accel, plan_ego, IdmParams};
pub use run::{run_scenario, simulate, Monitors, SimLog, StepRecord};
