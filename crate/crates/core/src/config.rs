//! Run configuration shared by the simulator, the harness and the CLI.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineParams;
use crate::costs::CostConfig;
use crate::error::{Error, Result};
use crate::plausible::NoiseModel;
use crate::predict::PredictorConfig;
use crate::sim::idm::IdmParams;
use crate::stats::DetectorParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    Rsr,
    CollisionProb,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 2] = [DetectorKind::Rsr, DetectorKind::CollisionProb];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::Rsr => "rsr",
            DetectorKind::CollisionProb => "collision-prob",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rsr" => Ok(DetectorKind::Rsr),
            "collision-prob" => Ok(DetectorKind::CollisionProb),
            other => Err(Error::param(format!("unknown detector `{other}`"))),
        }
    }
}

/// Everything a monitored run needs besides the scenario and the seed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub detector: DetectorParams,
    pub cost: CostConfig,
    pub predictor: PredictorConfig,
    pub noise: NoiseModel,
    pub idm: IdmParams,
    pub baseline: BaselineParams,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.cost.validate()?;
        self.predictor.validate()?;
        self.noise.validate()?;
        self.idm.validate()?;
        self.baseline.validate()
    }
}
