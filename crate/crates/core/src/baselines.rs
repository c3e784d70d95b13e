//! Collision-probability baseline: alarm when the plausible scene is more
//! likely to end in a collision than the perceived one, and likely enough.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predict::{collision_flags, PredictorConfig, SceneSource};
use crate::rng::Stream;
use crate::world::{EgoPlan, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineParams {
    pub gamma: f64,
    pub n: usize,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            n: 1000,
        }
    }
}

impl BaselineParams {
    pub fn new(gamma: f64, n: usize) -> Result<Self> {
        let p = Self { gamma, n };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::param(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if self.n < 2 {
            return Err(Error::param("baseline n must be at least 2"));
        }
        Ok(())
    }
}

/// Fraction of `n` rollouts in which the ego footprint hits any agent.
pub fn collision_probability(
    source: &dyn SceneSource,
    plan: &EgoPlan,
    origin: &Pose,
    predictor: &PredictorConfig,
    n: usize,
    stream: Stream,
) -> Result<f64> {
    if n < 2 {
        return Err(Error::param("at least 2 rollouts are required"));
    }
    let flags = collision_flags(source, plan, origin, predictor, n, stream)?;
    Ok(flags.iter().filter(|&&f| f).count() as f64 / n as f64)
}

/// The alarm rule on two collision probabilities.
pub fn baseline_rule(p_plausible: f64, p_perceived: f64, gamma: f64) -> bool {
    p_plausible > p_perceived && p_plausible > gamma
}

/// Run the baseline on a perceived and a plausible scene source. The two
/// scenes are rolled out from independent streams: the baseline compares two
/// marginal probabilities and ignores how the scenes co-vary.
#[allow(clippy::too_many_arguments)]
pub fn baseline_detect(
    perceived: &dyn SceneSource,
    plausible: &dyn SceneSource,
    plan: &EgoPlan,
    origin: &Pose,
    predictor: &PredictorConfig,
    params: &BaselineParams,
    stream: Stream,
) -> Result<bool> {
    params.validate()?;
    let (pe, pl) = baseline_probabilities(perceived, plausible, plan, origin, predictor, params.n, stream)?;
    Ok(baseline_rule(pl, pe, params.gamma))
}

/// Collision probabilities `(perceived, plausible)` from independent rollouts.
pub fn baseline_probabilities(
    perceived: &dyn SceneSource,
    plausible: &dyn SceneSource,
    plan: &EgoPlan,
    origin: &Pose,
    predictor: &PredictorConfig,
    n: usize,
    stream: Stream,
) -> Result<(f64, f64)> {
    Ok((
        collision_probability(perceived, plan, origin, predictor, n, stream.named("perceived"))?,
        collision_probability(plausible, plan, origin, predictor, n, stream.named("plausible"))?,
    ))
}
