//! Benchmark runs over a scenario corpus.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DetectorKind, RunConfig};
use crate::costs::CostMetric;
use crate::error::{Error, Result};
use crate::harness::load::load_corpus;
use crate::harness::metrics::{Confusion, Metrics};
use crate::harness::report::{MonitorOutput, TraceEntry};
use crate::scenario::ScenarioSpec;
use crate::sim::run::{run_scenario, Monitors, SimLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub name: String,
    pub path: Option<PathBuf>,
    pub predicted: bool,
    pub truth: bool,
    pub alarm_times: Vec<f64>,
    pub first_alarm: Option<f64>,
    pub first_collision: Option<f64>,
    /// Fraction of steps with an active fault.
    pub fault_coverage: f64,
    #[serde(skip)]
    pub runtimes: Vec<f64>,
    pub trace: Vec<TraceEntry>,
    /// Set when the scenario could not be run; such scenarios are left out
    /// of every aggregate.
    pub error: Option<String>,
}

impl ScenarioOutcome {
    /// Seconds from the first alarm to the first collision, for alarms that
    /// came no later than the collision.
    pub fn lead_time(&self) -> Option<f64> {
        match (self.predicted && self.truth, self.first_alarm, self.first_collision) {
            (true, Some(a), Some(c)) if a <= c => Some(c - a),
            _ => None,
        }
    }

    fn failed(name: String, path: Option<PathBuf>, error: &Error) -> Self {
        Self {
            name,
            path,
            predicted: false,
            truth: false,
            alarm_times: vec![],
            first_alarm: None,
            first_collision: None,
            fault_coverage: 0.0,
            runtimes: vec![],
            trace: vec![],
            error: Some(error.to_string()),
        }
    }

    fn from_log(log: &SimLog, kind: DetectorKind, gamma: f64, path: Option<PathBuf>) -> Self {
        let alarm_times = log.alarm_times(kind);
        let trace = log
            .steps
            .iter()
            .map(|s| {
                let output = match kind {
                    DetectorKind::Rsr => s.rsr.map(|r| MonitorOutput::Rsr {
                        lower: r.lower,
                        upper: r.upper,
                        tau: r.tau,
                    }),
                    DetectorKind::CollisionProb => s.collision_prob.map(|c| MonitorOutput::CollisionProb {
                        perceived: c.perceived,
                        plausible: c.plausible,
                    }),
                };
                TraceEntry {
                    scenario: log.scenario.clone(),
                    detector: kind,
                    time: s.time,
                    active: output.is_some(),
                    output: output.unwrap_or(match kind {
                        DetectorKind::Rsr => MonitorOutput::Rsr {
                            lower: 0.0,
                            upper: 0.0,
                            tau: 0,
                        },
                        DetectorKind::CollisionProb => MonitorOutput::CollisionProb {
                            perceived: 0.0,
                            plausible: 0.0,
                        },
                    }),
                    alarm: s.alarm(kind),
                    gamma,
                    collision_time: log.first_collision_time,
                }
            })
            .collect();
        Self {
            name: log.scenario.clone(),
            path,
            predicted: !alarm_times.is_empty(),
            truth: log.first_collision_time.is_some(),
            first_alarm: alarm_times.first().copied(),
            alarm_times,
            first_collision: log.first_collision_time,
            fault_coverage: log.fault_coverage(),
            runtimes: log.monitor_runtimes(),
            trace,
            error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub detector: DetectorKind,
    pub algorithm: String,
    pub parameters: String,
    pub seed: u64,
    /// Sorted by scenario name.
    pub scenarios: Vec<ScenarioOutcome>,
    pub metrics: Metrics,
}

impl BenchmarkResult {
    pub fn failures(&self) -> impl Iterator<Item = &ScenarioOutcome> {
        self.scenarios.iter().filter(|s| s.error.is_some())
    }

    fn aggregate(detector: DetectorKind, config: &RunConfig, seed: u64, mut scenarios: Vec<ScenarioOutcome>) -> Self {
        scenarios.sort_by(|a, b| a.name.cmp(&b.name));
        let mut confusion = Confusion::default();
        let mut leads = Vec::new();
        let mut runtimes = Vec::new();
        for s in scenarios.iter().filter(|s| s.error.is_none()) {
            confusion.record(s.predicted, s.truth);
            leads.extend(s.lead_time());
            runtimes.extend_from_slice(&s.runtimes);
        }
        let (algorithm, parameters) = describe(detector, config);
        Self {
            detector,
            algorithm,
            parameters,
            seed,
            metrics: Metrics::new(confusion, &leads, &runtimes),
            scenarios,
        }
    }
}

fn describe(kind: DetectorKind, config: &RunConfig) -> (String, String) {
    match kind {
        DetectorKind::Rsr => {
            let d = &config.detector;
            let name = match config.cost.metric {
                CostMetric::Msd => "Momentum-Shaped Distance",
                CostMetric::Ttc => "Time-To-Collision",
            };
            (
                name.to_string(),
                format!("p={}, gamma={}, alpha={}, n={}", d.p(), d.gamma(), d.alpha(), d.n()),
            )
        }
        DetectorKind::CollisionProb => (
            "Collision Probability".to_string(),
            format!("gamma={}, n={}", config.baseline.gamma, config.baseline.n),
        ),
    }
}

fn gamma_of(kind: DetectorKind, config: &RunConfig) -> f64 {
    match kind {
        DetectorKind::Rsr => config.detector.gamma(),
        DetectorKind::CollisionProb => config.baseline.gamma,
    }
}

/// Run every scenario once with all requested monitors and score each
/// detector on the shared runs.
pub fn run_specs(
    specs: Vec<(Option<PathBuf>, Result<ScenarioSpec>)>,
    config: &RunConfig,
    detectors: &[DetectorKind],
    seed: u64,
) -> Result<Vec<BenchmarkResult>> {
    if specs.is_empty() {
        return Err(Error::NoScenarios);
    }
    config.validate()?;
    let monitors = Monitors {
        rsr: detectors.contains(&DetectorKind::Rsr),
        collision_prob: detectors.contains(&DetectorKind::CollisionProb),
    };
    let runs: Vec<(String, Option<PathBuf>, Result<SimLog>)> = specs
        .into_par_iter()
        .map(|(path, spec)| {
            let fallback = path
                .as_ref()
                .and_then(|p| p.file_stem())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            match spec {
                Ok(spec) => (spec.name.clone(), path, run_scenario(&spec, config, monitors, seed)),
                Err(e) => (fallback, path, Err(e)),
            }
        })
        .collect();
    Ok(detectors
        .iter()
        .map(|&kind| {
            let outcomes = runs
                .iter()
                .map(|(name, path, log)| match log {
                    Ok(log) => ScenarioOutcome::from_log(log, kind, gamma_of(kind, config), path.clone()),
                    Err(e) => ScenarioOutcome::failed(name.clone(), path.clone(), e),
                })
                .collect();
            BenchmarkResult::aggregate(kind, config, seed, outcomes)
        })
        .collect())
}

/// Benchmark several detectors on one set of simulations of a corpus.
pub fn run_benchmark_multi(
    corpus: impl AsRef<Path>,
    config: &RunConfig,
    detectors: &[DetectorKind],
    seed: u64,
) -> Result<Vec<BenchmarkResult>> {
    let specs = load_corpus(corpus)?
        .into_iter()
        .map(|(p, s)| (Some(p), s))
        .collect();
    run_specs(specs, config, detectors, seed)
}

pub fn run_benchmark(
    corpus: impl AsRef<Path>,
    config: &RunConfig,
    detector: DetectorKind,
    seed: u64,
) -> Result<BenchmarkResult> {
    Ok(run_benchmark_multi(corpus, config, &[detector], seed)?.remove(0))
}
