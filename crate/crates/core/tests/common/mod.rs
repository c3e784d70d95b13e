//! Strategies and invariant checks shared by the property suite and the
//! acceptance harness.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use taskrisk::faults::{inject, ResolvedFault, GHOST_ID_BASE};
use taskrisk::geometry::normalize_angle;
use taskrisk::harness::load_scenario;
use taskrisk::plausible::generate_plausible;
use taskrisk::scenario::{FaultParams, GhostPlacement};
use taskrisk::sim::{simulate, IdmParams};
use taskrisk::world::{Lane, LaneId, LightId, LightState, TrafficLight};

use taskrisk::stats::{frechet_bounds, rsr_bounds_with};
use taskrisk::{ AgentId, AgentKind, AgentState, Ecdf, EgoState, Extent, FaultMode, FaultSpec,
    FaultSubtype, MapContext, NoiseModel, QuantileTail, ScenarioSpec, ScheduleKind, Stream, Vec2, WorldHistory,
    WorldState,
};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn corpus() -> Vec<ScenarioSpec> {
    let mut paths: Vec<_> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_scenario(p).expect("corpus scenario")).collect()
}

// ---- samples ----

/// Integer-valued samples (many ties) or continuous ones.
pub fn samples(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop_oneof![
        prop::collection::vec((-20i32..20).prop_map(f64::from), 1..max_len),
        prop::collection::vec(-1e3f64..1e3, 1..max_len),
    ]
}

pub fn paired_integer_samples(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2..max_len).prop_flat_map(|n| {
        (
            prop::collection::vec((-500i32..500).prop_map(f64::from), n),
            prop::collection::vec((-500i32..500).prop_map(f64::from), n),
        )
    })
}

/// `quantile(q) <= x` exactly when `q <= eval(x)`.
pub fn check_galois(s: &[f64], q: f64, x: f64) -> Result<(), TestCaseError> {
    let e = Ecdf::new(s).unwrap();
    prop_assert_eq!(e.quantile(q) <= x, q <= e.eval(x), "q={} x={}", q, x);
    Ok(())
}

pub fn galois_case() -> impl Strategy<Value = (Vec<f64>, f64, f64)> {
    samples(60).prop_flat_map(|s| {
        let picks = prop::sample::select(s.clone());
        let x = prop_oneof![picks, -1.1e3f64..1.1e3];
        (Just(s), (1u32..=1000).prop_map(|k| f64::from(k) / 1000.0), x)
    })
}

/// The generalized inverse of `Φ - ε` at `p` equals the quantile at `p + ε`.
/// `p` and `ε` are multiples of 1/1024 so the oracle can work in integers.
pub fn check_shift_identity(s: &[f64], kp: u32, keps: u32) -> Result<(), TestCaseError> {
    let e = Ecdf::new(s).unwrap();
    let n = s.len() as u64;
    let mut sorted = s.to_vec();
    sorted.sort_by(f64::total_cmp);
    // inf{c : count(<= c)/n - eps >= p}
    let oracle = sorted
        .iter()
        .copied()
        .find(|&c| {
            let count = sorted.iter().filter(|&&v| v <= c).count() as u64;
            count * 1024 >= u64::from(kp + keps) * n
        })
        .unwrap_or(f64::INFINITY);
    let q = f64::from(kp + keps) / 1024.0;
    prop_assert_eq!(e.quantile(q), oracle);
    Ok(())
}

pub fn shift_case() -> impl Strategy<Value = (Vec<f64>, u32, u32)> {
    (samples(80), 1u32..1024, 1u32..512)
}

/// Empirical copula of paired samples lies between the Fréchet–Hoeffding bounds.
pub fn check_frechet(a: &[f64], b: &[f64]) -> Result<(), TestCaseError> {
    let fa = Ecdf::new(a).unwrap();
    let fb = Ecdf::new(b).unwrap();
    let n = a.len();
    let ua: Vec<f64> = a.iter().map(|&x| fa.eval(x)).collect();
    let vb: Vec<f64> = b.iter().map(|&x| fb.eval(x)).collect();
    for &u in &ua {
        for &v in &vb {
            let c = (0..n).filter(|&k| ua[k] <= u && vb[k] <= v).count() as f64 / n as f64;
            let (w, m) = frechet_bounds(u, v).unwrap();
            prop_assert!(w <= m + 1e-12);
            prop_assert!(w <= c + 1e-12 && c <= m + 1e-12, "W={} C={} M={} at ({}, {})", w, c, m, u, v);
        }
    }
    Ok(())
}

pub fn frechet_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec((-10i32..10).prop_map(f64::from), n),
            prop::collection::vec((-10i32..10).prop_map(f64::from), n),
        )
    })
}

/// A strictly increasing map that is exact on the integers used here.
pub fn monotone(x: f64) -> f64 {
    2.0 * x * x * x + x + 5.0
}

/// Bounds depend on the samples only through their ranks.
pub fn check_rank_equivariance(a: &[f64], b: &[f64], p: f64, alpha: f64, strict: bool) -> Result<(), TestCaseError> {
    let tail = if strict {
        QuantileTail::Strict
    } else {
        QuantileTail::Saturate
    };
    let before = rsr_bounds_with(a, b, p, alpha, tail).unwrap();
    let ga: Vec<f64> = a.iter().map(|&x| monotone(x)).collect();
    let gb: Vec<f64> = b.iter().map(|&x| monotone(x)).collect();
    let after = rsr_bounds_with(&ga, &gb, p, alpha, tail).unwrap();
    prop_assert_eq!(before, after);
    Ok(())
}

pub fn rank_case() -> impl Strategy<Value = ((Vec<f64>, Vec<f64>), f64, f64, bool)> {
    (
        paired_integer_samples(120),
        (1u32..100).prop_map(|k| f64::from(k) / 100.0),
        (1u32..50).prop_map(|k| f64::from(k) / 100.0),
        any::<bool>(),
    )
}

// ---- scenes and faults ----

pub fn test_map() -> MapContext {
    MapContext {
        lanes: vec![
            Lane {
                id: LaneId(1),
                centerline: vec![Vec2::new(-100.0, 0.0), Vec2::new(300.0, 0.0)],
                speed_limit: 10.0,
                reversed: false,
            },
            Lane {
                id: LaneId(2),
                centerline: vec![Vec2::new(-100.0, 3.5), Vec2::new(300.0, 3.5)],
                speed_limit: 10.0,
                reversed: true,
            },
        ],
        traffic_lights: vec![TrafficLight {
            id: LightId(1),
            lane: LaneId(1),
            station: 160.0,
            state: LightState::Green,
        }],
    }
}

fn kind() -> impl Strategy<Value = AgentKind> {
    prop_oneof![
        Just(AgentKind::Vehicle),
        Just(AgentKind::Pedestrian),
        Just(AgentKind::Bicycle)
    ]
}

pub fn agent(id: u32) -> impl Strategy<Value = AgentState> {
    (
        kind(),
        -60.0f64..60.0,
        -20.0f64..20.0,
        -3.1f64..3.1,
        0.0f64..15.0,
        0.1f64..3.0,
        0.1f64..1.5,
    )
        .prop_map(move |(kind, x, y, heading, speed, hl, hw)| AgentState {
            id: AgentId(id),
            kind,
            position: Vec2::new(x, y),
            heading,
            speed,
            extent: Extent::new(hl, hw),
        })
}

pub fn scene() -> impl Strategy<Value = WorldState> {
    (
        prop::collection::vec(any::<()>(), 1..6),
        -2.0f64..2.0,
        -0.5f64..0.5,
        0.0f64..12.0,
        prop::bool::ANY,
    )
        .prop_flat_map(|(slots, y, heading, speed, red)| {
            let agents: Vec<_> = (0..slots.len() as u32).map(|i| agent(i + 1)).collect();
            (agents, Just((y, heading, speed, red)))
        })
        .prop_map(|(agents, (y, heading, speed, red))| {
            let mut map = test_map();
            if red {
                map.traffic_lights[0].state = LightState::Red;
            }
            WorldState {
                time: 0.0,
                ego: EgoState {
                    position: Vec2::new(0.0, y),
                    heading,
                    speed,
                    extent: Extent::new(2.4, 0.95),
                    route: vec![LaneId(1)],
                },
                agents,
                map: Arc::new(map),
            }
        })
}

/// A fault of `mode` on a random valid target of `scene`.
pub fn fault_for(scene: &WorldState, mode: FaultMode, pick: usize, index: usize) -> ResolvedFault {
    let target = scene.agents[pick % scene.agents.len()].id.0;
    let mut params = FaultParams::default();
    let mut ghost = None;
    let (subtype, target) = match mode {
        FaultMode::GhostObstacle => {
            let placement = GhostPlacement {
                station: 50.0,
                lateral: 0.0,
                kind: AgentKind::Vehicle,
                speed: 2.0,
                heading_offset: 0.0,
            };
            params.ghost = Some(placement);
            let id = GHOST_ID_BASE + index as u32;
            ghost = Some(AgentState {
                id: AgentId(id),
                kind: AgentKind::Vehicle,
                position: Vec2::new(-50.0, 0.0),
                heading: 0.0,
                speed: 2.0,
                extent: Extent::new(2.4, 0.95),
            });
            (FaultSubtype::InPath, None)
        }
        FaultMode::MissingObstacle => (FaultSubtype::InPath, Some(target)),
        FaultMode::MisdetectTrafficLight => (FaultSubtype::None, Some(1)),
        FaultMode::Mislocalization => (FaultSubtype::None, None),
        FaultMode::MisdetectVelocity => {
            if pick.is_multiple_of(2) {
                params.heading_offset = Some(0.4);
            }
            (FaultSubtype::None, Some(target))
        }
        _ => (FaultSubtype::None, Some(target)),
    };
    ResolvedFault {
        index,
        spec: FaultSpec {
            mode,
            subtype,
            schedule: ScheduleKind::Static,
            target,
            params,
        },
        ghost,
    }
}

/// Inject, then regenerate with zero noise: the truth comes back exactly.
pub fn check_fault_round_trip(truth: &WorldState, mode: FaultMode, pick: usize, seed: u64) -> Result<(), TestCaseError> {
    let fault = fault_for(truth, mode, pick, 0);
    let (perceived, hint) = inject(truth, &fault, true, Stream::new(seed)).unwrap();
    let hint = hint.expect("active fault yields a hint");
    let history = WorldHistory::single(perceived, 0.1).unwrap();
    let restored = generate_plausible(&history, &[fault], &hint, &NoiseModel::ZERO, Stream::new(seed ^ 1)).unwrap();
    prop_assert_eq!(&restored, truth, "mode {:?}", mode);
    Ok(())
}

pub fn round_trip_case() -> impl Strategy<Value = (WorldState, FaultMode, usize, u64)> {
    (scene(), prop::sample::select(FaultMode::ALL.to_vec()), 0usize..16, any::<u64>())
}

/// A random but valid fault list for a corpus scenario.
pub fn random_faults(spec: &ScenarioSpec, picks: &[(usize, usize, bool)]) -> Vec<FaultSpec> {
    let ids: Vec<u32> = spec.initial.agents.iter().map(|a| a.id.0).collect();
    let lights: Vec<u32> = spec.map.traffic_lights.iter().map(|l| l.id.0).collect();
    let mut out: Vec<FaultSpec> = Vec::new();
    for &(mode_pick, target_pick, dynamic) in picks {
        let mode = FaultMode::ALL[mode_pick % FaultMode::ALL.len()];
        let schedule = if dynamic {
            ScheduleKind::Dynamic
        } else {
            ScheduleKind::Static
        };
        let (subtype, target) = match mode {
            FaultMode::GhostObstacle => {
                if target_pick.is_multiple_of(2) {
                    (FaultSubtype::InPath, None)
                } else {
                    (FaultSubtype::NotInPath, None)
                }
            }
            FaultMode::MisdetectTrafficLight => match lights.get(target_pick % lights.len().max(1)) {
                Some(&l) => (FaultSubtype::None, Some(l)),
                None => continue,
            },
            FaultMode::Mislocalization => (FaultSubtype::None, None),
            _ => match ids.get(target_pick % ids.len().max(1)) {
                Some(&id) => (
                    if mode == FaultMode::MissingObstacle {
                        FaultSubtype::NotInPath
                    } else {
                        FaultSubtype::None
                    },
                    Some(id),
                ),
                None => continue,
            },
        };
        let spec = FaultSpec {
            mode,
            subtype,
            schedule,
            target,
            params: FaultParams::default(),
        };
        // Keep the list valid: a removed agent carries no other fault.
        let clash = spec.target_agent().is_some_and(|id| {
            out.iter().any(|f| {
                f.target_agent() == Some(id) && (f.mode == FaultMode::MissingObstacle || mode == FaultMode::MissingObstacle)
            })
        });
        if !clash {
            out.push(spec);
        }
    }
    out
}

/// Ground truth never depends on the faults or the seed.
pub fn check_truth_independence(
    corpus: &[ScenarioSpec],
    which: usize,
    picks: &[(usize, usize, bool)],
    seeds: (u64, u64),
) -> Result<(), TestCaseError> {
    let mut spec = corpus[which % corpus.len()].clone();
    spec.duration = 2.0;
    spec.faults = random_faults(&spec, picks);
    let idm = IdmParams::default();
    let faulty = simulate(&spec, &idm, seeds.0).unwrap();
    let clean = simulate(&spec.without_faults(), &idm, seeds.1).unwrap();
    prop_assert!(faulty.truth_states().eq(clean.truth_states()));
    prop_assert_eq!(faulty.first_collision_time, clean.first_collision_time);
    Ok(())
}

/// Mode index, target index and dynamic flag for each generated fault.
pub type FaultPicks = Vec<(usize, usize, bool)>;

pub fn independence_case() -> impl Strategy<Value = (usize, FaultPicks, (u64, u64))> {
    (
        0usize..64,
        prop::collection::vec((0usize..7, 0usize..8, any::<bool>()), 1..4),
        (any::<u64>(), any::<u64>()),
    )
}

pub fn heading() -> impl Strategy<Value = f64> {
    -50.0f64..50.0
}

pub fn angles_close(a: f64, b: f64) -> bool {
    normalize_angle(a - b).abs() < 1e-9
}
