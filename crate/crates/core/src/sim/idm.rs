//! Intelligent-driver car following with pure-pursuit lane tracking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Vec2};
use crate::world::{
    EgoPlan, Extent, LightState, MapContext, Pose, RoutePath, WorldState, LANE_HALF_WIDTH,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdmParams {
    /// Overrides the lane speed limit when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub desired_speed: Option<f64>,
    pub time_headway: f64,
    pub max_accel: f64,
    pub comfort_decel: f64,
    pub min_gap: f64,
    pub exponent: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            desired_speed: None,
            time_headway: 1.5,
            max_accel: 1.0,
            comfort_decel: 1.5,
            min_gap: 2.0,
            exponent: 4.0,
        }
    }
}

impl IdmParams {
    pub fn with_desired_speed(mut self, v: f64) -> Self {
        self.desired_speed = Some(v);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("time_headway", self.time_headway),
            ("max_accel", self.max_accel),
            ("comfort_decel", self.comfort_decel),
            ("min_gap", self.min_gap),
            ("exponent", self.exponent),
            ("desired_speed", self.desired_speed.unwrap_or(1.0)),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(format!("idm {name} must be positive")));
            }
        }
        Ok(())
    }

    /// Lower acceleration bound used for emergencies.
    pub fn emergency_decel(&self) -> f64 {
        -2.0 * self.comfort_decel
    }
}

/// IDM acceleration toward `desired_speed` (or `params.desired_speed`),
/// clamped to `[-2b, a]`. A non-positive gap yields the emergency bound.
pub fn idm_accel(gap: f64, speed: f64, lead_speed: f64, params: &IdmParams) -> f64 {
    let v0 = params.desired_speed.unwrap_or(f64::INFINITY);
    idm_accel_toward(gap, speed, lead_speed, v0, params)
}

pub fn idm_accel_toward(gap: f64, speed: f64, lead_speed: f64, v0: f64, p: &IdmParams) -> f64 {
    let lo = p.emergency_decel();
    if gap <= 0.0 {
        return lo;
    }
    let free = 1.0 - (speed / v0).powf(p.exponent);
    let interaction = if gap.is_finite() {
        let dv = speed - lead_speed;
        let s_star = p.min_gap
            + (speed * p.time_headway + speed * dv / (2.0 * (p.max_accel * p.comfort_decel).sqrt()))
                .max(0.0);
        (s_star / gap).powi(2)
    } else {
        0.0
    };
    (p.max_accel * (free - interaction)).clamp(lo, p.max_accel)
}

/// Something that can block a route: an agent or the ego.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Body {
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    pub extent: Extent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leader {
    /// Bumper-to-bumper distance along the route.
    pub gap: f64,
    /// Leader speed along the route, non-negative.
    pub speed: f64,
}

/// Nearest obstacle ahead on the route: bodies inside the lane corridor and
/// red stop lines not yet reached by the front bumper.
pub fn find_leader(
    route: &RoutePath,
    map: &MapContext,
    station: f64,
    half_length: f64,
    bodies: impl IntoIterator<Item = Body>,
) -> Option<Leader> {
    let mut best: Option<Leader> = None;
    let mut consider = |l: Leader| {
        if best.is_none_or(|b| l.gap < b.gap) {
            best = Some(l);
        }
    };
    for b in bodies {
        let pr = route.path.project(b.position);
        if pr.lateral.abs() >= LANE_HALF_WIDTH || pr.station <= station {
            continue;
        }
        if pr.station >= route.path.length() && pr.lateral.abs() > 1e-9 {
            // Beyond the end of the route, the projection is clamped.
            continue;
        }
        let rel = b.heading - pr.heading;
        consider(Leader {
            gap: pr.station - station - half_length - b.extent.support(rel),
            speed: (b.speed * rel.cos()).max(0.0),
        });
    }
    for light in &map.traffic_lights {
        if light.state != LightState::Red {
            continue;
        }
        if let Some(stop) = route.station_of(light.lane, light.station) {
            let gap = stop - station - half_length;
            if gap >= 0.0 {
                consider(Leader { gap, speed: 0.0 });
            }
        }
    }
    best
}

/// Advance a route-following vehicle by one step.
pub fn follow_route(
    pose: &Pose,
    route: &RoutePath,
    accel: f64,
    dt: f64,
) -> Pose {
    let pr = route.path.project(pose.position);
    let length = route.path.length();
    if pr.station >= length - 1e-6 {
        return Pose {
            speed: 0.0,
            ..*pose
        };
    }
    let speed = (pose.speed + accel * dt).max(0.0);
    let lookahead = (1.0 * pose.speed).max(5.0);
    let (target, _) = route.path.point_at(pr.station + lookahead);
    let to_target = target - pose.position;
    let dist = to_target.norm();
    let heading = if dist > 1e-9 {
        let alpha = normalize_angle(to_target.angle() - pose.heading);
        let curvature = 2.0 * alpha.sin() / dist;
        normalize_angle(pose.heading + speed * curvature * dt)
    } else {
        pose.heading
    };
    let mean_heading = pose.heading + normalize_angle(heading - pose.heading) / 2.0;
    Pose {
        position: pose.position + Vec2::from_polar(speed * dt, mean_heading),
        heading,
        speed,
    }
}

/// Roll the IDM ego forward `horizon` steps on `world`, predicting other
/// agents at constant velocity.
pub fn plan_ego(world: &WorldState, params: &IdmParams, horizon: usize, dt: f64) -> Result<EgoPlan> {
    let ego = &world.ego;
    if ego.route.is_empty() {
        return Err(Error::param("ego route is empty"));
    }
    let route = world
        .map
        .route_path(&ego.route)
        .ok_or_else(|| Error::param("ego route does not form a path"))?;
    let mut pose = ego.pose();
    let mut poses = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let t = k as f64 * dt;
        let station = route.path.project(pose.position).station;
        let bodies = world.agents.iter().map(|a| Body {
            position: a.position + a.velocity() * t,
            heading: a.heading,
            speed: a.speed,
            extent: a.extent,
        });
        let leader = find_leader(&route, &world.map, station, ego.extent.half_length, bodies);
        let v0 = desired_speed(params, &world.map, &route, station);
        let accel = match leader {
            Some(l) => idm_accel_toward(l.gap, pose.speed, l.speed, v0, params),
            None => idm_accel_toward(f64::INFINITY, pose.speed, 0.0, v0, params),
        };
        pose = follow_route(&pose, &route, accel, dt);
        poses.push(pose);
    }
    Ok(EgoPlan { dt, poses })
}

pub fn desired_speed(params: &IdmParams, map: &MapContext, route: &RoutePath, station: f64) -> f64 {
    params.desired_speed.unwrap_or_else(|| {
        map.lane(route.lane_at(station))
            .map(|l| l.speed_limit)
            .unwrap_or(f64::INFINITY)
    })
}
