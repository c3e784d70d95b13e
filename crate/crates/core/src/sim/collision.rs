//! Oriented-rectangle footprints and the separating-axis overlap test.

use crate::geometry::Vec2;
use crate::world::{AgentState, EgoState, Extent, Pose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub center: Vec2,
    pub heading: f64,
    pub extent: Extent,
}

impl Footprint {
    pub fn new(center: Vec2, heading: f64, extent: Extent) -> Self {
        Self {
            center,
            heading,
            extent,
        }
    }

    pub fn of_agent(a: &AgentState) -> Self {
        Self::new(a.position, a.heading, a.extent)
    }

    pub fn of_ego(e: &EgoState) -> Self {
        Self::new(e.position, e.heading, e.extent)
    }

    pub fn at_pose(pose: &Pose, extent: Extent) -> Self {
        Self::new(pose.position, pose.heading, extent)
    }

    fn axes(&self) -> [Vec2; 2] {
        let u = Vec2::from_polar(1.0, self.heading);
        [u, Vec2::new(-u.y, u.x)]
    }

    /// Half-size of the rectangle projected onto the unit axis `axis`.
    fn radius_along(&self, axis: Vec2) -> f64 {
        let [u, v] = self.axes();
        self.extent.half_length * u.dot(axis).abs() + self.extent.half_width * v.dot(axis).abs()
    }
}

/// True when the rectangles overlap or touch.
pub fn collision(a: &Footprint, b: &Footprint) -> bool {
    let d = b.center - a.center;
    let reach = a.extent.circumradius() + b.extent.circumradius();
    if d.norm_squared() > reach * reach * (1.0 + 1e-12) {
        return false;
    }
    let tol = 1e-9 * (1.0 + reach);
    for axis in a.axes().into_iter().chain(b.axes()) {
        if d.dot(axis).abs() > a.radius_along(axis) + b.radius_along(axis) + tol {
            return false;
        }
    }
    true
}
