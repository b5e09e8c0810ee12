use serde::{Deserialize, Serialize};

use super::{Vec2, WorldState};

pub const SCAN_RAY_COUNT: usize = 180;
pub const SCAN_MAX_RANGE: f64 = 10.0;

/// One 360-degree range scan. Ray `i` points at `heading + i * 2pi / ray_count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scan {
    /// Robot position when the scan was taken.
    pub origin: Vec2,
    /// Robot heading when the scan was taken.
    pub heading: f64,
    pub max_range: f64,
    /// World-frame end point of every ray; misses sit at `max_range`.
    pub points: Vec<Vec2>,
    pub ranges: Vec<f64>,
}

impl Scan {
    pub fn ray_count(&self) -> usize {
        self.points.len()
    }

    pub fn is_hit(&self, ray: usize) -> bool {
        self.ranges[ray] < self.max_range
    }

    pub fn hits(&self) -> impl Iterator<Item = Vec2> + '_ {
        self.points
            .iter()
            .zip(&self.ranges)
            .filter(move |(_, &r)| r < self.max_range)
            .map(|(p, _)| *p)
    }
}

fn ray_circle(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let b = oc.dot(&dir);
    let c = oc.norm_squared() - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t >= 0.0).then_some(t)
}

/// Exit distance from inside the field box along `dir`.
fn ray_field_exit(origin: Vec2, dir: Vec2, half: f64) -> f64 {
    let mut t = f64::INFINITY;
    for axis in 0..2 {
        if dir[axis] > 1e-15 {
            t = t.min((half - origin[axis]) / dir[axis]);
        } else if dir[axis] < -1e-15 {
            t = t.min((-half - origin[axis]) / dir[axis]);
        }
    }
    t.max(0.0)
}

impl WorldState {
    /// Noise-free first-hit ray casting against obstacles, pillars and walls.
    pub fn sense(&self) -> Scan {
        let origin = self.robot_position();
        let heading = self.robot.pose.theta;
        let step = 2.0 * std::f64::consts::PI / SCAN_RAY_COUNT as f64;
        let mut points = Vec::with_capacity(SCAN_RAY_COUNT);
        let mut ranges = Vec::with_capacity(SCAN_RAY_COUNT);
        for i in 0..SCAN_RAY_COUNT {
            let angle = heading + step * i as f64;
            let dir = Vec2::new(angle.cos(), angle.sin());
            let mut t = ray_field_exit(origin, dir, self.map.field_half_extent).min(SCAN_MAX_RANGE);
            for pillar in &self.map.pillars {
                if let Some(h) = pillar.ray_hit(origin, dir) {
                    t = t.min(h);
                }
            }
            for o in &self.obstacles {
                if let Some(h) = ray_circle(origin, dir, o.position, o.radius) {
                    t = t.min(h);
                }
            }
            points.push(origin + dir * t);
            ranges.push(t);
        }
        Scan {
            origin,
            heading,
            max_range: SCAN_MAX_RANGE,
            points,
            ranges,
        }
    }
}
