use serde::{Deserialize, Serialize};

use super::costmap::Costmap;
use crate::world::Vec2;

/// Maximum spacing between consecutive waypoints.
pub const WAYPOINT_SPACING: f64 = 1.0;
/// Sampling step for segment feasibility checks.
pub const FEASIBILITY_STEP: f64 = 0.05;

/// Output of a global planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePath {
    pub waypoints: Vec<Vec2>,
    /// Simulation time of the observation the plan was computed from.
    pub planned_at: f64,
}

impl ReferencePath {
    pub fn new(waypoints: Vec<Vec2>, planned_at: f64) -> Self {
        debug_assert!(waypoints.len() >= 2);
        Self {
            waypoints,
            planned_at,
        }
    }

    pub fn length(&self) -> f64 {
        polyline_length(&self.waypoints)
    }

    pub fn first(&self) -> Vec2 {
        self.waypoints[0]
    }

    pub fn last(&self) -> Vec2 {
        *self.waypoints.last().expect("non-empty path")
    }

    /// Every point of the path at `step` spacing lies in a free cell.
    pub fn is_feasible(&self, costmap: &Costmap, step: f64) -> bool {
        self.waypoints
            .windows(2)
            .all(|w| costmap.segment_free(w[0], w[1], step))
    }

    pub fn max_spacing(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .fold(0.0, f64::max)
    }
}

pub fn polyline_length(points: &[Vec2]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Splits every segment so no piece is longer than `max_spacing`.
pub fn densify(points: &[Vec2], max_spacing: f64) -> Vec<Vec2> {
    let mut out = Vec::with_capacity(points.len());
    if let Some(&first) = points.first() {
        out.push(first);
    }
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let pieces = ((b - a).norm() / max_spacing - 1e-9).ceil().max(1.0) as usize;
        for i in 1..=pieces {
            out.push(a + (b - a) * (i as f64 / pieces as f64));
        }
    }
    out
}

/// Greedy line-of-sight thinning of a dense chain.
///
/// From each kept point, jumps to the furthest later point whose arc length is
/// within `max_spacing` and whose chord is collision-free. Neighbours in the
/// input chain must already be connected by free segments.
pub fn extract_waypoints(chain: &[Vec2], costmap: &Costmap, max_spacing: f64) -> Vec<Vec2> {
    if chain.len() <= 1 {
        let p = chain.first().copied().unwrap_or_else(Vec2::zeros);
        return vec![p, p];
    }
    let mut arc = Vec::with_capacity(chain.len());
    let mut s = 0.0;
    arc.push(0.0);
    for w in chain.windows(2) {
        s += (w[1] - w[0]).norm();
        arc.push(s);
    }
    let mut out = vec![chain[0]];
    let mut i = 0;
    while i + 1 < chain.len() {
        let mut next = i + 1;
        let mut j = i + 2;
        while j < chain.len() && arc[j] - arc[i] <= max_spacing {
            if costmap.segment_clear(chain[i], chain[j]) {
                next = j;
            }
            j += 1;
        }
        out.push(chain[next]);
        i = next;
    }
    out
}
