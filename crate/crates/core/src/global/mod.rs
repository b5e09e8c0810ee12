//! Global planners: map + scan + robot position + goal to a reference path.

pub mod costmap;
pub mod dijkstra;
pub mod path;
pub mod prm;
pub mod rrt_star;

use serde::{Deserialize, Serialize};

pub use costmap::{ClearanceField, Costmap};
pub use dijkstra::{plan_dijkstra, plan_dijkstra_detailed, LatticeCost, LatticePlan};
pub use path::ReferencePath;
pub use prm::{prm_build, prm_query, Roadmap};
pub use rrt_star::{plan_rrt_star, RrtStarConfig};

use crate::error::Result;
use crate::world::Vec2;

/// Blocked starts may move this far to the nearest free cell.
pub const START_SUBSTITUTION: f64 = 1.0;
/// Blocked goals may only move within the goal tolerance.
pub const GOAL_SUBSTITUTION: f64 = 0.5;

/// Moves blocked endpoints onto nearby free cells; `None` if either cannot be placed.
pub(crate) fn resolve_endpoints(
    costmap: &Costmap,
    start: Vec2,
    goal: Vec2,
) -> Option<(Vec2, Vec2)> {
    let s = costmap.nearest_free(start, START_SUBSTITUTION)?;
    let g = costmap.nearest_free(goal, GOAL_SUBSTITUTION)?;
    Some((s, g))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GlobalPlannerKind {
    Dijkstra,
    RrtStar,
    Prm,
}

impl std::fmt::Display for GlobalPlannerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GlobalPlannerKind::Dijkstra => "dijkstra",
            GlobalPlannerKind::RrtStar => "rrt_star",
            GlobalPlannerKind::Prm => "prm",
        })
    }
}

/// A global planner instance owned by one episode.
#[derive(Debug, Clone)]
pub enum GlobalPlanner {
    Dijkstra,
    RrtStar(RrtStarConfig),
    /// Roadmap built once per episode from the pillar-only costmap.
    Prm(Box<Roadmap>),
}

impl GlobalPlanner {
    pub fn new(kind: GlobalPlannerKind, static_costmap: &Costmap, seed: u64) -> Self {
        match kind {
            GlobalPlannerKind::Dijkstra => GlobalPlanner::Dijkstra,
            GlobalPlannerKind::RrtStar => GlobalPlanner::RrtStar(RrtStarConfig::default()),
            GlobalPlannerKind::Prm => GlobalPlanner::Prm(Box::new(prm_build(static_costmap, seed))),
        }
    }

    pub fn kind(&self) -> GlobalPlannerKind {
        match self {
            GlobalPlanner::Dijkstra => GlobalPlannerKind::Dijkstra,
            GlobalPlanner::RrtStar(_) => GlobalPlannerKind::RrtStar,
            GlobalPlanner::Prm(_) => GlobalPlannerKind::Prm,
        }
    }

    /// `seed` only matters for the sampling planners' per-call randomness.
    pub fn plan(
        &self,
        costmap: &Costmap,
        start: Vec2,
        goal: Vec2,
        seed: u64,
    ) -> Result<ReferencePath> {
        match self {
            GlobalPlanner::Dijkstra => plan_dijkstra(costmap, start, goal),
            GlobalPlanner::RrtStar(cfg) => {
                rrt_star::plan_rrt_star_with(costmap, start, goal, seed, cfg)
            }
            GlobalPlanner::Prm(roadmap) => roadmap.query(costmap, start, goal),
        }
    }
}
