use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::costmap::Costmap;
use super::path::{densify, ReferencePath, WAYPOINT_SPACING};
use super::resolve_endpoints;
use crate::error::{ReplanError, Result};
use crate::world::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RrtStarConfig {
    pub iterations: usize,
    pub step: f64,
    pub goal_bias: f64,
    pub gamma: f64,
    pub max_radius: f64,
}

impl Default for RrtStarConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            step: 1.0,
            goal_bias: 0.05,
            gamma: 28.0,
            max_radius: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    pos: Vec2,
    parent: Option<usize>,
    cost: f64,
    children: Vec<usize>,
}

/// RRT* search tree. Exposed so callers can read the best cost at several budgets.
#[derive(Debug, Clone)]
pub struct RrtStarTree {
    nodes: Vec<Node>,
    goal: Vec2,
    goal_parents: Vec<usize>,
    rng: ChaCha8Rng,
    cfg: RrtStarConfig,
    iterations_done: usize,
}

impl RrtStarTree {
    pub fn new(start: Vec2, goal: Vec2, seed: u64, cfg: RrtStarConfig) -> Self {
        Self {
            nodes: vec![Node {
                pos: start,
                parent: None,
                cost: 0.0,
                children: Vec::new(),
            }],
            goal,
            goal_parents: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            cfg,
            iterations_done: 0,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn iterations_done(&self) -> usize {
        self.iterations_done
    }

    fn rewire_radius(&self) -> f64 {
        let n = (self.nodes.len() + 1) as f64;
        (self.cfg.gamma * (n.ln() / n).sqrt()).min(self.cfg.max_radius)
    }

    fn propagate(&mut self, root: usize, delta: f64) {
        let mut stack = self.nodes[root].children.clone();
        while let Some(i) = stack.pop() {
            self.nodes[i].cost -= delta;
            stack.extend_from_slice(&self.nodes[i].children);
        }
    }

    /// Runs further iterations. The sample stream only depends on the seed.
    pub fn grow(&mut self, costmap: &Costmap, iterations: usize) {
        let lo = costmap.origin;
        let hi = costmap.origin
            + Vec2::new(
                costmap.width as f64 * costmap.resolution,
                costmap.height as f64 * costmap.resolution,
            );
        for _ in 0..iterations {
            self.iterations_done += 1;
            let sample = if self.rng.random_bool(self.cfg.goal_bias) {
                self.goal
            } else {
                Vec2::new(
                    self.rng.random_range(lo.x..hi.x),
                    self.rng.random_range(lo.y..hi.y),
                )
            };
            let nearest = self
                .nodes
                .iter()
                .enumerate()
                .map(|(i, n)| (i, (n.pos - sample).norm_squared()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(i, _)| i)
                .expect("tree has a root");
            let from = self.nodes[nearest].pos;
            let delta = sample - from;
            let d = delta.norm();
            if d < 1e-9 {
                continue;
            }
            let new_pos = if d > self.cfg.step {
                from + delta * (self.cfg.step / d)
            } else {
                sample
            };
            if !costmap.segment_clear(from, new_pos) {
                continue;
            }

            let radius = self.rewire_radius();
            let near: Vec<usize> = self
                .nodes
                .iter()
                .enumerate()
                .filter(|(_, n)| (n.pos - new_pos).norm() <= radius)
                .map(|(i, _)| i)
                .collect();

            let mut parent = nearest;
            let mut cost = self.nodes[nearest].cost + (new_pos - from).norm();
            for &i in &near {
                let c = self.nodes[i].cost + (self.nodes[i].pos - new_pos).norm();
                if c < cost && costmap.segment_clear(self.nodes[i].pos, new_pos) {
                    parent = i;
                    cost = c;
                }
            }
            let id = self.nodes.len();
            self.nodes.push(Node {
                pos: new_pos,
                parent: Some(parent),
                cost,
                children: Vec::new(),
            });
            self.nodes[parent].children.push(id);

            for &i in &near {
                if i == parent {
                    continue;
                }
                let via = cost + (self.nodes[i].pos - new_pos).norm();
                if via < self.nodes[i].cost && costmap.segment_clear(new_pos, self.nodes[i].pos) {
                    let old_parent = self.nodes[i].parent.expect("root is never rewired");
                    self.nodes[old_parent].children.retain(|&c| c != i);
                    self.nodes[id].children.push(i);
                    self.nodes[i].parent = Some(id);
                    let improvement = self.nodes[i].cost - via;
                    self.nodes[i].cost = via;
                    self.propagate(i, improvement);
                }
            }

            if (new_pos - self.goal).norm() <= self.cfg.step
                && costmap.segment_clear(new_pos, self.goal)
            {
                self.goal_parents.push(id);
            }
        }
    }

    /// Cheapest goal-connected node and the resulting path cost.
    pub fn best(&self) -> Option<(usize, f64)> {
        self.goal_parents
            .iter()
            .map(|&i| {
                (
                    i,
                    self.nodes[i].cost + (self.nodes[i].pos - self.goal).norm(),
                )
            })
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
    }

    pub fn best_cost(&self) -> Option<f64> {
        self.best().map(|(_, c)| c)
    }

    pub fn best_path(&self) -> Option<Vec<Vec2>> {
        let (mut i, _) = self.best()?;
        let mut pts = vec![self.goal];
        loop {
            pts.push(self.nodes[i].pos);
            match self.nodes[i].parent {
                Some(p) => i = p,
                None => break,
            }
        }
        pts.reverse();
        Some(pts)
    }
}

pub fn plan_rrt_star(
    costmap: &Costmap,
    start: Vec2,
    goal: Vec2,
    seed: u64,
) -> Result<ReferencePath> {
    plan_rrt_star_with(costmap, start, goal, seed, &RrtStarConfig::default())
}

pub fn plan_rrt_star_with(
    costmap: &Costmap,
    start: Vec2,
    goal: Vec2,
    seed: u64,
    cfg: &RrtStarConfig,
) -> Result<ReferencePath> {
    let no_path = || ReplanError::NoPath {
        start: (start.x, start.y),
        goal: (goal.x, goal.y),
    };
    let (s, g) = resolve_endpoints(costmap, start, goal).ok_or_else(no_path)?;
    if (s - g).norm() < 1e-9 {
        return Ok(ReferencePath::new(vec![s, g], 0.0));
    }
    let mut tree = RrtStarTree::new(s, g, seed, *cfg);
    tree.grow(costmap, cfg.iterations);
    let pts = tree.best_path().ok_or_else(no_path)?;
    Ok(ReferencePath::new(densify(&pts, WAYPOINT_SPACING), 0.0))
}
