use std::cell::RefCell;
use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ordered_float::OrderedFloat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::costmap::Costmap;
use super::path::{densify, ReferencePath, WAYPOINT_SPACING};
use super::resolve_endpoints;
use crate::error::{ReplanError, Result};
use crate::world::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrmConfig {
    pub samples: usize,
    pub neighbors: usize,
}

impl Default for PrmConfig {
    fn default() -> Self {
        Self {
            samples: 500,
            neighbors: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadmapEdge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

/// Probabilistic roadmap over the static map. Immutable once built.
#[derive(Debug, Clone)]
pub struct Roadmap {
    pub nodes: Vec<Vec2>,
    pub edges: Vec<RoadmapEdge>,
    /// Per node: `(neighbor, edge index)`.
    adjacency: Vec<Vec<(usize, usize)>>,
    cfg: PrmConfig,
}

fn k_nearest(points: &[Vec2], p: Vec2, k: usize, skip: Option<usize>) -> Vec<usize> {
    let mut idx: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(i, q)| ((q - p).norm_squared(), i))
        .collect();
    idx.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    idx.truncate(k);
    idx.into_iter().map(|(_, i)| i).collect()
}

pub fn prm_build(static_costmap: &Costmap, seed: u64) -> Roadmap {
    prm_build_with(static_costmap, seed, PrmConfig::default())
}

pub fn prm_build_with(static_costmap: &Costmap, seed: u64, cfg: PrmConfig) -> Roadmap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = static_costmap.origin;
    let span = Vec2::new(
        static_costmap.width as f64 * static_costmap.resolution,
        static_costmap.height as f64 * static_costmap.resolution,
    );
    let mut nodes = Vec::with_capacity(cfg.samples);
    let max_draws = cfg.samples * 1000;
    let mut draws = 0;
    while nodes.len() < cfg.samples && draws < max_draws {
        draws += 1;
        let p = lo + Vec2::new(rng.random_range(0.0..span.x), rng.random_range(0.0..span.y));
        if static_costmap.is_free(p) {
            nodes.push(p);
        }
    }

    let mut edges = Vec::new();
    let mut adjacency = vec![Vec::new(); nodes.len()];
    let mut seen = std::collections::HashSet::new();
    for (i, &p) in nodes.iter().enumerate() {
        for j in k_nearest(&nodes, p, cfg.neighbors, Some(i)) {
            let key = (i.min(j), i.max(j));
            if !seen.insert(key) {
                continue;
            }
            if static_costmap.segment_clear(nodes[key.0], nodes[key.1]) {
                let e = edges.len();
                edges.push(RoadmapEdge {
                    a: key.0,
                    b: key.1,
                    length: (nodes[key.1] - nodes[key.0]).norm(),
                });
                adjacency[key.0].push((key.1, e));
                adjacency[key.1].push((key.0, e));
            }
        }
    }
    Roadmap {
        nodes,
        edges,
        adjacency,
        cfg,
    }
}

impl Roadmap {
    /// Shortest roadmap route under the current costmap. Edges blocked now are
    /// skipped for this query only.
    pub fn query(&self, costmap_now: &Costmap, start: Vec2, goal: Vec2) -> Result<ReferencePath> {
        let no_path = || ReplanError::NoPath {
            start: (start.x, start.y),
            goal: (goal.x, goal.y),
        };
        let (s, g) = resolve_endpoints(costmap_now, start, goal).ok_or_else(no_path)?;
        if (s - g).norm() < 1e-9 {
            return Ok(ReferencePath::new(vec![s, g], 0.0));
        }
        let n = self.nodes.len();
        let edge_ok: RefCell<Vec<Option<bool>>> = RefCell::new(vec![None; self.edges.len()]);
        let enabled = |e: usize| {
            let mut memo = edge_ok.borrow_mut();
            *memo[e].get_or_insert_with(|| {
                let edge = self.edges[e];
                costmap_now.segment_clear(self.nodes[edge.a], self.nodes[edge.b])
            })
        };
        let connect = |p: Vec2| -> Vec<(usize, f64)> {
            k_nearest(&self.nodes, p, self.cfg.neighbors, None)
                .into_iter()
                .filter(|&i| costmap_now.segment_clear(p, self.nodes[i]))
                .map(|i| (i, (self.nodes[i] - p).norm()))
                .collect()
        };
        let from_start = connect(s);
        let to_goal = connect(g);
        if from_start.is_empty() || to_goal.is_empty() {
            return Err(no_path());
        }

        // virtual nodes: n = start, n + 1 = goal
        let (vs, vg) = (n, n + 1);
        let mut dist = vec![f64::INFINITY; n + 2];
        let mut parent = vec![usize::MAX; n + 2];
        let mut heap = BinaryHeap::new();
        dist[vs] = 0.0;
        heap.push(Reverse((OrderedFloat(0.0), vs)));
        let mut goal_links = vec![None; n];
        for &(i, d) in &to_goal {
            goal_links[i] = Some(d);
        }
        while let Some(Reverse((OrderedFloat(d), u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            if u == vg {
                break;
            }
            let mut relax = |v: usize, w: f64, heap: &mut BinaryHeap<_>| {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    parent[v] = u;
                    heap.push(Reverse((OrderedFloat(nd), v)));
                }
            };
            if u == vs {
                for &(i, w) in &from_start {
                    relax(i, w, &mut heap);
                }
                continue;
            }
            for &(v, e) in &self.adjacency[u] {
                if enabled(e) {
                    relax(v, self.edges[e].length, &mut heap);
                }
            }
            if let Some(w) = goal_links[u] {
                relax(vg, w, &mut heap);
            }
        }
        if !dist[vg].is_finite() {
            return Err(no_path());
        }
        let mut pts = vec![g];
        let mut cur = parent[vg];
        while cur != vs {
            pts.push(self.nodes[cur]);
            cur = parent[cur];
        }
        pts.push(s);
        pts.reverse();
        Ok(ReferencePath::new(densify(&pts, WAYPOINT_SPACING), 0.0))
    }

    /// Indices of edges blocked by `costmap_now`.
    pub fn disabled_edges(&self, costmap_now: &Costmap) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| {
                let edge = self.edges[e];
                !costmap_now.segment_clear(self.nodes[edge.a], self.nodes[edge.b])
            })
            .collect()
    }
}

pub fn prm_query(
    roadmap: &Roadmap,
    costmap_now: &Costmap,
    start: Vec2,
    goal: Vec2,
) -> Result<ReferencePath> {
    roadmap.query(costmap_now, start, goal)
}
