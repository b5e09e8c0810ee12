use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::costmap::{Cell, Costmap};
use super::path::{extract_waypoints, ReferencePath, WAYPOINT_SPACING};
use super::resolve_endpoints;
use crate::error::{ReplanError, Result};
use crate::world::Vec2;

/// Path cost on the 8-connected lattice as a count of straight and diagonal moves.
///
/// Ordering compares `straight + diagonal * sqrt(2)` exactly, so two searches
/// over the same lattice agree on the optimum bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LatticeCost {
    pub straight: u32,
    pub diagonal: u32,
}

impl LatticeCost {
    pub const STRAIGHT: LatticeCost = LatticeCost {
        straight: 1,
        diagonal: 0,
    };
    pub const DIAGONAL: LatticeCost = LatticeCost {
        straight: 0,
        diagonal: 1,
    };

    pub fn meters(self, resolution: f64) -> f64 {
        (f64::from(self.straight) + f64::from(self.diagonal) * std::f64::consts::SQRT_2)
            * resolution
    }
}

impl std::ops::Add for LatticeCost {
    type Output = LatticeCost;

    fn add(self, rhs: LatticeCost) -> LatticeCost {
        LatticeCost {
            straight: self.straight + rhs.straight,
            diagonal: self.diagonal + rhs.diagonal,
        }
    }
}

impl Ord for LatticeCost {
    fn cmp(&self, other: &Self) -> Ordering {
        // sign of da + db * sqrt(2)
        let da = i64::from(self.straight) - i64::from(other.straight);
        let db = i64::from(self.diagonal) - i64::from(other.diagonal);
        match (da.signum(), db.signum()) {
            (0, 0) => Ordering::Equal,
            (a, b) if a >= 0 && b >= 0 => Ordering::Greater,
            (a, b) if a <= 0 && b <= 0 => Ordering::Less,
            (1, _) => (da * da).cmp(&(2 * db * db)),
            _ => (2 * db * db).cmp(&(da * da)),
        }
    }
}

impl PartialOrd for LatticeCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Free 8-neighbours of `cell`. Diagonal moves may not cut an occupied corner.
pub fn lattice_neighbors(
    cm: &Costmap,
    (x, y): Cell,
) -> impl Iterator<Item = (Cell, LatticeCost)> + '_ {
    const MOVES: [(i64, i64); 8] = [
        (1, 0),
        (-1, 0),
        (0, 1),
        (0, -1),
        (1, 1),
        (1, -1),
        (-1, 1),
        (-1, -1),
    ];
    let free = move |cx: i64, cy: i64| {
        cx >= 0
            && cy >= 0
            && (cx as usize) < cm.width
            && (cy as usize) < cm.height
            && !cm.cell_occupied((cx as usize, cy as usize))
    };
    MOVES.iter().filter_map(move |&(dx, dy)| {
        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
        if !free(nx, ny) {
            return None;
        }
        if dx != 0 && dy != 0 {
            if !free(x as i64 + dx, y as i64) || !free(x as i64, y as i64 + dy) {
                return None;
            }
            Some(((nx as usize, ny as usize), LatticeCost::DIAGONAL))
        } else {
            Some(((nx as usize, ny as usize), LatticeCost::STRAIGHT))
        }
    })
}

/// Shortest cell sequence between two free cells, or `None` when unreachable.
pub fn lattice_shortest_path(
    cm: &Costmap,
    start: Cell,
    goal: Cell,
) -> Option<(LatticeCost, Vec<Cell>)> {
    if cm.cell_occupied(start) || cm.cell_occupied(goal) {
        return None;
    }
    let n = cm.width * cm.height;
    let mut dist: Vec<Option<LatticeCost>> = vec![None; n];
    let mut parent = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    let s = cm.index(start);
    dist[s] = Some(LatticeCost::default());
    heap.push(Reverse((LatticeCost::default(), s)));
    let g = cm.index(goal);
    while let Some(Reverse((d, u))) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        if u == g {
            break;
        }
        let cell = (u % cm.width, u / cm.width);
        for (nb, step) in lattice_neighbors(cm, cell) {
            let v = cm.index(nb);
            let nd = d + step;
            if !done[v] && dist[v].is_none_or(|old| nd < old) {
                dist[v] = Some(nd);
                parent[v] = u;
                heap.push(Reverse((nd, v)));
            }
        }
    }
    let cost = dist[g]?;
    let mut cells = vec![goal];
    let mut cur = g;
    while cur != s {
        cur = parent[cur];
        cells.push((cur % cm.width, cur / cm.width));
    }
    cells.reverse();
    Some((cost, cells))
}

/// Dijkstra plan plus its lattice cost.
#[derive(Debug, Clone)]
pub struct LatticePlan {
    pub path: ReferencePath,
    pub cost: LatticeCost,
    /// Resolved endpoints (after substituting blocked start/goal).
    pub start: Vec2,
    pub goal: Vec2,
}

impl LatticePlan {
    /// Length of `start -> cell chain -> goal`; never shorter than the straight line.
    pub fn length_from(&self, start: Vec2, goal: Vec2, resolution: f64) -> f64 {
        (start - self.path.first()).norm()
            + self.cost.meters(resolution)
            + (self.path.last() - goal).norm()
    }
}

pub fn plan_dijkstra_detailed(costmap: &Costmap, start: Vec2, goal: Vec2) -> Result<LatticePlan> {
    let no_path = || ReplanError::NoPath {
        start: (start.x, start.y),
        goal: (goal.x, goal.y),
    };
    let (s, g) = resolve_endpoints(costmap, start, goal).ok_or_else(no_path)?;
    let sc = costmap.cell_of(s).ok_or_else(no_path)?;
    let gc = costmap.cell_of(g).ok_or_else(no_path)?;
    let (cost, cells) = lattice_shortest_path(costmap, sc, gc).ok_or_else(no_path)?;
    let chain: Vec<Vec2> = cells.iter().map(|&c| costmap.cell_center(c)).collect();
    let waypoints = extract_waypoints(&chain, costmap, WAYPOINT_SPACING);
    Ok(LatticePlan {
        path: ReferencePath::new(waypoints, 0.0),
        cost,
        start: s,
        goal: g,
    })
}

/// 8-connected grid Dijkstra followed by waypoint extraction.
pub fn plan_dijkstra(costmap: &Costmap, start: Vec2, goal: Vec2) -> Result<ReferencePath> {
    plan_dijkstra_detailed(costmap, start, goal).map(|p| p.path)
}
