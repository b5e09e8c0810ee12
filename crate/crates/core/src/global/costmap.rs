use std::sync::Arc;

use crate::world::{PrebuiltMap, Scan, Vec2, ROBOT_RADIUS};

pub const COSTMAP_RESOLUTION: f64 = 0.25;
pub const INFLATION_RADIUS: f64 = ROBOT_RADIUS;
/// Scan hits are rasterized as discs of this radius before inflation.
pub const SCAN_POINT_RADIUS: f64 = 0.3;
/// Scan hits this close to a pillar or a wall are already explained by the map.
const KNOWN_SURFACE_TOLERANCE: f64 = 0.01;

pub type Cell = (usize, usize);

/// Inflated boolean occupancy lattice over the whole field, row-major in y.
#[derive(Debug, Clone, PartialEq)]
pub struct Costmap {
    pub resolution: f64,
    pub inflation_radius: f64,
    /// World coordinates of the lattice's lower-left corner.
    pub origin: Vec2,
    pub width: usize,
    pub height: usize,
    occupied: Vec<bool>,
    /// The prebuilt map this lattice was rasterized from, if any.
    map: Option<Arc<PrebuiltMap>>,
}

impl Costmap {
    /// Raw lattice with the given occupancy, no inflation applied.
    pub fn from_occupancy(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Vec2,
        occupied: Vec<bool>,
    ) -> Self {
        assert_eq!(occupied.len(), width * height);
        Self {
            resolution,
            inflation_radius: 0.0,
            origin,
            width,
            height,
            occupied,
            map: None,
        }
    }

    /// Inflated pillars and walls only.
    pub fn from_map(map: &PrebuiltMap) -> Self {
        let resolution = COSTMAP_RESOLUTION;
        let size = 2.0 * map.field_half_extent;
        let n = (size / resolution).round() as usize;
        let origin = Vec2::new(-map.field_half_extent, -map.field_half_extent);
        let mut cm = Self {
            resolution,
            inflation_radius: INFLATION_RADIUS,
            origin,
            width: n,
            height: n,
            occupied: vec![false; n * n],
            map: None,
        };
        for iy in 0..n {
            for ix in 0..n {
                let c = cm.cell_center((ix, iy));
                let blocked = map.distance_to_boundary(c) <= INFLATION_RADIUS
                    || map.distance_to_pillars(c) <= INFLATION_RADIUS;
                cm.occupied[iy * n + ix] = blocked;
            }
        }
        cm.map = Some(Arc::new(map.clone()));
        cm
    }

    /// Adds scan hits on top of this (static) layer.
    pub fn with_scan(&self, map: &PrebuiltMap, scan: &Scan) -> Self {
        let mut cm = self.clone();
        let radius = SCAN_POINT_RADIUS + self.inflation_radius;
        for p in scan.hits() {
            let known = map.distance_to_pillars(p) <= KNOWN_SURFACE_TOLERANCE
                || map.distance_to_boundary(p) <= KNOWN_SURFACE_TOLERANCE;
            if !known {
                cm.fill_disc(p, radius);
            }
        }
        cm
    }

    /// Marks every cell whose center lies within `radius` of `center`.
    pub fn fill_disc(&mut self, center: Vec2, radius: f64) {
        let r2 = radius * radius;
        let lo = ((center - self.origin) / self.resolution)
            .map(|v| (v - radius / self.resolution).floor());
        let hi = ((center - self.origin) / self.resolution)
            .map(|v| (v + radius / self.resolution).ceil());
        let x0 = lo.x.max(0.0) as usize;
        let y0 = lo.y.max(0.0) as usize;
        let x1 = (hi.x.max(0.0) as usize).min(self.width.saturating_sub(1));
        let y1 = (hi.y.max(0.0) as usize).min(self.height.saturating_sub(1));
        for iy in y0..=y1 {
            for ix in x0..=x1 {
                if (self.cell_center((ix, iy)) - center).norm_squared() <= r2 {
                    self.occupied[iy * self.width + ix] = true;
                }
            }
        }
    }

    pub fn cell_center(&self, (ix, iy): Cell) -> Vec2 {
        self.origin
            + Vec2::new(
                (ix as f64 + 0.5) * self.resolution,
                (iy as f64 + 0.5) * self.resolution,
            )
    }

    pub fn cell_of(&self, p: Vec2) -> Option<Cell> {
        let q = (p - self.origin) / self.resolution;
        if q.x < 0.0 || q.y < 0.0 {
            return None;
        }
        let (ix, iy) = (q.x.floor() as usize, q.y.floor() as usize);
        (ix < self.width && iy < self.height).then_some((ix, iy))
    }

    pub fn index(&self, (ix, iy): Cell) -> usize {
        iy * self.width + ix
    }

    pub fn cell_occupied(&self, cell: Cell) -> bool {
        self.occupied[self.index(cell)]
    }

    /// Points outside the lattice count as occupied.
    pub fn is_free(&self, p: Vec2) -> bool {
        self.cell_of(p).is_some_and(|c| !self.cell_occupied(c))
    }

    /// Exact check against the prebuilt map: `p` keeps `inflation_radius + margin`
    /// from every pillar and wall. Without a map only the lattice bounds apply.
    pub fn static_clear_within(&self, p: Vec2, margin: f64) -> bool {
        if self.cell_of(p).is_none() {
            return false;
        }
        self.map.as_ref().is_none_or(|m| {
            let keep = self.inflation_radius + margin;
            m.distance_to_pillars(p) > keep && m.distance_to_boundary(p) > keep
        })
    }

    /// Samples the segment every `step` meters (both endpoints included).
    pub fn segment_free(&self, a: Vec2, b: Vec2, step: f64) -> bool {
        let len = (b - a).norm();
        let n = (len / step).ceil().max(1.0) as usize;
        (0..=n).all(|i| self.is_free(a + (b - a) * (i as f64 / n as f64)))
    }

    /// Exact test: every cell the segment touches is free. Implies
    /// `segment_free` for any step and for any sub-segment.
    pub fn segment_clear(&self, a: Vec2, b: Vec2) -> bool {
        let (Some(ca), Some(cb)) = (self.cell_of(a), self.cell_of(b)) else {
            return false;
        };
        let (mut x, mut y) = (ca.0 as i64, ca.1 as i64);
        let (tx, ty) = (cb.0 as i64, cb.1 as i64);
        let free = |x: i64, y: i64| {
            x >= 0
                && y >= 0
                && (x as usize) < self.width
                && (y as usize) < self.height
                && !self.cell_occupied((x as usize, y as usize))
        };
        if !free(x, y) {
            return false;
        }
        let d = (b - a) / self.resolution;
        let q = (a - self.origin) / self.resolution;
        let (sx, sy) = (d.x.signum() as i64, d.y.signum() as i64);
        let next_t = |pos: f64, cell: i64, dir: f64| {
            if dir > 0.0 {
                ((cell + 1) as f64 - pos) / dir
            } else if dir < 0.0 {
                (cell as f64 - pos) / dir
            } else {
                f64::INFINITY
            }
        };
        let mut t_x = next_t(q.x, x, d.x);
        let mut t_y = next_t(q.y, y, d.y);
        let dt_x = if d.x != 0.0 {
            1.0 / d.x.abs()
        } else {
            f64::INFINITY
        };
        let dt_y = if d.y != 0.0 {
            1.0 / d.y.abs()
        } else {
            f64::INFINITY
        };
        let mut budget = (tx - x).abs() + (ty - y).abs() + 2;
        while (x, y) != (tx, ty) {
            budget -= 1;
            if budget < 0 {
                return false;
            }
            if (t_x - t_y).abs() < 1e-12 {
                // through a corner: both side cells count as touched
                if !free(x + sx, y) || !free(x, y + sy) {
                    return false;
                }
                x += sx;
                y += sy;
                t_x += dt_x;
                t_y += dt_y;
            } else if t_x < t_y {
                x += sx;
                t_x += dt_x;
            } else {
                y += sy;
                t_y += dt_y;
            }
            if !free(x, y) {
                return false;
            }
        }
        true
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupied
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    /// Nearest free cell center within `max_dist` of `p` (`p` itself when its cell is free).
    pub fn nearest_free(&self, p: Vec2, max_dist: f64) -> Option<Vec2> {
        if self.is_free(p) {
            return Some(p);
        }
        let reach = (max_dist / self.resolution).ceil() as i64 + 1;
        let q = (p - self.origin) / self.resolution;
        let (cx, cy) = (q.x.floor() as i64, q.y.floor() as i64);
        let mut best: Option<(f64, Cell)> = None;
        for iy in (cy - reach)..=(cy + reach) {
            for ix in (cx - reach)..=(cx + reach) {
                if ix < 0 || iy < 0 || ix as usize >= self.width || iy as usize >= self.height {
                    continue;
                }
                let cell = (ix as usize, iy as usize);
                if self.cell_occupied(cell) {
                    continue;
                }
                let d = (self.cell_center(cell) - p).norm();
                if d <= max_dist && best.is_none_or(|(bd, bc)| d < bd || (d == bd && cell < bc)) {
                    best = Some((d, cell));
                }
            }
        }
        best.map(|(_, c)| self.cell_center(c))
    }

    /// Euclidean distance from each cell center to the nearest occupied cell center.
    pub fn clearance_field(&self) -> ClearanceField {
        ClearanceField::from_costmap(self)
    }
}

/// Exact Euclidean distance transform of a costmap (separable lower-envelope algorithm).
#[derive(Debug, Clone)]
pub struct ClearanceField {
    resolution: f64,
    origin: Vec2,
    width: usize,
    height: usize,
    dist: Vec<f64>,
}

fn edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0f64; n + 1];
    let mut k = 0usize;
    let mut first = None;
    for (q, &fq) in f.iter().enumerate() {
        if fq.is_finite() {
            first = Some(q);
            break;
        }
    }
    let Some(first) = first else {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    };
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in (first + 1)..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let p = v[k];
            let s =
                ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

impl ClearanceField {
    fn from_costmap(cm: &Costmap) -> Self {
        let (w, h) = (cm.width, cm.height);
        let mut grid: Vec<f64> = cm
            .occupied
            .iter()
            .map(|&o| if o { 0.0 } else { f64::INFINITY })
            .collect();
        let mut col = vec![0.0; h];
        let mut col_out = vec![0.0; h];
        for x in 0..w {
            for y in 0..h {
                col[y] = grid[y * w + x];
            }
            edt_1d(&col, &mut col_out);
            for y in 0..h {
                grid[y * w + x] = col_out[y];
            }
        }
        let mut row_out = vec![0.0; w];
        for y in 0..h {
            edt_1d(&grid[y * w..(y + 1) * w], &mut row_out);
            grid[y * w..(y + 1) * w].copy_from_slice(&row_out);
        }
        let dist = grid
            .into_iter()
            .map(|d2| d2.sqrt() * cm.resolution)
            .collect();
        Self {
            resolution: cm.resolution,
            origin: cm.origin,
            width: w,
            height: h,
            dist,
        }
    }

    /// Clearance of the cell containing `p`; zero outside the lattice.
    pub fn at(&self, p: Vec2) -> f64 {
        let q = (p - self.origin) / self.resolution;
        if q.x < 0.0 || q.y < 0.0 {
            return 0.0;
        }
        let (ix, iy) = (q.x.floor() as usize, q.y.floor() as usize);
        if ix >= self.width || iy >= self.height {
            return 0.0;
        }
        self.dist[iy * self.width + ix]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{MapKind, Pose2D, SCAN_MAX_RANGE};

    fn scan_with_hits(origin: Vec2, hits: &[Vec2]) -> Scan {
        let mut points = Vec::new();
        let mut ranges = Vec::new();
        for &h in hits {
            points.push(h);
            ranges.push((h - origin).norm());
        }
        // one miss that must not be rasterized
        points.push(origin + Vec2::new(SCAN_MAX_RANGE, 0.0));
        ranges.push(SCAN_MAX_RANGE);
        Scan {
            origin,
            heading: 0.0,
            max_range: SCAN_MAX_RANGE,
            points,
            ranges,
        }
    }

    #[test]
    fn static_layer_is_inflated_pillars_and_walls() {
        let map = PrebuiltMap::new(MapKind::Nine, 20.0);
        let cm = Costmap::from_map(&map);
        assert_eq!((cm.width, cm.height), (80, 80));
        let empty = Scan {
            origin: Vec2::zeros(),
            heading: 0.0,
            max_range: SCAN_MAX_RANGE,
            points: vec![],
            ranges: vec![],
        };
        let with = cm.with_scan(&map, &empty);
        assert_eq!(with, cm);
        for iy in 0..80 {
            for ix in 0..80 {
                let c = cm.cell_center((ix, iy));
                let expect =
                    map.distance_to_boundary(c) <= 1.0 || map.distance_to_pillars(c) <= 1.0;
                assert_eq!(cm.cell_occupied((ix, iy)), expect);
            }
        }
    }

    #[test]
    fn scan_hit_occupies_inflated_disc() {
        let mut map = PrebuiltMap::new(MapKind::Nine, 20.0);
        map.pillars.clear();
        let cm = Costmap::from_map(&map);
        let hit = Vec2::new(5.0, 5.0);
        let out = cm.with_scan(&map, &scan_with_hits(Vec2::new(2.0, 5.0), &[hit]));
        for iy in 0..80 {
            for ix in 0..80 {
                let c = out.cell_center((ix, iy));
                let expect = map.distance_to_boundary(c) <= 1.0 || (c - hit).norm() <= 1.3;
                assert_eq!(out.cell_occupied((ix, iy)), expect, "cell {ix},{iy}");
            }
        }
    }

    #[test]
    fn hits_on_known_map_are_not_rasterized() {
        let map = PrebuiltMap::new(MapKind::Sixteen, 20.0);
        let cm = Costmap::from_map(&map);
        let pillar = map.pillars[5];
        let face = pillar.center - Vec2::new(pillar.half(), 0.0);
        let wall = Vec2::new(10.0, 3.0);
        let out = cm.with_scan(
            &map,
            &scan_with_hits(face - Vec2::new(1.5, 0.0), &[face, wall]),
        );
        assert_eq!(out, cm);
    }

    #[test]
    fn costmap_from_sensed_scan_is_deterministic() {
        let w = crate::world::spawn_scenario(&Default::default()).unwrap();
        let base = Costmap::from_map(&w.map);
        let a = base.with_scan(&w.map, &w.sense());
        let b = base.with_scan(&w.map, &w.sense());
        assert_eq!(a, b);
        assert!(a.occupied_count() >= base.occupied_count());
        let _ = Pose2D::default();
    }

    #[test]
    fn clearance_matches_brute_force() {
        let mut occ = vec![false; 30 * 20];
        for &(x, y) in &[(3usize, 4usize), (20, 10), (29, 19), (10, 0)] {
            occ[y * 30 + x] = true;
        }
        let cm = Costmap::from_occupancy(30, 20, 0.5, Vec2::zeros(), occ.clone());
        let field = cm.clearance_field();
        for y in 0..20 {
            for x in 0..30 {
                let c = cm.cell_center((x, y));
                let mut best = f64::INFINITY;
                for yy in 0..20 {
                    for xx in 0..30 {
                        if occ[yy * 30 + xx] {
                            best = best.min((cm.cell_center((xx, yy)) - c).norm());
                        }
                    }
                }
                assert!(
                    (field.at(c) - best).abs() < 1e-9,
                    "({x},{y}) {} vs {best}",
                    field.at(c)
                );
            }
        }
    }

    #[test]
    fn nearest_free_substitutes_blocked_point() {
        let mut occ = vec![false; 10 * 10];
        occ[5 * 10 + 5] = true;
        let cm = Costmap::from_occupancy(10, 10, 1.0, Vec2::zeros(), occ);
        let p = Vec2::new(5.5, 5.5);
        let q = cm.nearest_free(p, 1.0).unwrap();
        assert!((q - p).norm() <= 1.0 + 1e-12);
        assert!(cm.is_free(q));
        assert_eq!(
            cm.nearest_free(Vec2::new(1.2, 1.2), 1.0),
            Some(Vec2::new(1.2, 1.2))
        );
    }

    proptest::proptest! {
        #[test]
        fn clear_segments_are_free_at_any_sampling(
            occ in proptest::collection::vec(proptest::bool::weighted(0.15), 400),
            ax in 0.0..5.0f64, ay in 0.0..5.0f64, bx in 0.0..5.0f64, by in 0.0..5.0f64,
            t0 in 0.0..1.0f64, t1 in 0.0..1.0f64,
        ) {
            let cm = Costmap::from_occupancy(20, 20, 0.25, Vec2::zeros(), occ);
            let (a, b) = (Vec2::new(ax, ay), Vec2::new(bx, by));
            if cm.segment_clear(a, b) {
                proptest::prop_assert!(cm.segment_free(a, b, 0.01));
                let (p, q) = (a + (b - a) * t0.min(t1), a + (b - a) * t0.max(t1));
                proptest::prop_assert!(cm.segment_free(p, q, 0.05));
            }
        }
    }

    #[test]
    fn clear_segment_rejects_blocked_corner_passage() {
        let mut occ = vec![false; 16];
        occ[1] = true; // cell (1, 0)
        let cm = Costmap::from_occupancy(4, 4, 1.0, Vec2::zeros(), occ);
        assert!(!cm.segment_clear(Vec2::new(0.5, 0.5), Vec2::new(1.5, 1.5)));
        assert!(cm.segment_clear(Vec2::new(0.5, 0.5), Vec2::new(0.5, 3.5)));
        assert!(!cm.segment_clear(Vec2::new(0.5, 0.5), Vec2::new(3.5, 0.5)));
    }

    #[test]
    fn static_check_uses_exact_geometry() {
        let map = PrebuiltMap::new(MapKind::Sixteen, 20.0);
        let cm = Costmap::from_map(&map);
        // pillar centred at (6, -6) with side 1: its right face is at x = 6.5
        assert!(cm.static_clear_within(Vec2::new(7.55, -6.0), 0.02));
        assert!(!cm.static_clear_within(Vec2::new(7.51, -6.0), 0.02));
        assert!(!cm.static_clear_within(Vec2::new(9.0, 0.0), 0.02));
        let raw = Costmap::from_occupancy(4, 4, 1.0, Vec2::zeros(), vec![true; 16]);
        assert!(raw.static_clear_within(Vec2::new(1.0, 1.0), 0.5));
        assert!(!raw.static_clear_within(Vec2::new(5.0, 1.0), 0.5));
    }
}
