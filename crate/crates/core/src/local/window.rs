use crate::global::ReferencePath;
use crate::world::Vec2;

/// Closest point on segment `ab` to `p` and its parameter in `[0, 1]`.
pub fn project_on_segment(p: Vec2, a: Vec2, b: Vec2) -> (Vec2, f64) {
    let d = b - a;
    let len2 = d.norm_squared();
    if len2 < 1e-18 {
        return (a, 0.0);
    }
    let t = ((p - a).dot(&d) / len2).clamp(0.0, 1.0);
    (a + d * t, t)
}

/// Stretch of the reference path ahead of the robot's nearest point.
///
/// Used for tracking costs so that rollouts are never scored against parts of
/// the path that lie behind the robot or across a pillar row.
#[derive(Debug, Clone, PartialEq)]
pub struct PathWindow {
    pub points: Vec<Vec2>,
    /// Arc length of the reference path beyond the window end.
    pub beyond: f64,
}

impl PathWindow {
    pub fn new(path: &ReferencePath, position: Vec2, span: f64) -> Self {
        let wp = &path.waypoints;
        if wp.len() < 2 {
            let p = wp.first().copied().unwrap_or(position);
            return Self {
                points: vec![p, p],
                beyond: 0.0,
            };
        }
        // nearest projection over the whole path, earliest segment on ties
        let mut best = (f64::INFINITY, 0usize, wp[0]);
        for (i, w) in wp.windows(2).enumerate() {
            let (q, _) = project_on_segment(position, w[0], w[1]);
            let d = (q - position).norm();
            if d < best.0 {
                best = (d, i, q);
            }
        }
        let (_, seg, start) = best;
        let mut points = vec![start];
        let mut left = span;
        let mut cursor = start;
        let mut beyond = 0.0;
        let mut i = seg + 1;
        while i < wp.len() {
            let next = wp[i];
            let d = (next - cursor).norm();
            if left > 0.0 {
                if d <= left {
                    points.push(next);
                    left -= d;
                } else {
                    let cut = cursor + (next - cursor) * (left / d);
                    points.push(cut);
                    beyond += d - left;
                    left = 0.0;
                }
            } else {
                beyond += d;
            }
            cursor = next;
            i += 1;
        }
        if points.len() == 1 {
            points.push(start);
        }
        Self { points, beyond }
    }

    pub fn end(&self) -> Vec2 {
        *self.points.last().expect("window has points")
    }

    pub fn length(&self) -> f64 {
        crate::global::path::polyline_length(&self.points)
    }

    /// Point at arc length `s` along the window, clamped to its ends.
    pub fn point_at(&self, s: f64) -> Vec2 {
        let mut left = s.max(0.0);
        for w in self.points.windows(2) {
            let seg = (w[1] - w[0]).norm();
            if left <= seg && seg > 0.0 {
                return w[0] + (w[1] - w[0]) * (left / seg);
            }
            left -= seg;
        }
        self.end()
    }

    /// Unit direction of the window at arc length `s`; the later segment at a vertex.
    pub fn tangent_at(&self, s: f64) -> Option<Vec2> {
        let mut left = s.max(0.0);
        let mut last = None;
        for w in self.points.windows(2) {
            let d = w[1] - w[0];
            let seg = d.norm();
            if seg < 1e-9 {
                continue;
            }
            last = Some(d / seg);
            if left < seg {
                return last;
            }
            left -= seg;
        }
        last
    }

    /// Distance from `p` to the window polyline.
    pub fn distance(&self, p: Vec2) -> f64 {
        self.project(p).0
    }

    /// `(distance, arc length along the window)` of the closest point.
    pub fn project(&self, p: Vec2) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        let mut arc = 0.0;
        for w in self.points.windows(2) {
            let (q, t) = project_on_segment(p, w[0], w[1]);
            let seg = (w[1] - w[0]).norm();
            let d = (q - p).norm();
            if d < best.0 {
                best = (d, arc + t * seg);
            }
            arc += seg;
        }
        best
    }

    /// Path arc length left after the closest point to `p`.
    pub fn remaining_from(&self, p: Vec2) -> f64 {
        let (_, s) = self.project(p);
        (self.length() - s).max(0.0) + self.beyond
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(pts: &[(f64, f64)]) -> ReferencePath {
        ReferencePath::new(pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect(), 0.0)
    }

    #[test]
    fn window_starts_at_projection_and_spans_requested_length() {
        let p = path(&[
            (0.0, 0.0),
            (1.0, 0.0),
            (2.0, 0.0),
            (3.0, 0.0),
            (4.0, 0.0),
            (5.0, 0.0),
        ]);
        let w = PathWindow::new(&p, Vec2::new(1.5, 0.7), 2.0);
        assert_eq!(w.points.first().copied(), Some(Vec2::new(1.5, 0.0)));
        assert!((w.end() - Vec2::new(3.5, 0.0)).norm() < 1e-12);
        assert!((w.length() - 2.0).abs() < 1e-12);
        assert!((w.beyond - 1.5).abs() < 1e-12);
        assert!((w.distance(Vec2::new(0.0, 1.0)) - (1.5f64.powi(2) + 1.0).sqrt()).abs() < 1e-12);
        assert!((w.remaining_from(Vec2::new(2.0, -1.0)) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn short_path_end_truncates_window() {
        let p = path(&[(0.0, 0.0), (1.0, 0.0)]);
        let w = PathWindow::new(&p, Vec2::new(0.5, 0.0), 3.0);
        assert_eq!(w.points, vec![Vec2::new(0.5, 0.0), Vec2::new(1.0, 0.0)]);
        assert_eq!(w.beyond, 0.0);
        let w = PathWindow::new(&p, Vec2::new(4.0, 0.0), 3.0);
        assert_eq!(w.points, vec![Vec2::new(1.0, 0.0), Vec2::new(1.0, 0.0)]);
    }
}
