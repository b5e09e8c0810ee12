use serde::{Deserialize, Serialize};

use crate::global::ReferencePath;
use crate::local::PathWindow;
use crate::world::{Pose2D, Scan, Vec2};

pub const SCAN_SECTORS: usize = 20;
pub const PATH_POINTS: usize = 5;
pub const TRAJ_POINTS: usize = 5;
/// Ticks between consecutive past-trajectory samples (1 s).
pub const TRAJ_INTERVAL_TICKS: u64 = 10;
pub const OBS_DIM: usize = 2 * (SCAN_SECTORS + PATH_POINTS + TRAJ_POINTS + 1);

/// Replanner observation, every point in the robot frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub scan: Vec<Vec2>,
    pub path: Vec<Vec2>,
    pub traj: Vec<Vec2>,
    pub goal: Vec2,
}

impl Observation {
    /// Flattened as scan, path, trajectory, goal; `x` before `y`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(OBS_DIM);
        for p in self
            .scan
            .iter()
            .chain(&self.path)
            .chain(&self.traj)
            .chain(std::iter::once(&self.goal))
        {
            out.push(p.x);
            out.push(p.y);
        }
        out
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.to_vec().into_iter().map(|v| v as f32).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }
}

/// Closest hit in each of the equal angular sectors, starting at the heading.
pub fn downsample_scan(scan: &Scan, sectors: usize) -> Vec<Vec2> {
    let n = scan.points.len();
    (0..sectors)
        .map(|j| {
            let (lo, hi) = (j * n / sectors, (j + 1) * n / sectors);
            (lo..hi)
                .min_by(|&a, &b| scan.ranges[a].total_cmp(&scan.ranges[b]).then(a.cmp(&b)))
                .map(|i| scan.points[i])
                .unwrap_or(scan.origin)
        })
        .collect()
}

/// Points at uniform arc length from the nearest path point to the path end.
pub fn downsample_path(path: &ReferencePath, position: Vec2, count: usize) -> Vec<Vec2> {
    let window = PathWindow::new(path, position, f64::INFINITY);
    let pts = &window.points;
    let total = window.length();
    let mut out = Vec::with_capacity(count);
    let mut seg = 0;
    let mut seg_start = 0.0;
    for k in 0..count {
        let target = if count > 1 {
            total * k as f64 / (count - 1) as f64
        } else {
            0.0
        };
        loop {
            let len = (pts[seg + 1] - pts[seg]).norm();
            if seg_start + len >= target || seg + 2 >= pts.len() {
                let t = if len > 0.0 {
                    ((target - seg_start) / len).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                out.push(pts[seg] + (pts[seg + 1] - pts[seg]) * t);
                break;
            }
            seg_start += len;
            seg += 1;
        }
    }
    out
}

/// Positions 1..=count seconds ago; ticks before the episode start use the start position.
pub fn past_trajectory(history: &[Vec2], tick: u64, count: usize) -> Vec<Vec2> {
    (1..=count as u64)
        .map(|k| {
            let back = k * TRAJ_INTERVAL_TICKS;
            let idx = tick.saturating_sub(back) as usize;
            history[idx.min(history.len() - 1)]
        })
        .collect()
}

pub fn build_observation(
    pose: &Pose2D,
    scan: &Scan,
    path: &ReferencePath,
    history: &[Vec2],
    tick: u64,
    goal: Vec2,
) -> Observation {
    let local = |p: Vec2| pose.to_local(p);
    Observation {
        scan: downsample_scan(scan, SCAN_SECTORS)
            .into_iter()
            .map(local)
            .collect(),
        path: downsample_path(path, pose.position(), PATH_POINTS)
            .into_iter()
            .map(local)
            .collect(),
        traj: past_trajectory(history, tick, TRAJ_POINTS)
            .into_iter()
            .map(local)
            .collect(),
        goal: local(goal),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_is_62() {
        assert_eq!(OBS_DIM, 62);
    }

    #[test]
    fn goal_straight_ahead() {
        let pose = Pose2D::new(1.0, 2.0, 0.0);
        assert!((pose.to_local(Vec2::new(4.0, 2.0)) - Vec2::new(3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn path_samples_span_nearest_point_to_end() {
        let path = ReferencePath::new(
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(4.0, 0.0),
                Vec2::new(4.0, 4.0),
            ],
            0.0,
        );
        let pts = downsample_path(&path, Vec2::new(2.0, 1.0), 5);
        let expect = [(2.0, 0.0), (3.5, 0.0), (4.0, 1.0), (4.0, 2.5), (4.0, 4.0)];
        for (p, e) in pts.iter().zip(expect) {
            assert!((p - Vec2::new(e.0, e.1)).norm() < 1e-12, "{p:?} vs {e:?}");
        }
    }

    #[test]
    fn trajectory_pads_with_start() {
        let history: Vec<Vec2> = (0..=25).map(|i| Vec2::new(i as f64, 0.0)).collect();
        let t = past_trajectory(&history, 25, 5);
        assert_eq!(
            t,
            vec![
                Vec2::new(15.0, 0.0),
                Vec2::new(5.0, 0.0),
                Vec2::new(0.0, 0.0),
                Vec2::new(0.0, 0.0),
                Vec2::new(0.0, 0.0)
            ]
        );
    }

    #[test]
    fn scan_sector_takes_closest_hit() {
        let origin = Vec2::zeros();
        let mut ranges = vec![10.0; 180];
        ranges[12] = 3.0;
        ranges[13] = 2.5;
        let points = (0..180)
            .map(|i| {
                let a = i as f64 * std::f64::consts::TAU / 180.0;
                Vec2::new(a.cos(), a.sin()) * ranges[i]
            })
            .collect();
        let scan = Scan {
            origin,
            heading: 0.0,
            max_range: 10.0,
            points,
            ranges,
        };
        let s = downsample_scan(&scan, 20);
        assert_eq!(s.len(), 20);
        assert!((s[1].norm() - 2.5).abs() < 1e-12);
        assert!((s[0].norm() - 10.0).abs() < 1e-12);
    }
}
