use std::cmp::Ordering;

use super::window::PathWindow;
use super::{colliding_steps, horizon_steps, rollout, LocalPlannerConfig};
use crate::global::{ClearanceField, Costmap, ReferencePath};
use crate::world::{
    normalize_angle, ControlCommand, Pose2D, RobotState, Vec2, CONTROL_DT, MAX_ANGULAR_SPEED,
    MAX_LINEAR_SPEED,
};

/// Arc length ahead on the path that the robot turns to face when it cannot move.
pub const RECOVERY_LOOKAHEAD: f64 = 1.0;

/// Velocities reachable within one control interval, intersected with the absolute limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicWindow {
    pub v: (f64, f64),
    pub omega: (f64, f64),
}

impl DynamicWindow {
    pub fn contains(&self, cmd: ControlCommand) -> bool {
        const EPS: f64 = 1e-9;
        cmd.v >= self.v.0 - EPS
            && cmd.v <= self.v.1 + EPS
            && cmd.omega >= self.omega.0 - EPS
            && cmd.omega <= self.omega.1 + EPS
    }
}

pub fn dynamic_window(robot: &RobotState, cfg: &LocalPlannerConfig) -> DynamicWindow {
    let dv = cfg.accel_limit * CONTROL_DT;
    let dw = cfg.ang_accel_limit * CONTROL_DT;
    let v_lo = (robot.v - dv).clamp(0.0, MAX_LINEAR_SPEED);
    let v_hi = (robot.v + dv).clamp(0.0, MAX_LINEAR_SPEED);
    let w_lo = (robot.omega - dw).clamp(-MAX_ANGULAR_SPEED, MAX_ANGULAR_SPEED);
    let w_hi = (robot.omega + dw).clamp(-MAX_ANGULAR_SPEED, MAX_ANGULAR_SPEED);
    DynamicWindow {
        v: (v_lo, v_hi),
        omega: (w_lo, w_hi),
    }
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn lattice(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

/// Signed angle from the heading of `pose` to the bearing of `target`.
pub fn heading_error(pose: &Pose2D, target: Vec2) -> f64 {
    let d = target - pose.position();
    if d.norm() < 1e-6 {
        return 0.0;
    }
    normalize_angle(d.y.atan2(d.x) - pose.theta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DwaEvaluation {
    pub cmd: ControlCommand,
    pub mean_path_distance: f64,
    pub clearance: f64,
    /// Arc length along the window reached by the rollout end.
    pub progress: f64,
    pub heading_error: f64,
    pub collides: bool,
    pub score: f64,
}

/// `a` wins over `b`: higher score, then higher v, then lower |omega|, then lower omega.
fn better(a: &DwaEvaluation, b: &DwaEvaluation) -> bool {
    match a.score.partial_cmp(&b.score) {
        Some(Ordering::Greater) => return true,
        Some(Ordering::Less) => return false,
        _ => {}
    }
    if a.cmd.v != b.cmd.v {
        return a.cmd.v > b.cmd.v;
    }
    if a.cmd.omega.abs() != b.cmd.omega.abs() {
        return a.cmd.omega.abs() < b.cmd.omega.abs();
    }
    a.cmd.omega < b.cmd.omega
}

pub fn dwa_window(
    path: &ReferencePath,
    robot: &RobotState,
    cfg: &LocalPlannerConfig,
) -> PathWindow {
    PathWindow::new(
        path,
        robot.pose.position(),
        cfg.dwa_horizon * MAX_LINEAR_SPEED + cfg.window_margin,
    )
}

pub fn evaluate_candidate(
    cmd: ControlCommand,
    robot: &RobotState,
    window: &PathWindow,
    costmap: &Costmap,
    clearance: &ClearanceField,
    cfg: &LocalPlannerConfig,
) -> DwaEvaluation {
    let poses = rollout(
        robot.pose,
        std::iter::repeat_n(cmd, horizon_steps(cfg.dwa_horizon)),
    );
    let points: Vec<Vec2> = poses.iter().map(Pose2D::position).collect();
    let collides =
        !colliding_steps(costmap, robot.pose.position(), &points, cfg.safety_margin).is_empty();
    let mean_path_distance =
        points.iter().map(|&p| window.distance(p)).sum::<f64>() / points.len() as f64;
    let min_clear = points
        .iter()
        .map(|&p| clearance.at(p))
        .fold(f64::INFINITY, f64::min);
    let clear = min_clear.min(cfg.clearance_cap);
    let end = poses.last().expect("non-empty rollout");
    let progress = window.project(end.position()).1;
    let heading = window
        .tangent_at(progress)
        .map_or(0.0, |t| normalize_angle(t.y.atan2(t.x) - end.theta));
    let score = if collides {
        f64::NEG_INFINITY
    } else {
        -cfg.w_track * mean_path_distance
            + cfg.w_clear * clear
            + cfg.w_speed * cmd.v
            + cfg.w_progress * progress
            - cfg.w_heading * heading.abs() / std::f64::consts::PI
    };
    DwaEvaluation {
        cmd,
        mean_path_distance,
        clearance: clear,
        progress,
        heading_error: heading,
        collides,
        score,
    }
}

/// Scores every command of the lattice over the dynamic window.
pub fn dwa_evaluate(
    path: &ReferencePath,
    robot: &RobotState,
    costmap: &Costmap,
    clearance: &ClearanceField,
    cfg: &LocalPlannerConfig,
) -> Vec<DwaEvaluation> {
    let dw = dynamic_window(robot, cfg);
    let window = dwa_window(path, robot, cfg);
    let mut out = Vec::with_capacity(cfg.dwa_v_samples * cfg.dwa_omega_samples);
    for v in lattice(dw.v.0, dw.v.1, cfg.dwa_v_samples) {
        for omega in lattice(dw.omega.0, dw.omega.1, cfg.dwa_omega_samples) {
            out.push(evaluate_candidate(
                ControlCommand::new(v, omega),
                robot,
                &window,
                costmap,
                clearance,
                cfg,
            ));
        }
    }
    out
}

pub fn dwa_command(
    path: &ReferencePath,
    robot: &RobotState,
    costmap: &Costmap,
    cfg: &LocalPlannerConfig,
) -> ControlCommand {
    let clearance = costmap.clearance_field();
    dwa_command_with(path, robot, costmap, &clearance, cfg)
}

pub fn dwa_command_with(
    path: &ReferencePath,
    robot: &RobotState,
    costmap: &Costmap,
    clearance: &ClearanceField,
    cfg: &LocalPlannerConfig,
) -> ControlCommand {
    let evals = dwa_evaluate(path, robot, costmap, clearance, cfg);
    let best = evals
        .iter()
        .fold(None::<&DwaEvaluation>, |acc, e| match acc {
            Some(b) if !better(e, b) => Some(b),
            _ => Some(e),
        });
    match best {
        Some(b) if !b.collides && b.cmd.v > 0.0 => b.cmd,
        Some(b) if !b.collides => {
            // standing still wins: turn on the spot to face the path just ahead
            let window = dwa_window(path, robot, cfg);
            let target = window.point_at(RECOVERY_LOOKAHEAD);
            let mut pick: Option<(f64, ControlCommand)> = None;
            for e in evals.iter().filter(|e| !e.collides && e.cmd.v == 0.0) {
                let end = rollout(
                    robot.pose,
                    std::iter::repeat_n(e.cmd, horizon_steps(cfg.dwa_horizon)),
                );
                let err = heading_error(end.last().expect("non-empty rollout"), target).abs();
                let wins = match pick {
                    None => true,
                    Some((best_err, c)) => {
                        err < best_err - 1e-12
                            || ((err - best_err).abs() <= 1e-12
                                && e.cmd.omega.abs() < c.omega.abs())
                    }
                };
                if wins {
                    pick = Some((err, e.cmd));
                }
            }
            pick.map_or(b.cmd, |(_, c)| c)
        }
        _ => {
            // every rollout collides: rotate in place towards the path
            let window = dwa_window(path, robot, cfg);
            let err = heading_error(&robot.pose, window.point_at(RECOVERY_LOOKAHEAD));
            let sign = if err < 0.0 { -1.0 } else { 1.0 };
            ControlCommand::new(0.0, MAX_ANGULAR_SPEED * sign)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn open(width: usize) -> Costmap {
        Costmap::from_occupancy(
            width,
            width,
            0.25,
            Vec2::new(-10.0, -10.0),
            vec![false; width * width],
        )
    }

    fn straight_path() -> ReferencePath {
        ReferencePath::new((0..=10).map(|i| Vec2::new(i as f64, 0.0)).collect(), 0.0)
    }

    fn at_rest(x: f64, y: f64, theta: f64) -> RobotState {
        RobotState {
            pose: Pose2D::new(x, y, theta),
            v: 0.0,
            omega: 0.0,
        }
    }

    #[test]
    fn drives_straight_along_open_path() {
        let cm = open(80);
        let cmd = dwa_command(
            &straight_path(),
            &at_rest(0.0, 0.0, 0.0),
            &cm,
            &LocalPlannerConfig::default(),
        );
        assert!(cmd.v > 0.0);
        assert_eq!(cmd.omega, 0.0);
    }

    #[test]
    fn wall_ahead_forces_rotation_in_place() {
        let mut cm = open(80);
        // wall filling everything in front of the robot
        for y in 0..80 {
            for x in 41..80 {
                let c = cm.cell_center((x, y));
                cm.fill_disc(c, 0.01);
            }
        }
        // moving at full speed, so even the slowest rollout reaches the wall
        let robot = RobotState {
            pose: Pose2D::new(0.0, 0.0, 0.0),
            v: 1.0,
            omega: 0.0,
        };
        let cmd = dwa_command(
            &straight_path(),
            &robot,
            &cm,
            &LocalPlannerConfig::default(),
        );
        assert_eq!(cmd.v, 0.0);
        assert_eq!(cmd.omega.abs(), 1.0);
    }

    #[test]
    fn turns_towards_path_behind() {
        let cm = open(80);
        let robot = at_rest(0.0, 0.0, std::f64::consts::PI);
        let cmd = dwa_command(
            &straight_path(),
            &robot,
            &cm,
            &LocalPlannerConfig::default(),
        );
        assert!(cmd.omega.abs() > 0.0);
    }

    #[test]
    fn lattice_hits_both_ends() {
        let v: Vec<f64> = lattice(-0.2, 0.2, 21).collect();
        assert_eq!(v.len(), 21);
        assert_eq!(v[0], -0.2);
        assert_eq!(v[10], 0.0);
        assert_eq!(v[20], 0.2);
    }

    /// Scores a command from scratch without the planner's helpers.
    fn oracle_score(
        cmd: ControlCommand,
        robot: &RobotState,
        path: &ReferencePath,
        cm: &Costmap,
    ) -> f64 {
        let (mut x, mut y, mut th) = (robot.pose.x, robot.pose.y, robot.pose.theta);
        let mut pts = Vec::new();
        for _ in 0..20 {
            if cmd.omega.abs() < 1e-9 {
                x += cmd.v * th.cos() * 0.1;
                y += cmd.v * th.sin() * 0.1;
            } else {
                let r = cmd.v / cmd.omega;
                let th2 = th + cmd.omega * 0.1;
                x += r * (th2.sin() - th.sin());
                y += r * (th.cos() - th2.cos());
                th = th2;
            }
            pts.push((x, y, th));
        }
        // path window by brute force: dense resampling of the path ahead of the nearest point
        let wp = &path.waypoints;
        let mut dense = Vec::new();
        for w in wp.windows(2) {
            for k in 0..200 {
                dense.push(w[0] + (w[1] - w[0]) * (k as f64 / 200.0));
            }
        }
        dense.push(*wp.last().unwrap());
        let p0 = robot.pose.position();
        let near = (0..dense.len())
            .min_by(|&a, &b| (dense[a] - p0).norm().total_cmp(&(dense[b] - p0).norm()))
            .unwrap();
        let mut window = vec![dense[near]];
        let mut arcs = vec![0.0];
        let mut s = 0.0;
        for k in near + 1..dense.len() {
            s += (dense[k] - dense[k - 1]).norm();
            if s > 3.0 + 1e-9 {
                break;
            }
            window.push(dense[k]);
            arcs.push(s);
        }
        let dist = |p: Vec2| {
            window
                .iter()
                .map(|q| (q - p).norm())
                .fold(f64::INFINITY, f64::min)
        };
        let safe = |p: Vec2| cm.is_free(p);
        let mut occupied_prefix = !safe(p0);
        let mut collides = false;
        for &(px, py, _) in &pts {
            let free = safe(Vec2::new(px, py));
            if occupied_prefix {
                occupied_prefix = !free;
                continue;
            }
            collides |= !free;
        }
        if collides || occupied_prefix {
            return f64::NEG_INFINITY;
        }
        let field = cm.clearance_field();
        let clear = pts
            .iter()
            .map(|&(px, py, _)| field.at(Vec2::new(px, py)))
            .fold(f64::INFINITY, f64::min)
            .min(1.0);
        let mean = pts
            .iter()
            .map(|&(px, py, _)| dist(Vec2::new(px, py)))
            .sum::<f64>()
            / 20.0;
        let (ex, ey, eth) = *pts.last().unwrap();
        let closest = (0..window.len())
            .min_by(|&a, &b| {
                (window[a] - Vec2::new(ex, ey))
                    .norm()
                    .total_cmp(&(window[b] - Vec2::new(ex, ey)).norm())
            })
            .unwrap();
        // path direction at the closest point
        let k = closest.min(window.len().saturating_sub(2));
        let t = window[(k + 1).min(window.len() - 1)] - window[k];
        let head = if t.norm() < 1e-9 {
            0.0
        } else {
            let mut e = t.y.atan2(t.x) - eth;
            while e > std::f64::consts::PI {
                e -= 2.0 * std::f64::consts::PI;
            }
            while e <= -std::f64::consts::PI {
                e += 2.0 * std::f64::consts::PI;
            }
            e
        };
        -mean + clear + 0.3 * cmd.v + arcs[closest] - 0.5 * head.abs() / std::f64::consts::PI
    }

    #[test]
    fn matches_exhaustive_reevaluation() {
        let cfg = LocalPlannerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut checked = 0;
        for _ in 0..100 {
            let mut cm = open(80);
            for _ in 0..rng.random_range(0..6) {
                let c = Vec2::new(rng.random_range(-4.0..8.0), rng.random_range(-4.0..4.0));
                cm.fill_disc(c, 1.3);
            }
            let path = ReferencePath::new(
                (0..=8)
                    .map(|i| Vec2::new(i as f64, rng.random_range(-0.5..0.5) * (i as f64 / 8.0)))
                    .collect(),
                0.0,
            );
            let robot = RobotState {
                pose: Pose2D::new(
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-1.0..1.0),
                ),
                v: rng.random_range(0.0..1.0),
                omega: rng.random_range(-1.0..1.0),
            };
            let cmd = dwa_command(&path, &robot, &cm, &cfg);
            let dw = dynamic_window(&robot, &cfg);
            let mut best = f64::NEG_INFINITY;
            let mut best_v = f64::NAN;
            for i in 0..11 {
                for j in 0..21 {
                    let v = dw.v.0 + (dw.v.1 - dw.v.0) * i as f64 / 10.0;
                    let w = dw.omega.0 + (dw.omega.1 - dw.omega.0) * j as f64 / 20.0;
                    let score = oracle_score(ControlCommand::new(v, w), &robot, &path, &cm);
                    if score > best {
                        best_v = v;
                    }
                    best = best.max(score);
                }
            }
            if best == f64::NEG_INFINITY {
                assert_eq!(cmd.v, 0.0);
                assert_eq!(cmd.omega.abs(), 1.0);
                continue;
            }
            assert!(dw.contains(cmd));
            if best_v == 0.0 {
                // recovery turn: stationary and safe, not score-maximal
                assert_eq!(cmd.v, 0.0);
                assert!(oracle_score(cmd, &robot, &path, &cm) > f64::NEG_INFINITY);
                continue;
            }
            checked += 1;
            let got = oracle_score(cmd, &robot, &path, &cm);
            // the oracle's dense window is accurate to a few millimetres
            assert!(
                got >= best - 5e-3,
                "chosen {cmd:?} scores {got}, best {best}"
            );
        }
        assert!(checked > 50);
    }

    #[test]
    fn chosen_command_never_collides_when_a_free_one_exists() {
        let cfg = LocalPlannerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let mut cm = open(80);
            for _ in 0..8 {
                let c = Vec2::new(rng.random_range(-5.0..8.0), rng.random_range(-5.0..5.0));
                cm.fill_disc(c, 1.3);
            }
            let robot = RobotState {
                pose: Pose2D::new(0.0, 0.0, rng.random_range(-3.0..3.0)),
                v: rng.random_range(0.0..1.0),
                omega: rng.random_range(-1.0..1.0),
            };
            let path = straight_path();
            let field = cm.clearance_field();
            let evals = dwa_evaluate(&path, &robot, &cm, &field, &cfg);
            let cmd = dwa_command(&path, &robot, &cm, &cfg);
            assert!(cmd.within_limits());
            if evals.iter().any(|e| !e.collides) {
                let chosen = evals
                    .iter()
                    .find(|e| e.cmd == cmd)
                    .expect("command from lattice");
                assert!(!chosen.collides);
                assert!(dynamic_window(&robot, &cfg).contains(cmd));
            }
        }
    }

    #[test]
    fn turns_on_the_spot_when_only_standing_still_is_safe() {
        let mut cm = open(80);
        // every cell from the next column on is blocked in the robot's lane
        for y in 37..43 {
            for x in 40..50 {
                let c = cm.cell_center((x, y));
                cm.fill_disc(c, 0.01);
            }
        }
        let path = ReferencePath::new(
            vec![
                Vec2::new(-0.01, 0.0),
                Vec2::new(-0.01, -2.0),
                Vec2::new(4.0, -2.0),
            ],
            0.0,
        );
        let robot = at_rest(-0.01, 0.0, 0.0);
        let cfg = LocalPlannerConfig::default();
        let field = cm.clearance_field();
        let evals = dwa_evaluate(&path, &robot, &cm, &field, &cfg);
        assert!(evals.iter().all(|e| e.cmd.v == 0.0 || e.collides));
        let cmd = dwa_command(&path, &robot, &cm, &cfg);
        assert_eq!(cmd.v, 0.0);
        assert!(cmd.omega < 0.0, "{cmd:?}");
    }
}
