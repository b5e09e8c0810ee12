use serde::{Deserialize, Serialize};

use super::{normalize_angle, Pose2D, WorldState, CONTROL_DT, MAX_ANGULAR_SPEED, MAX_LINEAR_SPEED};

/// Below this turn rate the straight-line branch of the unicycle model is used.
const STRAIGHT_LINE_OMEGA: f64 = 1e-9;

/// Velocity command for the differential-drive robot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    pub v: f64,
    pub omega: f64,
}

impl ControlCommand {
    pub const STOP: ControlCommand = ControlCommand { v: 0.0, omega: 0.0 };

    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }

    /// Clamps both components to the robot's absolute limits.
    pub fn clamped(self) -> Self {
        Self {
            v: self.v.clamp(-MAX_LINEAR_SPEED, MAX_LINEAR_SPEED),
            omega: self.omega.clamp(-MAX_ANGULAR_SPEED, MAX_ANGULAR_SPEED),
        }
    }

    pub fn within_limits(&self) -> bool {
        self.v.abs() <= MAX_LINEAR_SPEED && self.omega.abs() <= MAX_ANGULAR_SPEED
    }
}

/// Exact arc integration of the unicycle model over `dt` at constant `(v, omega)`.
pub fn integrate_unicycle(pose: Pose2D, v: f64, omega: f64, dt: f64) -> Pose2D {
    let theta = pose.theta;
    if omega.abs() < STRAIGHT_LINE_OMEGA {
        let (s, c) = theta.sin_cos();
        return Pose2D {
            x: pose.x + v * c * dt,
            y: pose.y + v * s * dt,
            theta: normalize_angle(theta + omega * dt),
        };
    }
    let theta_end = theta + omega * dt;
    let r = v / omega;
    Pose2D {
        x: pose.x + r * (theta_end.sin() - theta.sin()),
        y: pose.y + r * (theta.cos() - theta_end.cos()),
        theta: normalize_angle(theta_end),
    }
}

impl WorldState {
    /// Advances the robot one control interval. Out-of-range commands are clamped.
    pub fn step_robot(&mut self, cmd: ControlCommand) {
        let cmd = cmd.clamped();
        self.robot.pose = integrate_unicycle(self.robot.pose, cmd.v, cmd.omega, CONTROL_DT);
        self.robot.v = cmd.v;
        self.robot.omega = cmd.omega;
        self.tick += 1;
    }
}
