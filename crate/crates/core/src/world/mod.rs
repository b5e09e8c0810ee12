//! Ground-truth 2D simulation: a differential-drive robot on a square field
//! with square pillars (no-entry areas) and moving or static obstacles.
//!
//! The field is centered on the origin, spanning
//! `[-field_half_extent, field_half_extent]` on both axes.

mod kinematics;
mod obstacles;
mod scenario;
mod sensor;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use kinematics::{integrate_unicycle, ControlCommand};
pub use obstacles::SfmParams;
pub use scenario::{spawn_scenario, ScenarioConfig};
pub use sensor::{Scan, SCAN_MAX_RANGE, SCAN_RAY_COUNT};

pub type Vec2 = nalgebra::Vector2<f64>;

/// Control interval in seconds.
pub const CONTROL_DT: f64 = 0.1;
pub const ROBOT_RADIUS: f64 = 1.0;
pub const MAX_LINEAR_SPEED: f64 = 1.0;
pub const MAX_ANGULAR_SPEED: f64 = 1.0;
pub const DEFAULT_FIELD_SIZE: f64 = 20.0;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    use std::f64::consts::PI;
    let wrapped = angle.rem_euclid(2.0 * PI);
    if wrapped > PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Expresses a world-frame point in this pose's frame (x-axis forward).
    pub fn to_local(&self, p: Vec2) -> Vec2 {
        let (s, c) = self.theta.sin_cos();
        let dx = p.x - self.x;
        let dy = p.y - self.y;
        Vec2::new(c * dx + s * dy, -s * dx + c * dy)
    }
}

/// Number of pillars on the pre-built map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum MapKind {
    Nine,
    Sixteen,
    TwentyFive,
}

impl MapKind {
    pub const ALL: [MapKind; 3] = [MapKind::Nine, MapKind::Sixteen, MapKind::TwentyFive];

    pub fn pillar_count(self) -> u32 {
        let n = self.per_row();
        n * n
    }

    /// Pillars per row of the lattice.
    pub fn per_row(self) -> u32 {
        match self {
            MapKind::Nine => 3,
            MapKind::Sixteen => 4,
            MapKind::TwentyFive => 5,
        }
    }

    pub fn pillar_side(self) -> f64 {
        match self {
            MapKind::Nine => 1.5,
            MapKind::Sixteen => 1.0,
            MapKind::TwentyFive => 0.5,
        }
    }
}

impl TryFrom<u32> for MapKind {
    type Error = String;

    fn try_from(n: u32) -> Result<Self, Self::Error> {
        match n {
            9 => Ok(MapKind::Nine),
            16 => Ok(MapKind::Sixteen),
            25 => Ok(MapKind::TwentyFive),
            other => Err(format!("map kind must be 9, 16 or 25, got {other}")),
        }
    }
}

impl From<MapKind> for u32 {
    fn from(kind: MapKind) -> u32 {
        kind.pillar_count()
    }
}

impl std::fmt::Display for MapKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.pillar_count())
    }
}

impl std::str::FromStr for MapKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let n: u32 = s
            .trim()
            .parse()
            .map_err(|_| format!("map kind must be 9, 16 or 25, got {s:?}"))?;
        MapKind::try_from(n)
    }
}

/// Axis-aligned square no-entry area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pillar {
    pub center: Vec2,
    pub side: f64,
}

impl Pillar {
    pub fn half(&self) -> f64 {
        0.5 * self.side
    }

    /// Euclidean distance from `p` to the square; zero inside.
    pub fn distance(&self, p: Vec2) -> f64 {
        let h = self.half();
        let dx = ((p.x - self.center.x).abs() - h).max(0.0);
        let dy = ((p.y - self.center.y).abs() - h).max(0.0);
        dx.hypot(dy)
    }

    /// Entry distance of a ray into the square (slab method), if hit ahead of the origin.
    pub fn ray_hit(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        let h = self.half();
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for axis in 0..2 {
            let lo = self.center[axis] - h;
            let hi = self.center[axis] + h;
            if dir[axis].abs() < 1e-15 {
                if origin[axis] < lo || origin[axis] > hi {
                    return None;
                }
            } else {
                let t1 = (lo - origin[axis]) / dir[axis];
                let t2 = (hi - origin[axis]) / dir[axis];
                t_near = t_near.max(t1.min(t2));
                t_far = t_far.min(t1.max(t2));
            }
        }
        if t_near > t_far || t_far < 0.0 {
            return None;
        }
        Some(t_near.max(0.0))
    }
}

/// The map known to the planners: field bounds plus the pillar lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrebuiltMap {
    pub kind: MapKind,
    pub field_half_extent: f64,
    pub pillars: Vec<Pillar>,
}

impl PrebuiltMap {
    /// Pillars sit on the interior lattice points of an `(n+1) x (n+1)` subdivision of the field.
    pub fn new(kind: MapKind, field_size: f64) -> Self {
        let half = 0.5 * field_size;
        let n = kind.per_row();
        let spacing = field_size / f64::from(n + 1);
        let side = kind.pillar_side();
        let mut pillars = Vec::with_capacity((n * n) as usize);
        for i in 1..=n {
            for j in 1..=n {
                pillars.push(Pillar {
                    center: Vec2::new(
                        -half + spacing * f64::from(i),
                        -half + spacing * f64::from(j),
                    ),
                    side,
                });
            }
        }
        Self {
            kind,
            field_half_extent: half,
            pillars,
        }
    }

    pub fn pillar_count(&self) -> usize {
        self.pillars.len()
    }

    /// Narrowest free gap between neighboring pillars or between a pillar and the wall.
    pub fn min_corridor(&self) -> f64 {
        let n = self.kind.per_row();
        let spacing = 2.0 * self.field_half_extent / f64::from(n + 1);
        spacing - self.kind.pillar_side()
    }

    pub fn distance_to_pillars(&self, p: Vec2) -> f64 {
        self.pillars
            .iter()
            .map(|pl| pl.distance(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from an interior point to the nearest field wall (negative outside).
    pub fn distance_to_boundary(&self, p: Vec2) -> f64 {
        let h = self.field_half_extent;
        (h - p.x.abs()).min(h - p.y.abs())
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.distance_to_boundary(p) >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    /// Social force model: yields to the robot.
    Sfm,
    /// Reactive stop model: halts when a constant-velocity rollout predicts contact.
    Rsm,
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    pub kind: ObstacleKind,
    pub waypoint: Vec2,
    pub desired_speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose2D,
    pub v: f64,
    pub omega: f64,
}

impl RobotState {
    pub fn velocity_vector(&self) -> Vec2 {
        let (s, c) = self.pose.theta.sin_cos();
        Vec2::new(self.v * c, self.v * s)
    }
}

/// Full simulation state. All randomness after spawning flows through `rng`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub robot: RobotState,
    pub obstacles: Vec<ObstacleState>,
    pub map: PrebuiltMap,
    pub goal: Vec2,
    /// Number of elapsed control intervals.
    pub tick: u64,
    pub sfm: SfmParams,
    pub rng: ChaCha8Rng,
}

impl WorldState {
    pub fn sim_time(&self) -> f64 {
        self.tick as f64 * CONTROL_DT
    }

    pub fn robot_position(&self) -> Vec2 {
        self.robot.pose.position()
    }

    /// True when the robot disc touches an obstacle, a pillar or leaves the field.
    ///
    /// Contact is strict overlap: discs exactly touching do not collide.
    pub fn check_collision(&self) -> bool {
        let p = self.robot_position();
        if self.map.distance_to_boundary(p) < ROBOT_RADIUS {
            return true;
        }
        if self.map.distance_to_pillars(p) < ROBOT_RADIUS {
            return true;
        }
        self.obstacles
            .iter()
            .any(|o| (o.position - p).norm() < ROBOT_RADIUS + o.radius)
    }
}
