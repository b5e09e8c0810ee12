use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    MapKind, ObstacleKind, ObstacleState, Pose2D, PrebuiltMap, RobotState, SfmParams, Vec2,
    WorldState, DEFAULT_FIELD_SIZE, ROBOT_RADIUS,
};
use crate::error::{ReplanError, Result};

const MAX_ATTEMPTS: usize = 1000;
/// Corner zones are squares of this side, inset by the same amount from the field corner.
const CORNER_ZONE: f64 = 2.0;
/// Extra clearance between the robot disc and pillars at start and goal.
const ENDPOINT_PILLAR_MARGIN: f64 = 0.1;
/// Extra clearance between spawned obstacles and the robot start disc.
const SPAWN_MARGIN: f64 = 0.5;
const OBSTACLE_RADIUS: (f64, f64) = (0.2, 0.4);
const OBSTACLE_SPEED: (f64, f64) = (0.3, 1.0);
const WAYPOINT_MARGIN: f64 = 1.0;

/// Scenario description; also the on-disk JSON scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub map_kind: MapKind,
    pub seed: u64,
    pub n_obstacles: usize,
    pub static_prob: f64,
    pub field_size_m: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            map_kind: MapKind::Sixteen,
            seed: 0,
            n_obstacles: 10,
            static_prob: 0.3,
            field_size_m: DEFAULT_FIELD_SIZE,
        }
    }
}

impl ScenarioConfig {
    pub fn new(map_kind: MapKind, seed: u64) -> Self {
        Self {
            map_kind,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.static_prob) {
            return Err(ReplanError::Config(format!(
                "static_prob {} outside [0, 1]",
                self.static_prob
            )));
        }
        if self.field_size_m < 4.0 * CORNER_ZONE + 2.0 * ROBOT_RADIUS {
            return Err(ReplanError::Config(format!(
                "field_size_m {} too small",
                self.field_size_m
            )));
        }
        Ok(())
    }
}

/// Signs of the four field corners.
const CORNERS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

fn sample_corner(rng: &mut ChaCha8Rng, map: &PrebuiltMap, corner: (f64, f64)) -> Result<Vec2> {
    let h = map.field_half_extent;
    let (lo, hi) = (h - 2.0 * CORNER_ZONE, h - CORNER_ZONE);
    for _ in 0..MAX_ATTEMPTS {
        let p = Vec2::new(
            corner.0 * rng.random_range(lo..hi),
            corner.1 * rng.random_range(lo..hi),
        );
        if map.distance_to_pillars(p) >= ROBOT_RADIUS + ENDPOINT_PILLAR_MARGIN {
            return Ok(p);
        }
    }
    Err(ReplanError::ScenarioInfeasible(format!(
        "no pillar-free point in corner zone {corner:?}"
    )))
}

/// Builds a randomized episode. Deterministic in `cfg`.
pub fn spawn_scenario(cfg: &ScenarioConfig) -> Result<WorldState> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let map = PrebuiltMap::new(cfg.map_kind, cfg.field_size_m);
    let h = map.field_half_extent;

    let start_corner = rng.random_range(0..4usize);
    let goal_corner = (start_corner + rng.random_range(1..4usize)) % 4;
    let start = sample_corner(&mut rng, &map, CORNERS[start_corner])?;
    let goal = sample_corner(&mut rng, &map, CORNERS[goal_corner])?;
    let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);

    let mut obstacles = Vec::with_capacity(cfg.n_obstacles);
    for _ in 0..cfg.n_obstacles {
        let kind = if rng.random_bool(cfg.static_prob) {
            ObstacleKind::Static
        } else if rng.random_bool(0.5) {
            ObstacleKind::Sfm
        } else {
            ObstacleKind::Rsm
        };
        let radius = rng.random_range(OBSTACLE_RADIUS.0..OBSTACLE_RADIUS.1);
        let desired_speed = rng.random_range(OBSTACLE_SPEED.0..OBSTACLE_SPEED.1);

        let mut placed = None;
        for _ in 0..MAX_ATTEMPTS {
            let p = Vec2::new(
                rng.random_range(-h + radius..h - radius),
                rng.random_range(-h + radius..h - radius),
            );
            let clear = ROBOT_RADIUS + radius + SPAWN_MARGIN;
            // a static obstacle parked on the goal would make every episode unwinnable
            let blocks_goal = kind == ObstacleKind::Static && (p - goal).norm() < clear;
            if (p - start).norm() >= clear && !blocks_goal {
                placed = Some(p);
                break;
            }
        }
        let position = placed.ok_or_else(|| {
            ReplanError::ScenarioInfeasible(format!("could not place obstacle {}", obstacles.len()))
        })?;

        let wh = h - WAYPOINT_MARGIN;
        let (velocity, waypoint) = match kind {
            ObstacleKind::Static => (Vec2::zeros(), position),
            _ => {
                let wp = Vec2::new(rng.random_range(-wh..wh), rng.random_range(-wh..wh));
                let dir = wp - position;
                let n = dir.norm();
                let v = if n > 1e-12 {
                    dir * (desired_speed / n)
                } else {
                    Vec2::zeros()
                };
                (v, wp)
            }
        };
        obstacles.push(ObstacleState {
            position,
            velocity,
            radius,
            kind,
            waypoint,
            desired_speed,
        });
    }

    Ok(WorldState {
        robot: RobotState {
            pose: Pose2D::new(start.x, start.y, heading),
            v: 0.0,
            omega: 0.0,
        },
        obstacles,
        map,
        goal,
        tick: 0,
        sfm: SfmParams::default(),
        rng,
    })
}
