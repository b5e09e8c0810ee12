use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::world::{Pose2D, SCAN_MAX_RANGE};

fn env() -> ReplanEnv {
    ReplanEnv::new(EnvSettings::default()).unwrap()
}

/// Replans with a fixed probability; deterministic per seed.
struct CoinFlip(ChaCha8Rng, f64);

impl ReplanPolicy for CoinFlip {
    fn name(&self) -> String {
        "coin".into()
    }
    fn reset(&mut self, _start: Vec2) {}
    fn decide(&mut self, _ctx: &DecisionContext<'_>) -> Action {
        if self.0.random_bool(self.1) {
            Action::Replan
        } else {
            Action::NoReplan
        }
    }
}

#[test]
fn reset_is_deterministic_and_well_formed() {
    let mut a = env();
    let mut b = env();
    for seed in 0..20 {
        let oa = a.reset(seed).unwrap();
        let ob = b.reset(seed).unwrap();
        assert_eq!(oa, ob);
        assert_eq!(oa.to_vec().len(), OBS_DIM);
        assert!(oa.is_finite());
        let straight = (a.world().goal - a.world().robot_position()).norm();
        assert!(a.l_path() >= straight - 1e-9, "seed {seed}");
    }
}

#[test]
fn step_durations() {
    let mut e = env();
    e.reset(3).unwrap();
    let r = e.step(Action::NoReplan).unwrap();
    assert_eq!(r.elapsed, 0.1);
    assert_eq!(e.world().tick, 1);
    let r = e.step(Action::Replan).unwrap();
    assert!((r.elapsed - 1.1).abs() < 1e-12);
    assert_eq!(e.world().tick, 12);
    assert_eq!(r.positions.len(), 11);
    assert!((e.path().planned_at - 0.1).abs() < 1e-12);
}

#[test]
fn time_limit_truncates_with_zero_reward() {
    let settings = EnvSettings {
        env: EnvConfig {
            time_limit: 2.0,
            ..Default::default()
        },
        ..Default::default()
    };
    let mut e = ReplanEnv::new(settings).unwrap();
    e.reset(1).unwrap();
    let mut last = None;
    while !e.is_done() {
        last = Some(e.step(Action::NoReplan).unwrap());
    }
    let last = last.unwrap();
    assert!(last.truncated && !last.terminated);
    assert_eq!(last.reward, 0.0);
    assert_eq!(e.world().tick, 20);
    assert!(matches!(
        e.step(Action::NoReplan),
        Err(ReplanError::StepAfterDone)
    ));
}

#[test]
fn variable_step_accounting_and_reward_sparsity() {
    let mut e = env();
    for seed in 0..6u64 {
        e.reset(seed).unwrap();
        let mut policy = CoinFlip(ChaCha8Rng::seed_from_u64(seed), 0.1);
        let (mut plain, mut replans, mut cut_short) = (0u64, 0u64, 0u64);
        while !e.is_done() {
            let a = policy.decide(&DecisionContext {
                observation: &e.observation(),
                tick: e.world().tick,
                position: e.world().robot_position(),
                goal: e.world().goal,
                step_positions: &[],
                replanned: false,
            });
            let r = e.step(a).unwrap();
            assert!(!(r.terminated && r.truncated));
            assert!(r.observation.is_finite());
            if r.reward != 0.0 {
                assert!(r.terminated && e.result().unwrap().success());
                assert!((0.125..=0.25).contains(&r.reward));
            }
            match a {
                Action::NoReplan => plain += 1,
                Action::Replan if r.positions.len() == 11 => replans += 1,
                Action::Replan => cut_short += r.positions.len() as u64,
            }
        }
        let res = e.result().unwrap();
        assert_eq!(res.ticks, plain + 11 * replans + cut_short);
    }
}

#[test]
fn episodes_are_reproducible() {
    let run = |seed| {
        let mut e = env();
        e.set_record_trace(true);
        let mut p = CoinFlip(ChaCha8Rng::seed_from_u64(99), 0.2);
        let r = run_episode(&mut e, &mut p, seed).unwrap();
        (r, e.take_trace("coin").unwrap())
    };
    let (a, ta) = run(8);
    let (b, tb) = run(8);
    assert_eq!(a, b);
    assert_eq!(ta, tb);
    assert_eq!(ta.records.len() as u64, a.ticks);
}

#[test]
fn stationary_robot_has_collapsed_trajectory() {
    let pose = Pose2D::new(2.0, -1.0, 0.7);
    let history = vec![pose.position(); 80];
    let scan = Scan {
        origin: pose.position(),
        heading: pose.theta,
        max_range: SCAN_MAX_RANGE,
        points: vec![pose.position() + Vec2::new(1.0, 0.0); 180],
        ranges: vec![1.0; 180],
    };
    let path = ReferencePath::new(vec![pose.position(), Vec2::new(5.0, 5.0)], 0.0);
    let obs = build_observation(&pose, &scan, &path, &history, 79, Vec2::new(5.0, 5.0));
    assert!(obs.traj.iter().all(|p| p.norm() < 1e-12));
}

#[test]
fn observation_is_frame_invariant() {
    let mut e = env();
    e.reset(4).unwrap();
    for _ in 0..30 {
        e.step(Action::NoReplan).unwrap();
    }
    let w = e.world();
    let pose = w.robot.pose;
    let scan = w.sense();
    let base = build_observation(&pose, &scan, e.path(), e.history(), w.tick, w.goal);
    for theta in [0.3, -2.0, std::f64::consts::PI] {
        let (s, c) = f64::sin_cos(theta);
        let rot = |p: Vec2| {
            let d = p - pose.position();
            pose.position() + Vec2::new(c * d.x - s * d.y, s * d.x + c * d.y)
        };
        let rpose = Pose2D::new(pose.x, pose.y, pose.theta + theta);
        let rscan = Scan {
            origin: scan.origin,
            heading: rpose.theta,
            max_range: scan.max_range,
            points: scan.points.iter().map(|&p| rot(p)).collect(),
            ranges: scan.ranges.clone(),
        };
        let rpath = ReferencePath::new(e.path().waypoints.iter().map(|&p| rot(p)).collect(), 0.0);
        let rhist: Vec<Vec2> = e.history().iter().map(|&p| rot(p)).collect();
        let obs = build_observation(&rpose, &rscan, &rpath, &rhist, w.tick, rot(w.goal));
        for (a, b) in obs.to_vec().iter().zip(base.to_vec()) {
            assert!((a - b).abs() < 1e-9, "theta {theta}: {a} vs {b}");
        }
    }
}

#[test]
fn sub_seeds_differ_by_stream() {
    assert_ne!(sub_seed(1, 1), sub_seed(1, 2));
    assert_eq!(sub_seed(7, 3), sub_seed(7, 3));
}
