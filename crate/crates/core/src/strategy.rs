//! Rule-based replanning policies and the never-replan baseline.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::env::{Action, DecisionContext, ReplanPolicy};
use crate::error::{ReplanError, Result};
use crate::world::{Vec2, CONTROL_DT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    None,
    Distance,
    Stuck,
    Time,
    TimePatience,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::None,
        StrategyKind::Distance,
        StrategyKind::Stuck,
        StrategyKind::Time,
        StrategyKind::TimePatience,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::None => "none",
            StrategyKind::Distance => "distance",
            StrategyKind::Stuck => "stuck",
            StrategyKind::Time => "time",
            StrategyKind::TimePatience => "time_patience",
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategyConfig {
    pub d_rep: f64,
    pub dt_stuck: f64,
    pub dt_rep: f64,
    pub d_patience: f64,
    pub stuck_epsilon: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            d_rep: 1.0,
            dt_stuck: 3.0,
            dt_rep: 1.0,
            d_patience: 3.0,
            stuck_epsilon: 0.05,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d_rep", self.d_rep),
            ("dt_stuck", self.dt_stuck),
            ("dt_rep", self.dt_rep),
            ("d_patience", self.d_patience),
            ("stuck_epsilon", self.stuck_epsilon),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ReplanError::Config(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn stuck_ticks(&self) -> usize {
        (self.dt_stuck / CONTROL_DT).round() as usize
    }

    fn rep_ticks(&self) -> u64 {
        (self.dt_rep / CONTROL_DT).round() as u64
    }
}

/// Progress since the last replan. Cleared at episode start and after every replan.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StrategyState {
    pub dist_since_replan: f64,
    pub ticks_since_replan: u64,
    /// Positions over the trailing stuck window, oldest first.
    pub window: VecDeque<Vec2>,
}

impl StrategyState {
    pub fn clear(&mut self, position: Vec2) {
        self.dist_since_replan = 0.0;
        self.ticks_since_replan = 0;
        self.window.clear();
        self.window.push_back(position);
    }

    pub fn time_since_replan(&self) -> f64 {
        self.ticks_since_replan as f64 * CONTROL_DT
    }

    fn advance(&mut self, positions: &[Vec2], window_ticks: usize) {
        for &p in positions {
            if let Some(&last) = self.window.back() {
                self.dist_since_replan += (p - last).norm();
            }
            self.ticks_since_replan += 1;
            self.window.push_back(p);
            while self.window.len() > window_ticks + 1 {
                self.window.pop_front();
            }
        }
    }

    /// The window spans the full stuck interval and every pair of positions in it is within `epsilon`.
    pub fn is_stuck(&self, window_ticks: usize, epsilon: f64) -> bool {
        if self.window.len() < window_ticks + 1 {
            return false;
        }
        let pts: Vec<Vec2> = self.window.iter().copied().collect();
        pts.iter()
            .enumerate()
            .all(|(i, a)| pts[i + 1..].iter().all(|b| (a - b).norm() < epsilon))
    }
}

#[derive(Debug, Clone)]
pub struct RuleStrategy {
    pub kind: StrategyKind,
    pub cfg: StrategyConfig,
    pub state: StrategyState,
}

impl RuleStrategy {
    pub fn new(kind: StrategyKind, cfg: StrategyConfig) -> Self {
        Self {
            kind,
            cfg,
            state: StrategyState::default(),
        }
    }

    fn time_rule(&self) -> bool {
        self.state.ticks_since_replan >= self.cfg.rep_ticks()
    }

    fn stuck_rule(&self) -> bool {
        self.state
            .is_stuck(self.cfg.stuck_ticks(), self.cfg.stuck_epsilon)
    }

    /// Decision from the current state alone.
    pub fn rule(&self, position: Vec2, goal: Vec2) -> Action {
        let fire = match self.kind {
            StrategyKind::None => false,
            StrategyKind::Distance => self.state.dist_since_replan >= self.cfg.d_rep,
            StrategyKind::Stuck => self.stuck_rule(),
            StrategyKind::Time => self.time_rule(),
            StrategyKind::TimePatience => {
                if (goal - position).norm() > self.cfg.d_patience {
                    self.time_rule()
                } else {
                    self.stuck_rule()
                }
            }
        };
        if fire {
            Action::Replan
        } else {
            Action::NoReplan
        }
    }
}

impl ReplanPolicy for RuleStrategy {
    fn name(&self) -> String {
        self.kind.name().to_string()
    }

    fn reset(&mut self, start: Vec2) {
        self.state.clear(start);
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Action {
        if ctx.replanned {
            self.state.clear(ctx.position);
        } else {
            self.state
                .advance(ctx.step_positions, self.cfg.stuck_ticks());
        }
        self.rule(ctx.position, ctx.goal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Observation;
    use proptest::prelude::*;

    fn obs() -> Observation {
        Observation {
            scan: vec![Vec2::zeros(); 20],
            path: vec![Vec2::zeros(); 5],
            traj: vec![Vec2::zeros(); 5],
            goal: Vec2::zeros(),
        }
    }

    fn ctx<'a>(
        o: &'a Observation,
        position: Vec2,
        goal: Vec2,
        steps: &'a [Vec2],
        replanned: bool,
    ) -> DecisionContext<'a> {
        DecisionContext {
            observation: o,
            tick: 0,
            position,
            goal,
            step_positions: steps,
            replanned,
        }
    }

    #[test]
    fn distance_rule_fires_past_threshold() {
        let o = obs();
        let mut s = RuleStrategy::new(StrategyKind::Distance, StrategyConfig::default());
        s.reset(Vec2::zeros());
        let steps: Vec<Vec2> = (1..=12).map(|i| Vec2::new(0.1 * i as f64, 0.0)).collect();
        let goal = Vec2::new(10.0, 0.0);
        assert_eq!(
            s.decide(&ctx(&o, steps[11], goal, &steps, false)),
            Action::Replan
        );
        assert!((s.state.dist_since_replan - 1.2).abs() < 1e-12);
        // after the replan step the counter restarts
        assert_eq!(
            s.decide(&ctx(&o, steps[11], goal, &[], true)),
            Action::NoReplan
        );
        assert_eq!(s.state.dist_since_replan, 0.0);
    }

    #[test]
    fn stuck_rule_requires_full_still_window() {
        let o = obs();
        let goal = Vec2::new(10.0, 0.0);
        let mut s = RuleStrategy::new(StrategyKind::Stuck, StrategyConfig::default());
        s.reset(Vec2::zeros());
        // 0.2 m of motion inside the window
        let moving: Vec<Vec2> = (1..=30)
            .map(|i| Vec2::new(0.2 * i as f64 / 30.0, 0.0))
            .collect();
        assert_eq!(
            s.decide(&ctx(&o, moving[29], goal, &moving, false)),
            Action::NoReplan
        );
        // the oldest window entry is still 0.053 m away
        let still = vec![moving[29]; 22];
        assert_eq!(
            s.decide(&ctx(&o, moving[29], goal, &still, false)),
            Action::NoReplan
        );
        assert_eq!(
            s.decide(&ctx(&o, moving[29], goal, &still[..1], false)),
            Action::Replan
        );
    }

    #[test]
    fn time_rule_is_inclusive() {
        let o = obs();
        let goal = Vec2::new(10.0, 0.0);
        let mut s = RuleStrategy::new(StrategyKind::Time, StrategyConfig::default());
        s.reset(Vec2::zeros());
        let nine = vec![Vec2::zeros(); 9];
        assert_eq!(
            s.decide(&ctx(&o, Vec2::zeros(), goal, &nine, false)),
            Action::NoReplan
        );
        assert_eq!(
            s.decide(&ctx(&o, Vec2::zeros(), goal, &nine[..1], false)),
            Action::Replan
        );
        assert_eq!(s.state.time_since_replan(), 1.0);
    }

    #[test]
    fn patience_switches_to_stuck_near_goal() {
        let o = obs();
        let mut s = RuleStrategy::new(StrategyKind::TimePatience, StrategyConfig::default());
        let start = Vec2::zeros();
        s.reset(start);
        let moving: Vec<Vec2> = (1..=10).map(|i| Vec2::new(0.05 * i as f64, 0.0)).collect();
        let near_goal = Vec2::new(0.5 + 2.9, 0.0);
        assert_eq!(
            s.decide(&ctx(&o, moving[9], near_goal, &moving, false)),
            Action::NoReplan
        );
        let far_goal = Vec2::new(10.0, 0.0);
        s.reset(start);
        assert_eq!(
            s.decide(&ctx(&o, moving[9], far_goal, &moving, false)),
            Action::Replan
        );
    }

    #[test]
    fn time_cadence_matches_step_durations() {
        let o = obs();
        let goal = Vec2::new(100.0, 0.0);
        let mut s = RuleStrategy::new(StrategyKind::Time, StrategyConfig::default());
        s.reset(Vec2::zeros());
        let (mut ticks, mut replans) = (0u64, 0u64);
        let mut last: (Vec<Vec2>, bool) = (Vec::new(), false);
        while ticks < 1000 {
            let a = s.decide(&ctx(&o, Vec2::zeros(), goal, &last.0, last.1));
            let n = if a == Action::Replan { 11 } else { 1 };
            ticks += n;
            replans += u64::from(a == Action::Replan);
            last = (vec![Vec2::zeros(); n as usize], a == Action::Replan);
        }
        let expected = (100.0f64 / 2.1).floor() as u64;
        assert!(replans.abs_diff(expected) <= 1, "{replans} vs {expected}");
    }

    proptest! {
        #[test]
        fn stuck_never_fires_while_moving(steps in proptest::collection::vec((0.0..std::f64::consts::TAU, 0.0..0.2f64), 1..200)) {
            let o = obs();
            let goal = Vec2::new(100.0, 0.0);
            let mut s = RuleStrategy::new(StrategyKind::Stuck, StrategyConfig::default());
            s.reset(Vec2::zeros());
            let mut history = vec![Vec2::zeros()];
            for (a, d) in steps {
                let p = *history.last().unwrap() + Vec2::new(a.cos(), a.sin()) * d;
                history.push(p);
                let action = s.decide(&ctx(&o, p, goal, &[p], false));
                if history.len() > 30 {
                    let window = &history[history.len() - 31..];
                    let moved = window.iter().any(|x| window.iter().any(|y| (x - y).norm() >= 0.05));
                    if moved {
                        prop_assert_eq!(action, Action::NoReplan);
                    }
                }
            }
        }
    }
}
