//! The replanning decision process: planners, delay, reward and termination.

pub mod observation;
pub mod reward;
pub mod trace;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use observation::{build_observation, Observation, OBS_DIM};
pub use reward::{sgt, sgt_unclipped};
pub use trace::{EpisodeTrace, TraceHeader, TraceRecord};

use crate::error::{ReplanError, Result};
use crate::global::{
    plan_dijkstra_detailed, Costmap, GlobalPlanner, GlobalPlannerKind, ReferencePath,
};
use crate::local::{LocalPlanner, LocalPlannerConfig, LocalPlannerKind};
use crate::world::{spawn_scenario, MapKind, Scan, ScenarioConfig, Vec2, WorldState, CONTROL_DT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    NoReplan,
    Replan,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::NoReplan, Action::Replan];

    /// Network output index.
    pub fn index(self) -> usize {
        match self {
            Action::NoReplan => 0,
            Action::Replan => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Action> {
        match i {
            0 => Some(Action::NoReplan),
            1 => Some(Action::Replan),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub control_dt: f64,
    pub replan_delay: f64,
    pub goal_tolerance: f64,
    pub time_limit: f64,
    pub sgt_alpha: f64,
    pub sgt_beta: f64,
    pub speed_max: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            control_dt: CONTROL_DT,
            replan_delay: 1.0,
            goal_tolerance: 0.5,
            time_limit: 100.0,
            sgt_alpha: 4.0,
            sgt_beta: 8.0,
            speed_max: 1.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if (self.control_dt - CONTROL_DT).abs() > 1e-12 {
            return Err(ReplanError::Config(format!(
                "control_dt is fixed at {CONTROL_DT} s, got {}",
                self.control_dt
            )));
        }
        if self.replan_delay < self.control_dt {
            return Err(ReplanError::Config(
                "replan_delay must be at least control_dt".into(),
            ));
        }
        if !(0.0 < self.sgt_alpha && self.sgt_alpha < self.sgt_beta) {
            return Err(ReplanError::Config("need 0 < sgt_alpha < sgt_beta".into()));
        }
        if !(self.goal_tolerance > 0.0 && self.time_limit > 0.0 && self.speed_max > 0.0) {
            return Err(ReplanError::Config(
                "goal_tolerance, time_limit and speed_max must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Control ticks spent waiting for a requested plan.
    pub fn delay_ticks(&self) -> u64 {
        (self.replan_delay / self.control_dt + 1e-9).floor() as u64
    }

    pub fn limit_ticks(&self) -> u64 {
        (self.time_limit / self.control_dt - 1e-9).ceil() as u64
    }
}

/// Everything that defines an episode except its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSettings {
    pub scenario: ScenarioConfig,
    pub env: EnvConfig,
    pub local: LocalPlannerConfig,
    pub global_planner: GlobalPlannerKind,
    pub local_planner: LocalPlannerKind,
}

impl Default for EnvSettings {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            env: EnvConfig::default(),
            local: LocalPlannerConfig::default(),
            global_planner: GlobalPlannerKind::Dijkstra,
            local_planner: LocalPlannerKind::Dwa,
        }
    }
}

impl EnvSettings {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.env.validate()?;
        self.local.validate()
    }
}

/// Independent seed for a named consumer of the episode seed.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

const STREAM_PRM: u64 = 1;
const STREAM_MPC: u64 = 2;
const STREAM_PLAN_BASE: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Collision,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub elapsed: f64,
    pub replanned: bool,
    /// Robot position after each control tick of this step.
    pub positions: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub seed: u64,
    pub map_kind: MapKind,
    pub outcome: Outcome,
    pub sim_time: f64,
    pub ticks: u64,
    pub decisions: u64,
    pub replans: u64,
    pub failed_replans: u64,
    /// Shortest path length on the initial costmap.
    pub l_path: f64,
    /// Distance actually driven.
    pub travelled: f64,
    pub sgt: f64,
    pub sgt_unclipped: f64,
}

impl EpisodeResult {
    pub fn success(&self) -> bool {
        self.outcome == Outcome::Success
    }
}

/// What a replanning policy sees at a decision point.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub observation: &'a Observation,
    pub tick: u64,
    pub position: Vec2,
    pub goal: Vec2,
    /// Positions visited during the previous step; empty at the first decision.
    pub step_positions: &'a [Vec2],
    /// The previous step was a replan.
    pub replanned: bool,
}

/// A replanning policy: called once per decision step.
pub trait ReplanPolicy {
    fn name(&self) -> String;
    fn reset(&mut self, start: Vec2);
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Action;
}

#[derive(Debug, Clone)]
struct Episode {
    seed: u64,
    world: WorldState,
    static_costmap: Costmap,
    scan: Scan,
    costmap: Costmap,
    global: GlobalPlanner,
    local: LocalPlanner,
    path: ReferencePath,
    l_path: f64,
    history: Vec<Vec2>,
    decisions: u64,
    replans: u64,
    failed_replans: u64,
    travelled: f64,
    outcome: Option<Outcome>,
    reward: f64,
}

/// One episode at a time; `reset` starts the next.
#[derive(Debug, Clone)]
pub struct ReplanEnv {
    pub settings: EnvSettings,
    episode: Option<Episode>,
    trace: Option<Vec<TraceRecord>>,
    record_trace: bool,
}

impl ReplanEnv {
    pub fn new(settings: EnvSettings) -> Result<Self> {
        settings.validate()?;
        Ok(Self {
            settings,
            episode: None,
            trace: None,
            record_trace: false,
        })
    }

    /// Record per-tick trace rows from the next reset on.
    pub fn set_record_trace(&mut self, on: bool) {
        self.record_trace = on;
    }

    pub fn reset(&mut self, seed: u64) -> Result<Observation> {
        let mut scenario = self.settings.scenario.clone();
        scenario.seed = seed;
        let world = spawn_scenario(&scenario)?;
        let static_costmap = Costmap::from_map(&world.map);
        let scan = world.sense();
        let costmap = static_costmap.with_scan(&world.map, &scan);
        let start = world.robot_position();

        let dijkstra = plan_dijkstra_detailed(&costmap, start, world.goal)
            .map_err(|_| ReplanError::InitialPlanFailed { seed })?;
        let l_path = dijkstra.length_from(start, world.goal, costmap.resolution);

        let global = GlobalPlanner::new(
            self.settings.global_planner,
            &static_costmap,
            sub_seed(seed, STREAM_PRM),
        );
        let path = match self.settings.global_planner {
            GlobalPlannerKind::Dijkstra => dijkstra.path,
            _ => global
                .plan(
                    &costmap,
                    start,
                    world.goal,
                    sub_seed(seed, STREAM_PLAN_BASE),
                )
                .map_err(|_| ReplanError::InitialPlanFailed { seed })?,
        };
        let local = LocalPlanner::new(
            self.settings.local_planner,
            sub_seed(seed, STREAM_MPC),
            &self.settings.local,
        );

        self.episode = Some(Episode {
            seed,
            world,
            static_costmap,
            scan,
            costmap,
            global,
            local,
            path,
            l_path,
            history: vec![start],
            decisions: 0,
            replans: 0,
            failed_replans: 0,
            travelled: 0.0,
            outcome: None,
            reward: 0.0,
        });
        self.trace = self.record_trace.then(Vec::new);
        Ok(self.observation())
    }

    fn ep(&self) -> &Episode {
        self.episode.as_ref().expect("reset before use")
    }

    pub fn is_done(&self) -> bool {
        self.episode.as_ref().is_none_or(|e| e.outcome.is_some())
    }

    pub fn world(&self) -> &WorldState {
        &self.ep().world
    }

    pub fn path(&self) -> &ReferencePath {
        &self.ep().path
    }

    pub fn costmap(&self) -> &Costmap {
        &self.ep().costmap
    }

    pub fn l_path(&self) -> f64 {
        self.ep().l_path
    }

    /// Robot positions at every tick so far, starting with the spawn point.
    pub fn history(&self) -> &[Vec2] {
        &self.ep().history
    }

    pub fn observation(&self) -> Observation {
        let ep = self.ep();
        build_observation(
            &ep.world.robot.pose,
            &ep.scan,
            &ep.path,
            &ep.history,
            ep.world.tick,
            ep.world.goal,
        )
    }

    /// Runs one control tick and reports how the episode ended, if it did.
    fn tick(&mut self, decision: u64, action: Action, replanned: bool) -> Option<Outcome> {
        let settings = &self.settings;
        let ep = self.episode.as_mut().expect("reset before use");
        let cmd = ep
            .local
            .command(&ep.path, &ep.world.robot, &ep.costmap, &settings.local);
        let before = ep.world.robot_position();
        ep.world.step_obstacles();
        ep.world.step_robot(cmd);
        let p = ep.world.robot_position();
        ep.travelled += (p - before).norm();
        ep.history.push(p);
        ep.scan = ep.world.sense();
        ep.costmap = ep.static_costmap.with_scan(&ep.world.map, &ep.scan);

        let outcome = if ep.world.check_collision() {
            Some(Outcome::Collision)
        } else if (p - ep.world.goal).norm() <= settings.env.goal_tolerance {
            Some(Outcome::Success)
        } else if ep.world.tick >= settings.env.limit_ticks() {
            Some(Outcome::Timeout)
        } else {
            None
        };
        if outcome == Some(Outcome::Success) {
            ep.reward = sgt(true, ep.l_path, ep.world.sim_time(), &settings.env);
        }
        ep.outcome = outcome;
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceRecord {
                decision,
                action,
                tick: ep.world.tick,
                sim_time: ep.world.sim_time(),
                robot: ep.world.robot,
                obstacles: ep.world.obstacles.iter().map(|o| o.position).collect(),
                replanned,
                reward: ep.reward,
                terminated: matches!(outcome, Some(Outcome::Success | Outcome::Collision)),
                truncated: outcome == Some(Outcome::Timeout),
            });
        }
        outcome
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult> {
        if self.is_done() {
            return Err(ReplanError::StepAfterDone);
        }
        let decision = self.ep().decisions;
        let start_tick = self.ep().world.tick;
        let mut outcome = None;
        match action {
            Action::NoReplan => {
                outcome = self.tick(decision, action, false);
            }
            Action::Replan => {
                // the planner sees the world as it is now; its answer arrives after the delay
                let ep = self.episode.as_mut().expect("reset before use");
                let planned_at = ep.world.sim_time();
                let plan_seed = sub_seed(ep.seed, STREAM_PLAN_BASE + 1 + ep.replans);
                let plan = ep.global.plan(
                    &ep.costmap,
                    ep.world.robot_position(),
                    ep.world.goal,
                    plan_seed,
                );
                ep.replans += 1;
                for _ in 0..self.settings.env.delay_ticks() {
                    outcome = self.tick(decision, action, false);
                    if outcome.is_some() {
                        break;
                    }
                }
                if outcome.is_none() {
                    let ep = self.episode.as_mut().expect("reset before use");
                    match plan {
                        Ok(mut p) => {
                            p.planned_at = planned_at;
                            ep.path = p;
                        }
                        Err(_) => ep.failed_replans += 1,
                    }
                    outcome = self.tick(decision, action, true);
                }
            }
        }
        let ep = self.episode.as_mut().expect("reset before use");
        ep.decisions += 1;
        let ticks = (ep.world.tick - start_tick) as usize;
        let positions = ep.history[ep.history.len() - ticks..].to_vec();
        let reward = ep.reward;
        Ok(StepResult {
            observation: self.observation(),
            reward,
            terminated: matches!(outcome, Some(Outcome::Success | Outcome::Collision)),
            truncated: outcome == Some(Outcome::Timeout),
            elapsed: ticks as f64 * self.settings.env.control_dt,
            replanned: action == Action::Replan,
            positions,
        })
    }

    /// Summary of the finished episode.
    pub fn result(&self) -> Option<EpisodeResult> {
        let ep = self.episode.as_ref()?;
        let outcome = ep.outcome?;
        let success = outcome == Outcome::Success;
        let t = ep.world.sim_time();
        Some(EpisodeResult {
            seed: ep.seed,
            map_kind: ep.world.map.kind,
            outcome,
            sim_time: t,
            ticks: ep.world.tick,
            decisions: ep.decisions,
            replans: ep.replans,
            failed_replans: ep.failed_replans,
            l_path: ep.l_path,
            travelled: ep.travelled,
            sgt: sgt(success, ep.l_path, t, &self.settings.env),
            sgt_unclipped: sgt_unclipped(success, ep.l_path, t, &self.settings.env),
        })
    }

    pub fn take_trace(&mut self, policy: &str) -> Option<EpisodeTrace> {
        let records = self.trace.take()?;
        Some(EpisodeTrace {
            header: TraceHeader {
                settings: self.settings.clone(),
                seed: self.ep().seed,
                policy: policy.to_string(),
            },
            records,
        })
    }
}

/// Plays one full episode with `policy`.
pub fn run_episode(
    env: &mut ReplanEnv,
    policy: &mut dyn ReplanPolicy,
    seed: u64,
) -> Result<EpisodeResult> {
    let mut obs = env.reset(seed)?;
    policy.reset(env.world().robot_position());
    let mut positions = Vec::new();
    let mut replanned = false;
    while !env.is_done() {
        let action = {
            let ctx = DecisionContext {
                observation: &obs,
                tick: env.world().tick,
                position: env.world().robot_position(),
                goal: env.world().goal,
                step_positions: &positions,
                replanned,
            };
            policy.decide(&ctx)
        };
        let step = env.step(action)?;
        obs = step.observation;
        positions = step.positions;
        replanned = step.replanned;
    }
    Ok(env.result().expect("episode finished"))
}

#[cfg(test)]
mod tests;
