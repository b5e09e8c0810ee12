//! DQN training: epsilon-greedy collection on a single environment and prioritized updates.

use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{Adam, QNetwork};
use super::replay::{PriorityMode, ReplayBuffer, Transition, PRIORITY_FLOOR};
use super::{act, compute_priority, new_q_network, save_weights, ARCH};
use crate::env::{sub_seed, EnvSettings, ReplanEnv, OBS_DIM};
use crate::error::{ReplanError, Result};

const STREAM_INIT: u64 = 1;
const STREAM_AGENT: u64 = 2;
/// Episode seeds are drawn from this stream onwards, so they never coincide with small evaluation seeds.
const STREAM_EPISODES: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainerConfig {
    pub lr: f64,
    pub batch: usize,
    pub buffer_capacity: usize,
    pub gamma: f64,
    pub total_steps: u64,
    pub warmup_steps: usize,
    pub train_every: u64,
    /// Counted in gradient updates.
    pub target_sync_every: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,
    pub per_alpha: f64,
    pub per_beta_start: f64,
    pub per_beta_end: f64,
    pub importance_sampling: bool,
    pub priority_mode: PriorityMode,
    pub seed: u64,
    /// Steps between checkpoint files; 0 disables them.
    pub checkpoint_every: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            batch: 128,
            buffer_capacity: 100_000,
            gamma: 0.99,
            total_steps: 100_000,
            warmup_steps: 1000,
            train_every: 1,
            target_sync_every: 1000,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 20_000,
            per_alpha: 0.6,
            per_beta_start: 0.4,
            per_beta_end: 1.0,
            importance_sampling: true,
            priority_mode: PriorityMode::QDiff,
            seed: 0,
            checkpoint_every: 10_000,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ReplanError::Config(m.into()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.batch == 0 || self.buffer_capacity == 0 {
            return bad("batch and buffer_capacity must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if self.train_every == 0 || self.target_sync_every == 0 {
            return bad("train_every and target_sync_every must be positive");
        }
        if self.warmup_steps == 0 {
            return bad("warmup_steps must be positive");
        }
        for e in [self.epsilon_start, self.epsilon_end] {
            if !(0.0..=1.0).contains(&e) {
                return bad("epsilon values must lie in [0, 1]");
            }
        }
        if [self.per_alpha, self.per_beta_start, self.per_beta_end]
            .iter()
            .any(|v| v.is_nan() || *v < 0.0)
        {
            return bad("per_alpha and per_beta must be non-negative");
        }
        Ok(())
    }

    /// Linear decay from `epsilon_start` to `epsilon_end`, then constant.
    pub fn epsilon(&self, step: u64) -> f64 {
        if self.epsilon_decay_steps == 0 || step >= self.epsilon_decay_steps {
            return self.epsilon_end;
        }
        let f = step as f64 / self.epsilon_decay_steps as f64;
        self.epsilon_start + f * (self.epsilon_end - self.epsilon_start)
    }

    /// Importance-sampling exponent, annealed linearly over the whole run.
    pub fn beta(&self, step: u64) -> f64 {
        if self.total_steps == 0 {
            return self.per_beta_end;
        }
        let f = (step as f64 / self.total_steps as f64).min(1.0);
        self.per_beta_start + f * (self.per_beta_end - self.per_beta_start)
    }
}

/// Online and target networks, optimiser, replay buffer and the agent's RNG.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainerConfig,
    pub online: QNetwork<f32>,
    pub target: QNetwork<f32>,
    adam: Adam<f32>,
    pub buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    /// Environment steps taken so far.
    pub steps: u64,
    /// Gradient updates so far.
    pub updates: u64,
}

impl Trainer {
    pub fn new(config: TrainerConfig) -> Result<Self> {
        config.validate()?;
        let online = new_q_network(&mut ChaCha8Rng::seed_from_u64(sub_seed(
            config.seed,
            STREAM_INIT,
        )));
        Ok(Self::with_network(config, online))
    }

    pub fn with_network(config: TrainerConfig, online: QNetwork<f32>) -> Self {
        let adam = Adam::new(&online, config.lr as f32);
        Self {
            target: online.clone(),
            online,
            adam,
            buffer: ReplayBuffer::new(config.buffer_capacity, config.per_alpha),
            rng: ChaCha8Rng::seed_from_u64(sub_seed(config.seed, STREAM_AGENT)),
            steps: 0,
            updates: 0,
            config,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon(self.steps)
    }

    /// Epsilon-greedy action index for `obs` at the current step.
    pub fn act(&mut self, obs: &[f32]) -> usize {
        let eps = self.epsilon();
        act(&self.online, obs, eps, &mut self.rng).index()
    }

    /// Adds `t` with its priority under the current networks.
    pub fn push(&mut self, t: Transition) {
        let p = compute_priority(
            &self.online,
            &self.target,
            &t,
            self.config.priority_mode,
            self.config.gamma as f32,
        );
        self.buffer.push(t, p);
    }

    /// One prioritized gradient update; returns the weighted loss.
    pub fn train_step(&mut self) -> Result<f32> {
        let required = self.config.warmup_steps;
        if self.buffer.len() < required {
            return Err(ReplanError::BufferUnderfull {
                len: self.buffer.len(),
                required,
            });
        }
        let n = self.config.batch;
        let beta = self.config.beta(self.steps);
        let batch = self
            .buffer
            .sample(n, beta, self.config.importance_sampling, &mut self.rng);

        let mut x = Array2::<f32>::zeros((n, OBS_DIM));
        let mut x_next = Array2::<f32>::zeros((n, OBS_DIM));
        for (row, &i) in batch.indices.iter().enumerate() {
            let t = self.buffer.get(i);
            x.row_mut(row)
                .assign(&ndarray::ArrayView1::from(&t.obs[..]));
            x_next
                .row_mut(row)
                .assign(&ndarray::ArrayView1::from(&t.next_obs[..]));
        }
        let q_next = self.target.forward(x_next.view());
        let gamma = self.config.gamma as f32;
        let mut actions = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        for (row, &i) in batch.indices.iter().enumerate() {
            let t = self.buffer.get(i);
            actions.push(t.action);
            let bootstrap = if t.terminated {
                0.0
            } else {
                q_next[[row, 0]].max(q_next[[row, 1]])
            };
            targets.push(t.reward + gamma * bootstrap);
        }

        let (loss, grads, q_taken) =
            self.online
                .loss_and_grad(x.view(), &actions, &targets, &batch.weights);
        self.adam.update(&mut self.online, &grads);
        self.updates += 1;

        match self.config.priority_mode {
            PriorityMode::Uniform => {}
            PriorityMode::TdError => {
                // errors from the forward pass that produced this update
                for (k, &i) in batch.indices.iter().enumerate() {
                    let p = f64::from((q_taken[k] - targets[k]).abs()) + PRIORITY_FLOOR;
                    self.buffer.set_priority(i, p);
                }
            }
            PriorityMode::QDiff => {
                let q = self.online.forward(x.view());
                for (k, &i) in batch.indices.iter().enumerate() {
                    let p = f64::from((q[[k, 1]] - q[[k, 0]]).abs()) + PRIORITY_FLOOR;
                    self.buffer.set_priority(i, p);
                }
            }
        }
        if self.updates.is_multiple_of(self.config.target_sync_every) {
            self.target = self.online.clone();
        }
        Ok(loss)
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    /// Environment steps at the end of the episode.
    pub step: u64,
    pub episode: u64,
    pub epsilon: f64,
    /// Mean loss of the updates made during the episode.
    pub loss: Option<f64>,
    pub episode_return: f64,
    pub episode_sgt: f64,
    pub nr: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub episodes: Vec<EpisodeLog>,
    /// Seeds skipped because no initial path existed.
    pub aborted_seeds: Vec<u64>,
    pub steps: u64,
    pub updates: u64,
}

pub const LOG_FILE: &str = "train_log.csv";
pub const WEIGHTS_FILE: &str = "weights.bin";

/// Runs the full training loop.
///
/// With `out_dir` set, the log, periodic checkpoints and final weights are written there.
/// `progress` receives a one-line summary every 1000 steps.
pub fn train(
    settings: &EnvSettings,
    trainer: &mut Trainer,
    out_dir: Option<&Path>,
    progress: &mut dyn FnMut(&str),
) -> Result<TrainSummary> {
    let mut env = ReplanEnv::new(settings.clone())?;
    let mut log = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| ReplanError::io(dir, e))?;
            let path = dir.join(LOG_FILE);
            Some(csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?)
        }
        None => None,
    };
    let total = trainer.config.total_steps;
    let mut episodes = Vec::new();
    let mut aborted_seeds = Vec::new();
    let mut draw = 0u64;
    let mut recent_returns: Vec<f64> = Vec::new();
    while trainer.steps < total {
        let seed = sub_seed(trainer.config.seed, STREAM_EPISODES + draw);
        draw += 1;
        let mut obs = match env.reset(seed) {
            Ok(o) => o.to_f32(),
            Err(ReplanError::InitialPlanFailed { .. }) => {
                aborted_seeds.push(seed);
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut ret = 0.0;
        let mut loss_sum = 0.0;
        let mut loss_n = 0u32;
        while !env.is_done() && trainer.steps < total {
            let action = trainer.act(&obs);
            let sr = env.step(crate::env::Action::from_index(action).expect("binary action"))?;
            let next = sr.observation.to_f32();
            trainer.push(Transition {
                obs: std::mem::replace(&mut obs, next.clone()),
                action,
                reward: sr.reward as f32,
                next_obs: next,
                terminated: sr.terminated,
                truncated: sr.truncated,
            });
            ret += sr.reward;
            trainer.steps += 1;
            if trainer.steps.is_multiple_of(trainer.config.train_every)
                && trainer.buffer.len() >= trainer.config.warmup_steps
            {
                loss_sum += f64::from(trainer.train_step()?);
                loss_n += 1;
            }
            let step = trainer.steps;
            if step.is_multiple_of(1000) {
                let mean = if recent_returns.is_empty() {
                    0.0
                } else {
                    recent_returns.iter().sum::<f64>() / recent_returns.len() as f64
                };
                progress(&format!(
                    "step {step}/{total}  episodes {}  epsilon {:.3}  mean return (last {}) {mean:.3}",
                    episodes.len(),
                    trainer.epsilon(),
                    recent_returns.len()
                ));
                recent_returns.clear();
            }
            let every = trainer.config.checkpoint_every;
            if let Some(dir) = out_dir {
                if every > 0 && step.is_multiple_of(every) && step < total {
                    save_weights(
                        &trainer.online,
                        &dir.join(format!("checkpoint_{step:07}.bin")),
                    )?;
                }
            }
        }
        let Some(result) = env.result() else {
            // the step budget ran out mid-episode
            break;
        };
        recent_returns.push(ret);
        let row = EpisodeLog {
            step: trainer.steps,
            episode: episodes.len() as u64,
            epsilon: trainer.epsilon(),
            loss: (loss_n > 0).then(|| loss_sum / f64::from(loss_n)),
            episode_return: ret,
            episode_sgt: result.sgt,
            nr: result.replans,
        };
        if let (Some(w), Some(dir)) = (log.as_mut(), out_dir) {
            let path = dir.join(LOG_FILE);
            w.serialize(&row).map_err(|e| csv_err(&path, e))?;
            w.flush().map_err(|e| ReplanError::io(&path, e))?;
        }
        episodes.push(row);
    }
    if let Some(dir) = out_dir {
        save_weights(&trainer.online, &dir.join(WEIGHTS_FILE))?;
    }
    debug_assert_eq!(trainer.online.sizes(), ARCH.to_vec());
    Ok(TrainSummary {
        episodes,
        aborted_seeds,
        steps: trainer.steps,
        updates: trainer.updates,
    })
}

fn csv_err(path: &Path, e: csv::Error) -> ReplanError {
    ReplanError::io(path, std::io::Error::other(e))
}
