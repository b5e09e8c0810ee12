//! DQN replanning policy: Q-network, prioritized replay and the training loop.

pub mod network;
pub mod replay;
pub mod trainer;
pub mod weights;

use ndarray::ArrayView1;
use rand::Rng;

pub use network::{Adam, QNetwork};
pub use replay::{PriorityMode, ReplayBuffer, SumTree, Transition, PRIORITY_FLOOR};
pub use trainer::{train, EpisodeLog, TrainSummary, Trainer, TrainerConfig};
pub use weights::{load_weights, save_weights};

use crate::env::{Action, DecisionContext, ReplanPolicy, OBS_DIM};
use crate::world::Vec2;

/// Layer widths of the Q-network.
pub const ARCH: [usize; 4] = [OBS_DIM, network::HIDDEN[0], network::HIDDEN[1], 2];

pub fn new_q_network(rng: &mut impl Rng) -> QNetwork<f32> {
    QNetwork::random(&ARCH, rng)
}

/// `(Q(s, a_not), Q(s, a_rep))`.
pub fn q_values(net: &QNetwork<f32>, obs: &[f32]) -> (f32, f32) {
    let q = net.forward_one(ArrayView1::from(obs));
    (q[0], q[1])
}

/// Argmax with ties going to not replanning, which is the cheaper action.
pub fn greedy_action(q: (f32, f32)) -> Action {
    if q.1 > q.0 {
        Action::Replan
    } else {
        Action::NoReplan
    }
}

pub fn act(net: &QNetwork<f32>, obs: &[f32], epsilon: f64, rng: &mut impl Rng) -> Action {
    if rng.random::<f64>() < epsilon {
        if rng.random_bool(0.5) {
            Action::Replan
        } else {
            Action::NoReplan
        }
    } else {
        greedy_action(q_values(net, obs))
    }
}

/// `r + gamma * max_a Q_target(s', a)`, without the bootstrap for terminal transitions.
/// Truncated transitions still bootstrap.
pub fn td_target(target: &QNetwork<f32>, t: &Transition, gamma: f32) -> f32 {
    if t.terminated {
        return t.reward;
    }
    let (a, b) = q_values(target, &t.next_obs);
    t.reward + gamma * a.max(b)
}

pub fn compute_priority(
    online: &QNetwork<f32>,
    target: &QNetwork<f32>,
    t: &Transition,
    mode: PriorityMode,
    gamma: f32,
) -> f64 {
    match mode {
        PriorityMode::Uniform => 1.0,
        PriorityMode::QDiff => {
            let (q_not, q_rep) = q_values(online, &t.obs);
            f64::from((q_rep - q_not).abs()) + PRIORITY_FLOOR
        }
        PriorityMode::TdError => {
            let (q_not, q_rep) = q_values(online, &t.obs);
            let q = if t.action == Action::Replan.index() {
                q_rep
            } else {
                q_not
            };
            f64::from((q - td_target(target, t, gamma)).abs()) + PRIORITY_FLOOR
        }
    }
}

/// Greedy policy from a trained network.
#[derive(Debug, Clone)]
pub struct DrlPolicy {
    pub net: QNetwork<f32>,
}

impl DrlPolicy {
    pub fn new(net: QNetwork<f32>) -> Self {
        Self { net }
    }
}

impl ReplanPolicy for DrlPolicy {
    fn name(&self) -> String {
        "drl".into()
    }

    fn reset(&mut self, _start: Vec2) {}

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Action {
        greedy_action(q_values(&self.net, &ctx.observation.to_f32()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// 62 -> 1 -> 2 network whose outputs are the two given constants.
    fn constant_q(q_not: f32, q_rep: f32) -> QNetwork<f32> {
        let mut net = QNetwork::zeros(&[OBS_DIM, 1, 2]);
        net.layers[1].b = array![q_not, q_rep];
        net
    }

    fn transition(action: usize, reward: f32, terminated: bool, truncated: bool) -> Transition {
        Transition {
            obs: vec![0.0; OBS_DIM],
            action,
            reward,
            next_obs: vec![0.0; OBS_DIM],
            terminated,
            truncated,
        }
    }

    #[test]
    fn greedy_choice_and_tie_break() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let obs = vec![0.0; OBS_DIM];
        assert_eq!(
            act(&constant_q(0.3, 0.5), &obs, 0.0, &mut rng),
            Action::Replan
        );
        assert_eq!(
            act(&constant_q(0.4, 0.4), &obs, 0.0, &mut rng),
            Action::NoReplan
        );
        assert_eq!(
            act(&constant_q(0.6, 0.5), &obs, 0.0, &mut rng),
            Action::NoReplan
        );
    }

    #[test]
    fn fully_random_acting_is_balanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let net = constant_q(1.0, 0.0);
        let obs = vec![0.0; OBS_DIM];
        let n = 10_000;
        let reps = (0..n)
            .filter(|_| act(&net, &obs, 1.0, &mut rng) == Action::Replan)
            .count();
        let freq = reps as f64 / n as f64;
        assert!((freq - 0.5).abs() <= 0.02, "{freq}");
    }

    #[test]
    fn priorities_per_mode() {
        let online = constant_q(0.3, 0.5);
        let t = transition(1, 0.0, false, false);
        let target = constant_q(0.1, 0.05);
        assert_eq!(
            compute_priority(&online, &target, &t, PriorityMode::Uniform, 0.99),
            1.0
        );
        let qd = compute_priority(&online, &target, &t, PriorityMode::QDiff, 0.99);
        assert!((qd - (0.2 + 1e-3)).abs() < 1e-6, "{qd}");
        // Q(s, a) = 0.2 for the taken action, max next target Q = 0.1
        let online = constant_q(0.7, 0.2);
        let td = compute_priority(&online, &target, &t, PriorityMode::TdError, 0.99);
        assert!((td - 0.102).abs() < 1e-6, "{td}");
    }

    #[test]
    fn terminal_targets_do_not_bootstrap_but_truncated_ones_do() {
        let target = constant_q(0.5, 1.0);
        let term = transition(0, 0.2, true, false);
        assert_eq!(td_target(&target, &term, 0.99), 0.2);
        let trunc = transition(0, 0.2, false, true);
        assert!((td_target(&target, &trunc, 0.99) - (0.2 + 0.99)).abs() < 1e-6);
    }

    #[test]
    fn parameter_count_matches_architecture() {
        let net = new_q_network(&mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(net.param_count(), 24_834);
        let (a, b) = q_values(&net, &[3.0; OBS_DIM]);
        assert!(a.is_finite() && b.is_finite());
    }
}
