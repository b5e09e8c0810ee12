use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::OBS_DIM;

/// Floor added to Q_DIFF and TD_ERROR priorities so no transition starves.
pub const PRIORITY_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PriorityMode {
    Uniform,
    TdError,
    QDiff,
}

impl std::fmt::Display for PriorityMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PriorityMode::Uniform => "uniform",
            PriorityMode::TdError => "td_error",
            PriorityMode::QDiff => "q_diff",
        })
    }
}

/// Binary sum tree over a fixed number of leaves.
#[derive(Debug, Clone)]
pub struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        let leaves = capacity.max(1).next_power_of_two();
        Self {
            leaves,
            nodes: vec![0.0; 2 * leaves],
        }
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.leaves + i]
    }

    pub fn set(&mut self, i: usize, value: f64) {
        let mut k = self.leaves + i;
        self.nodes[k] = value;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    /// Leaf whose cumulative interval contains `mass`, for `mass` in `[0, total)`.
    /// Leaves with zero value are never returned.
    pub fn find(&self, mut mass: f64) -> usize {
        let mut k = 1;
        while k < self.leaves {
            let left = self.nodes[2 * k];
            if mass < left || self.nodes[2 * k + 1] <= 0.0 {
                k *= 2;
            } else {
                mass -= left;
                k = 2 * k + 1;
            }
        }
        k - self.leaves
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f32>,
    pub action: usize,
    pub reward: f32,
    pub next_obs: Vec<f32>,
    pub terminated: bool,
    pub truncated: bool,
}

/// Indices drawn from the buffer and their importance-sampling weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledBatch {
    pub indices: Vec<usize>,
    pub weights: Vec<f32>,
}

/// Ring buffer with sampling proportional to `priority^alpha`.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    alpha: f64,
    data: Vec<Transition>,
    priorities: Vec<f64>,
    next: usize,
    tree: SumTree,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, alpha: f64) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            alpha,
            data: Vec::with_capacity(capacity.min(1 << 16)),
            priorities: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
            tree: SumTree::new(capacity),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.data[i]
    }

    pub fn priority(&self, i: usize) -> f64 {
        self.priorities[i]
    }

    /// Sampling probability of item `i`.
    pub fn probability(&self, i: usize) -> f64 {
        self.tree.get(i) / self.tree.total()
    }

    /// Stores `t`, overwriting the oldest item when full; returns its slot.
    pub fn push(&mut self, t: Transition, priority: f64) -> usize {
        debug_assert_eq!(t.obs.len(), OBS_DIM);
        let slot = self.next;
        if self.data.len() < self.capacity {
            self.data.push(t);
            self.priorities.push(0.0);
        } else {
            self.data[slot] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        self.set_priority(slot, priority);
        slot
    }

    pub fn set_priority(&mut self, i: usize, priority: f64) {
        assert!(
            priority > 0.0 && priority.is_finite(),
            "priority must be positive, got {priority}"
        );
        self.priorities[i] = priority;
        self.tree.set(i, priority.powf(self.alpha));
    }

    /// Draws `n` items independently with probability proportional to `priority^alpha`.
    ///
    /// Weights are `(N P(i))^-beta` divided by the batch maximum, or all ones
    /// when `importance_sampling` is off.
    pub fn sample(
        &self,
        n: usize,
        beta: f64,
        importance_sampling: bool,
        rng: &mut impl Rng,
    ) -> SampledBatch {
        assert!(!self.is_empty(), "cannot sample an empty buffer");
        let total = self.tree.total();
        let indices: Vec<usize> = (0..n)
            .map(|_| {
                let i = self.tree.find(rng.random::<f64>() * total);
                // rounding at the very top of the range can land on an empty leaf
                i.min(self.data.len() - 1)
            })
            .collect();
        let weights = if importance_sampling {
            let len = self.data.len() as f64;
            let raw: Vec<f64> = indices
                .iter()
                .map(|&i| (len * self.probability(i)).powf(-beta))
                .collect();
            let max = raw.iter().copied().fold(0.0, f64::max);
            raw.iter().map(|w| (w / max) as f32).collect()
        } else {
            vec![1.0; n]
        };
        SampledBatch { indices, weights }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn dummy(tag: f32) -> Transition {
        Transition {
            obs: vec![tag; OBS_DIM],
            action: 0,
            reward: 0.0,
            next_obs: vec![tag; OBS_DIM],
            terminated: false,
            truncated: false,
        }
    }

    fn chi_square_p(counts: &[u64], expected: &[f64]) -> f64 {
        let stat: f64 = counts
            .iter()
            .zip(expected)
            .map(|(&c, &e)| (c as f64 - e).powi(2) / e)
            .sum();
        let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
        1.0 - dist.cdf(stat)
    }

    #[test]
    fn sum_tree_totals_and_lookup() {
        let mut t = SumTree::new(5);
        for (i, v) in [1.0, 2.0, 0.0, 3.0, 4.0].into_iter().enumerate() {
            t.set(i, v);
        }
        assert_eq!(t.total(), 10.0);
        assert_eq!(t.find(0.5), 0);
        assert_eq!(t.find(1.0), 1);
        assert_eq!(t.find(2.99), 1);
        assert_eq!(t.find(3.0), 3);
        assert_eq!(t.find(9.99), 4);
        t.set(4, 0.5);
        assert_eq!(t.total(), 6.5);
    }

    #[test]
    fn equal_priorities_sample_uniformly() {
        let mut buf = ReplayBuffer::new(50, 0.6);
        for i in 0..50 {
            buf.push(dummy(i as f32), 1.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = vec![0u64; 50];
        let draws = 100_000;
        for _ in 0..draws / 100 {
            for i in buf.sample(100, 0.4, true, &mut rng).indices {
                counts[i] += 1;
            }
        }
        let expected = vec![draws as f64 / 50.0; 50];
        let p = chi_square_p(&counts, &expected);
        assert!(p > 0.01, "chi-square p = {p}");
    }

    #[test]
    fn sampling_is_proportional_to_priority_power() {
        let mut buf = ReplayBuffer::new(8, 0.6);
        let prios = [0.1, 0.5, 1.0, 2.0, 3.0, 0.01, 5.0, 1.5];
        for (i, &p) in prios.iter().enumerate() {
            buf.push(dummy(i as f32), p);
        }
        let mass: f64 = prios.iter().map(|p: &f64| p.powf(0.6)).sum();
        let draws = 200_000u64;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut counts = vec![0u64; 8];
        for i in buf.sample(draws as usize, 0.4, false, &mut rng).indices {
            counts[i] += 1;
        }
        let expected: Vec<f64> = prios
            .iter()
            .map(|p| draws as f64 * p.powf(0.6) / mass)
            .collect();
        let p = chi_square_p(&counts, &expected);
        assert!(p > 0.01, "chi-square p = {p}, counts {counts:?}");
    }

    #[test]
    fn ring_overwrites_oldest_and_keeps_tree_consistent() {
        let mut buf = ReplayBuffer::new(3, 1.0);
        for i in 0..5 {
            buf.push(dummy(i as f32), (i + 1) as f64);
        }
        assert_eq!(buf.len(), 3);
        // slots hold items 3, 4, 2
        assert_eq!(buf.get(0).obs[0], 3.0);
        assert_eq!(buf.get(1).obs[0], 4.0);
        assert_eq!(buf.get(2).obs[0], 2.0);
        assert!((buf.probability(1) - 5.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn importance_weights_are_max_normalised() {
        let mut buf = ReplayBuffer::new(4, 1.0);
        for (i, p) in [1.0, 1.0, 1.0, 5.0].into_iter().enumerate() {
            buf.push(dummy(i as f32), p);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = buf.sample(64, 1.0, true, &mut rng);
        let max = b.weights.iter().copied().fold(0.0f32, f32::max);
        assert_eq!(max, 1.0);
        for (&i, &w) in b.indices.iter().zip(&b.weights) {
            // with beta = 1 the rare items get weight 1 and the frequent one 1/5
            let expect = if i == 3 { 0.2 } else { 1.0 };
            if b.indices.iter().any(|&j| j != 3) {
                assert!((w - expect).abs() < 1e-6, "item {i} weight {w}");
            }
        }
        let off = buf.sample(8, 1.0, false, &mut rng);
        assert!(off.weights.iter().all(|&w| w == 1.0));
    }
}
