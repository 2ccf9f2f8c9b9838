//! Sampling-based learners for delayed processes: tabular SARSA / Q-learning,
//! dSARSA, DIDA imitation (exact, sampled and memoryless-behaviour variants)
//! and UCRL2 with regret accounting.

mod dida;
mod td;
mod ucrl2;

pub use dida::{dida_exact, dida_sampled, mdida_sampled, DidaConfig, DidaResult, ImitationDataset};
pub use td::{dsarsa_run, dsarsa_step, q_learning_run, sarsa_run, DelayBuffers, Schedule, TdTuple};
pub use ucrl2::{
    extended_value_iteration, ucrl2_run, OptimisticModel, RegretRow, RegretTrace, Ucrl2Config,
};

use rand::Rng;

/// Step-size rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningRate {
    Constant(f64),
    /// `1 / (1 + n(s,a))^power` with `n` the number of past updates of the pair.
    Visits {
        power: f64,
    },
}

/// Tabular action values with per-pair update counts and per-state visit counts.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub n_states: usize,
    pub n_actions: usize,
    pub values: Vec<f64>,
    pub updates: Vec<u64>,
    pub visits: Vec<u64>,
    pub learning_rate: LearningRate,
    /// Lower bound of the exploration schedule.
    pub epsilon_floor: f64,
}

impl QTable {
    pub fn new(n_states: usize, n_actions: usize, learning_rate: LearningRate) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
            updates: vec![0; n_states * n_actions],
            visits: vec![0; n_states],
            learning_rate,
            epsilon_floor: 0.05,
        }
    }

    pub fn q(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn greedy(&self, s: usize) -> usize {
        crate::util::argmax(self.row(s))
    }

    pub fn max(&self, s: usize) -> f64 {
        self.row(s)
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max(floor, 1 / sqrt(1 + visits(s)))`.
    pub fn epsilon(&self, s: usize) -> f64 {
        (1.0 / (1.0 + self.visits[s] as f64).sqrt()).max(self.epsilon_floor)
    }

    /// Step size for the next update of `(s, a)`.
    pub fn alpha(&self, s: usize, a: usize) -> f64 {
        match self.learning_rate {
            LearningRate::Constant(a) => a,
            LearningRate::Visits { power } => {
                (1.0 + self.updates[s * self.n_actions + a] as f64).powf(-power)
            }
        }
    }

    /// Epsilon-greedy choice at `s`; counts the visit.
    ///
    /// Draws one uniform, then a uniform action only when exploring.
    pub fn epsilon_greedy<R: Rng + ?Sized>(&mut self, s: usize, rng: &mut R) -> usize {
        let eps = self.epsilon(s);
        self.visits[s] += 1;
        if rng.random::<f64>() < eps {
            rng.random_range(0..self.n_actions)
        } else {
            self.greedy(s)
        }
    }

    /// Greedy deterministic policy.
    pub fn greedy_policy(&self) -> crate::mdp::StationaryPolicy {
        let actions: Vec<usize> = (0..self.n_states).map(|s| self.greedy(s)).collect();
        crate::mdp::StationaryPolicy::deterministic(&actions, self.n_actions)
    }
}
