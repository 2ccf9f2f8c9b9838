//! Tabular MDPs, exact evaluation and control, probability metrics.
//!
//! Transitions are stored dense as a flat `[s][a][s']` tensor. Every
//! constructor validates rows and rewards, so downstream code can assume the
//! invariants hold.

pub mod eval;
pub mod graph;
pub mod io;
pub mod lipschitz;
pub mod metric;

use crate::error::{Error, Result};
use rand::Rng;

pub use eval::{
    average_reward_evaluation, chain_gain, discounted_state_occupancy, gain_from_initial,
    multichain_gain, occupancy, optimal_gain, policy_evaluation_discounted, q_values,
    value_iteration, value_iteration_with, worst_value_iteration, OccupancyDistribution,
    OccupancyKind, DEFAULT_MAX_ITER,
};

/// Row-sum tolerance for transition rows and initial distributions.
pub const ROW_TOL: f64 = 1e-12;

/// Default cap on the number of dense transition entries a construction may allocate.
pub const DEFAULT_ENTRY_BUDGET: usize = 100_000_000;

/// Tabular MDP with mean rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    r_max: f64,
    initial_dist: Vec<f64>,
    discount: f64,
    state_coords: Option<Vec<Vec<f64>>>,
    signed_rewards: bool,
}

pub(crate) fn check_distribution(what: &str, probs: &[f64], tol: f64) -> Result<()> {
    let mut sum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidDistribution {
                what: what.to_string(),
                detail: format!("entry {i} = {p}"),
            });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > tol {
        return Err(Error::InvalidDistribution {
            what: what.to_string(),
            detail: format!("sums to {sum}"),
        });
    }
    Ok(())
}

/// Checks that allocating `entries` dense values stays within `budget`.
pub fn check_budget(entries: u128, budget: usize) -> Result<()> {
    if entries > budget as u128 {
        return Err(Error::BudgetExceeded { entries, budget });
    }
    Ok(())
}

impl FiniteMdp {
    /// Builds and validates an MDP. `r_max` defaults to the largest reward.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        initial_dist: Vec<f64>,
        discount: f64,
    ) -> Result<Self> {
        Self::build(
            n_states,
            n_actions,
            transition,
            reward,
            initial_dist,
            discount,
            None,
            false,
        )
    }

    /// Like [`FiniteMdp::new`] but admits negative rewards; `r_max` becomes `max |r|`.
    pub fn new_signed(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        initial_dist: Vec<f64>,
        discount: f64,
    ) -> Result<Self> {
        Self::build(
            n_states,
            n_actions,
            transition,
            reward,
            initial_dist,
            discount,
            None,
            true,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        initial_dist: Vec<f64>,
        discount: f64,
        r_max: Option<f64>,
        signed_rewards: bool,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::DimensionMismatch("empty state or action set".into()));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(Error::DimensionMismatch(format!(
                "transition has {} entries, expected {}",
                transition.len(),
                n_states * n_actions * n_states
            )));
        }
        if reward.len() != n_states * n_actions {
            return Err(Error::DimensionMismatch(format!(
                "reward has {} entries, expected {}",
                reward.len(),
                n_states * n_actions
            )));
        }
        if initial_dist.len() != n_states {
            return Err(Error::DimensionMismatch(
                "initial distribution length".into(),
            ));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidParameter(format!(
                "discount {discount} not in [0,1)"
            )));
        }
        for (row, chunk) in transition.chunks(n_states).enumerate() {
            check_distribution(
                &format!(
                    "transition row (s={}, a={})",
                    row / n_actions,
                    row % n_actions
                ),
                chunk,
                ROW_TOL,
            )?;
        }
        check_distribution("initial distribution", &initial_dist, ROW_TOL)?;
        let observed = if signed_rewards {
            reward.iter().fold(0.0f64, |m, r| m.max(r.abs()))
        } else {
            reward.iter().fold(0.0f64, |m, &r| m.max(r))
        };
        let r_max = r_max.unwrap_or(observed);
        for (i, &r) in reward.iter().enumerate() {
            let bad = !r.is_finite()
                || if signed_rewards {
                    r.abs() > r_max
                } else {
                    r < 0.0 || r > r_max
                };
            if bad {
                return Err(Error::RewardOutOfRange {
                    state: i / n_actions,
                    action: i % n_actions,
                    value: r,
                    r_max,
                });
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            transition,
            reward,
            r_max,
            initial_dist,
            discount,
            state_coords: None,
            signed_rewards,
        })
    }

    /// Declares a reward bound larger than the observed maximum.
    pub fn with_r_max(mut self, r_max: f64) -> Result<Self> {
        let observed = if self.signed_rewards {
            self.reward.iter().fold(0.0f64, |m, r| m.max(r.abs()))
        } else {
            self.reward.iter().fold(0.0f64, |m, &r| m.max(r))
        };
        if !(r_max >= observed) {
            return Err(Error::InvalidParameter(format!(
                "r_max {r_max} below largest reward {observed}"
            )));
        }
        self.r_max = r_max;
        Ok(self)
    }

    /// Attaches a Euclidean embedding of the states.
    pub fn with_coords(mut self, coords: Vec<Vec<f64>>) -> Result<Self> {
        if coords.len() != self.n_states {
            return Err(Error::DimensionMismatch(
                "one coordinate vector per state".into(),
            ));
        }
        let dim = coords[0].len();
        if dim == 0 || coords.iter().any(|c| c.len() != dim) {
            return Err(Error::DimensionMismatch("ragged state coordinates".into()));
        }
        self.state_coords = Some(coords);
        Ok(self)
    }

    /// Replaces the initial distribution.
    pub fn with_initial(mut self, initial_dist: Vec<f64>) -> Result<Self> {
        if initial_dist.len() != self.n_states {
            return Err(Error::DimensionMismatch(
                "initial distribution length".into(),
            ));
        }
        check_distribution("initial distribution", &initial_dist, ROW_TOL)?;
        self.initial_dist = initial_dist;
        Ok(self)
    }

    /// Replaces the discount factor.
    pub fn with_discount(mut self, discount: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidParameter(format!(
                "discount {discount} not in [0,1)"
            )));
        }
        self.discount = discount;
        Ok(self)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
    pub fn discount(&self) -> f64 {
        self.discount
    }
    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn signed_rewards(&self) -> bool {
        self.signed_rewards
    }
    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }
    pub fn state_coords(&self) -> Option<&[Vec<f64>]> {
        self.state_coords.as_deref()
    }
    pub fn transitions(&self) -> &[f64] {
        &self.transition
    }
    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    /// Successor distribution `p(.|s,a)`.
    #[inline]
    pub fn p(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    /// Mean reward `r(s,a)`.
    #[inline]
    pub fn r(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    /// Pushes a state distribution one step forward under a fixed action.
    pub fn push(&self, dist: &[f64], a: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_states];
        for (s, &w) in dist.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, &q) in out.iter_mut().zip(self.p(s, a)) {
                *o += w * q;
            }
        }
        out
    }

    /// Markov chain `P_pi[s][s']` induced by a stationary policy.
    pub fn chain(&self, policy: &StationaryPolicy) -> Vec<f64> {
        let n = self.n_states;
        let mut m = vec![0.0; n * n];
        for s in 0..n {
            let row = &mut m[s * n..(s + 1) * n];
            for (a, &w) in policy.probs(s).iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (o, &q) in row.iter_mut().zip(self.p(s, a)) {
                    *o += w * q;
                }
            }
        }
        m
    }

    /// Expected one-step reward under a stationary policy.
    pub fn policy_reward(&self, policy: &StationaryPolicy) -> Vec<f64> {
        (0..self.n_states)
            .map(|s| {
                policy
                    .probs(s)
                    .iter()
                    .enumerate()
                    .map(|(a, &w)| w * self.r(s, a))
                    .sum()
            })
            .collect()
    }

    /// True when every action at `s` has the same reward and successor row.
    pub fn is_control_free(&self, s: usize) -> bool {
        (1..self.n_actions).all(|a| self.r(s, a) == self.r(s, 0) && self.p(s, a) == self.p(s, 0))
    }
}

/// Table of action distributions, one row per state.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryPolicy {
    n_actions: usize,
    probs: Vec<f64>,
}

impl StationaryPolicy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions || n_actions == 0 {
            return Err(Error::DimensionMismatch("policy table shape".into()));
        }
        for (s, row) in probs.chunks(n_actions).enumerate() {
            check_distribution(&format!("policy row {s}"), row, ROW_TOL)?;
        }
        Ok(Self { n_actions, probs })
    }

    /// Builds a policy whose rows are normalized versions of the given weights.
    pub fn from_weights(n_states: usize, n_actions: usize, weights: &[f64]) -> Result<Self> {
        if weights.len() != n_states * n_actions {
            return Err(Error::DimensionMismatch("policy table shape".into()));
        }
        let mut probs = weights.to_vec();
        for row in probs.chunks_mut(n_actions) {
            let z: f64 = row.iter().sum();
            if !(z > 0.0) {
                return Err(Error::InvalidDistribution {
                    what: "policy weights".into(),
                    detail: "row with no mass".into(),
                });
            }
            row.iter_mut().for_each(|w| *w /= z);
        }
        Self::new(n_states, n_actions, probs)
    }

    pub fn deterministic(actions: &[usize], n_actions: usize) -> Self {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            probs[s * n_actions + a] = 1.0;
        }
        Self { n_actions, probs }
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    /// Random stochastic policy with Dirichlet(1) rows.
    pub fn random<R: Rng + ?Sized>(n_states: usize, n_actions: usize, rng: &mut R) -> Self {
        let mut probs = Vec::with_capacity(n_states * n_actions);
        for _ in 0..n_states {
            let row = crate::util::dirichlet_ones(n_actions, rng);
            probs.extend(row);
        }
        Self { n_actions, probs }
    }

    pub fn n_states(&self) -> usize {
        self.probs.len() / self.n_actions
    }
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
    #[inline]
    pub fn probs(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }
    pub fn table(&self) -> &[f64] {
        &self.probs
    }

    /// Most likely action; ties go to the lowest index.
    pub fn mode(&self, s: usize) -> usize {
        crate::util::argmax(self.probs(s))
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        crate::util::sample_index(self.probs(s), rng)
    }
}
