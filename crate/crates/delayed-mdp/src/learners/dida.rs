//! Delayed imitation of an undelayed expert.
//!
//! A trajectory of the undelayed process, generated by any behaviour, also
//! describes the delayed process: at time `t` the augmented state is
//! `x_t = (s_t, a_{t+1}..a_{t+d})` while the true current state is `s_{t+d}`.
//! Labelling `x_t` with the expert's action at `s_{t+d}` and fitting
//! conditional frequencies recovers the belief mixture of the expert.
//!
//! Policies are indexed as the constant-delay buffer layout
//! `s * A^d + code`, oldest action most significant.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{check_budget, FiniteMdp, StationaryPolicy, DEFAULT_ENTRY_BUDGET};
use crate::util::sample_index;

/// Imitation pairs `(augmented state index, expert action)`, kept per
/// iteration and evicted oldest-iteration first.
#[derive(Debug, Clone, PartialEq)]
pub struct ImitationDataset {
    pub capacity: usize,
    iterations: VecDeque<Vec<(usize, usize)>>,
}

impl ImitationDataset {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            iterations: VecDeque::new(),
        }
    }

    /// Appends one iteration's pairs, evicting the oldest iteration beyond capacity.
    pub fn push_iteration(&mut self, pairs: Vec<(usize, usize)>) {
        self.iterations.push_back(pairs);
        while self.iterations.len() > self.capacity {
            self.iterations.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.iterations.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn retained_iterations(&self) -> usize {
        self.iterations.len()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.iterations.iter().flatten().copied()
    }

    /// Empirical conditional action frequencies; unseen states fall back to
    /// uniform. Returns the policy and the number of unseen states.
    pub fn fit(&self, n_states: usize, n_actions: usize) -> (StationaryPolicy, usize) {
        let mut counts = vec![0.0; n_states * n_actions];
        for (x, a) in self.pairs() {
            counts[x * n_actions + a] += 1.0;
        }
        let mut empty = 0;
        for row in counts.chunks_mut(n_actions) {
            let z: f64 = row.iter().sum();
            if z == 0.0 {
                empty += 1;
                row.iter_mut().for_each(|p| *p = 1.0 / n_actions as f64);
            } else {
                row.iter_mut().for_each(|p| *p /= z);
            }
        }
        let policy = StationaryPolicy::new(n_states, n_actions, counts).expect("normalized rows");
        (policy, empty)
    }

    /// Squared-error fit for 1-D action embeddings: the mean embedding of the
    /// labels seen in each state (`None` when unseen).
    pub fn fit_mean_embedding(&self, n_states: usize, embedding: &[f64]) -> Vec<Option<f64>> {
        let mut sums = vec![(0.0, 0usize); n_states];
        for (x, a) in self.pairs() {
            sums[x].0 += embedding[a];
            sums[x].1 += 1;
        }
        sums.into_iter()
            .map(|(s, n)| (n > 0).then(|| s / n as f64))
            .collect()
    }
}

/// Sampling-loop settings.
#[derive(Debug, Clone, PartialEq)]
pub struct DidaConfig {
    pub iterations: usize,
    pub samples_per_iter: usize,
    /// Decisions per episode before restarting from the initial distribution.
    pub episode_len: usize,
    /// Retained iterations in the dataset.
    pub capacity: usize,
    /// Expert-behaviour probability per iteration; missing entries are 0.
    pub beta: Vec<f64>,
}

impl Default for DidaConfig {
    fn default() -> Self {
        Self {
            iterations: 10,
            samples_per_iter: 10_000,
            episode_len: 50,
            capacity: 10,
            beta: vec![1.0],
        }
    }
}

/// Learned delayed policy with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DidaResult {
    pub policy: StationaryPolicy,
    /// Augmented states never labelled (uniform fallback).
    pub empty_cells: usize,
    pub dataset_len: usize,
}

fn layout_size(mdp: &FiniteMdp, d: usize) -> Result<usize> {
    let block = mdp
        .n_actions()
        .checked_pow(d as u32)
        .ok_or(Error::BudgetExceeded {
            entries: u128::MAX,
            budget: DEFAULT_ENTRY_BUDGET,
        })?;
    let n = mdp.n_states() * block;
    check_budget(n as u128 * mdp.n_actions() as u128, DEFAULT_ENTRY_BUDGET)?;
    Ok(n)
}

fn check_expert(mdp: &FiniteMdp, expert: &StationaryPolicy) -> Result<()> {
    if expert.n_states() != mdp.n_states() || expert.n_actions() != mdp.n_actions() {
        return Err(Error::DimensionMismatch(format!(
            "expert is {}x{}, MDP is {}x{}",
            expert.n_states(),
            expert.n_actions(),
            mdp.n_states(),
            mdp.n_actions()
        )));
    }
    Ok(())
}

/// Belief mixture of the expert over every buffer-layout state.
pub fn dida_exact(
    mdp: &FiniteMdp,
    d: usize,
    expert: &StationaryPolicy,
) -> Result<StationaryPolicy> {
    check_expert(mdp, expert)?;
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let n = layout_size(mdp, d)?;
    // beliefs of (s, a_1..a_k) at index s * A^k + code, grown one action at a time
    let mut level = vec![0.0; ns * ns];
    for s in 0..ns {
        level[s * ns + s] = 1.0;
    }
    for _ in 0..d {
        let mut next = Vec::with_capacity(level.len() * na);
        for b in level.chunks(ns) {
            for a in 0..na {
                next.extend(mdp.push(b, a));
            }
        }
        level = next;
    }
    let mut probs = vec![0.0; n * na];
    for (row, b) in probs.chunks_mut(na).zip(level.chunks(ns)) {
        for (s, &w) in b.iter().enumerate() {
            if w > 0.0 {
                for (o, &p) in row.iter_mut().zip(expert.probs(s)) {
                    *o += w * p;
                }
            }
        }
        let z: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= z);
    }
    StationaryPolicy::new(n, na, probs)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Behaviour {
    /// Expert acts on the true current state; label recorded immediately.
    Undelayed,
    /// Expert acts on the last observed state; label recorded once revealed.
    Memoryless,
}

fn encode(s: usize, buffer: &VecDeque<usize>, na: usize) -> usize {
    buffer.iter().fold(s, |acc, &a| acc * na + a)
}

/// One iteration of imitation pairs under the mixture behaviour.
#[allow(clippy::too_many_arguments)]
fn collect<R: Rng + ?Sized>(
    mdp: &FiniteMdp,
    d: usize,
    expert: &StationaryPolicy,
    learner: &StationaryPolicy,
    beta: f64,
    cfg: &DidaConfig,
    behaviour: Behaviour,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let na = mdp.n_actions();
    let mut pairs = Vec::with_capacity(cfg.samples_per_iter);
    while pairs.len() < cfg.samples_per_iter {
        // states[k] = s_{t+k}: the observed state first, the true current state last
        let mut states = VecDeque::with_capacity(d + 1);
        let mut buffer: VecDeque<usize> = (0..d).map(|_| rng.random_range(0..na)).collect();
        let s0 = sample_index(mdp.initial_dist(), rng);
        states.push_back(s0);
        for &a in &buffer {
            let last = *states.back().expect("non-empty");
            states.push_back(sample_index(mdp.p(last, a), rng));
        }
        // x indices awaiting the reveal of their true state
        let mut deferred: VecDeque<usize> = VecDeque::new();
        for _ in 0..cfg.episode_len {
            if pairs.len() >= cfg.samples_per_iter {
                break;
            }
            let observed = states[0];
            let current = states[d];
            let x = encode(observed, &buffer, na);
            let a = match behaviour {
                Behaviour::Undelayed => {
                    let label = expert.sample(current, rng);
                    pairs.push((x, label));
                    if rng.random::<f64>() < beta {
                        label
                    } else {
                        learner.sample(x, rng)
                    }
                }
                Behaviour::Memoryless => {
                    // the state observed now is the true state of the decision d steps ago
                    deferred.push_back(x);
                    if deferred.len() > d {
                        let old = deferred.pop_front().expect("non-empty");
                        pairs.push((old, expert.sample(observed, rng)));
                    }
                    if rng.random::<f64>() < beta {
                        expert.sample(observed, rng)
                    } else {
                        learner.sample(x, rng)
                    }
                }
            };
            let next = sample_index(mdp.p(current, a), rng);
            states.pop_front();
            states.push_back(next);
            if d > 0 {
                buffer.pop_front();
                buffer.push_back(a);
            }
        }
    }
    pairs
}

fn run_loop<R: Rng + ?Sized>(
    mdp: &FiniteMdp,
    d: usize,
    expert: &StationaryPolicy,
    cfg: &DidaConfig,
    behaviour: Behaviour,
    rng: &mut R,
) -> Result<DidaResult> {
    check_expert(mdp, expert)?;
    if cfg.iterations == 0 || cfg.samples_per_iter == 0 || cfg.episode_len == 0 {
        return Err(Error::InvalidParameter(
            "iterations, samples and episode length must be positive".into(),
        ));
    }
    if behaviour == Behaviour::Memoryless && cfg.episode_len <= d {
        return Err(Error::InvalidParameter(format!(
            "episode length {} leaves no revealed labels at delay {d}",
            cfg.episode_len
        )));
    }
    let na = mdp.n_actions();
    let n = layout_size(mdp, d)?;
    let mut dataset = ImitationDataset::new(cfg.capacity);
    let mut learner = StationaryPolicy::uniform(n, na);
    let mut empty = n;
    for i in 0..cfg.iterations {
        let beta = cfg.beta.get(i).copied().unwrap_or(0.0);
        let pairs = collect(mdp, d, expert, &learner, beta, cfg, behaviour, rng);
        dataset.push_iteration(pairs);
        (learner, empty) = dataset.fit(n, na);
    }
    Ok(DidaResult {
        policy: learner,
        empty_cells: empty,
        dataset_len: dataset.len(),
    })
}

/// DAgger-style delayed imitation with the expert acting on the true state.
pub fn dida_sampled<R: Rng + ?Sized>(
    mdp: &FiniteMdp,
    d: usize,
    expert: &StationaryPolicy,
    cfg: &DidaConfig,
    rng: &mut R,
) -> Result<DidaResult> {
    run_loop(mdp, d, expert, cfg, Behaviour::Undelayed, rng)
}

/// Delayed imitation where the behaviour expert only sees the last observed
/// state; labels arrive `d` steps late and the last `d` decisions of each
/// episode stay unlabelled.
pub fn mdida_sampled<R: Rng + ?Sized>(
    mdp: &FiniteMdp,
    d: usize,
    expert: &StationaryPolicy,
    cfg: &DidaConfig,
    rng: &mut R,
) -> Result<DidaResult> {
    run_loop(mdp, d, expert, cfg, Behaviour::Memoryless, rng)
}
