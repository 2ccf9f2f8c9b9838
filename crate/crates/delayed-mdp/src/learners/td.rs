//! Temporal-difference learners: SARSA, Q-learning and delayed SARSA.
//!
//! dSARSA acts on the last observed state `s_t` but credits the reward of
//! the action executed there — the oldest action in the buffer — rather than
//! the action just selected. The first `delay` pairs execute the uniformly
//! drawn initial actions and are not updated.

use std::collections::VecDeque;

use rand::Rng;

use super::{LearningRate, QTable};
use crate::mdp::FiniteMdp;
use crate::util::sample_index;

/// Run length and step-size settings shared by the TD learners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    /// Number of environment transitions.
    pub steps: usize,
    pub learning_rate: LearningRate,
    /// Eligibility-trace decay; `0` disables traces.
    pub trace_lambda: f64,
    pub epsilon_floor: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            steps: 100_000,
            learning_rate: LearningRate::Visits { power: 0.6 },
            trace_lambda: 0.0,
            epsilon_floor: 0.05,
        }
    }
}

/// One SARSA-style update `(s, a, r, s', a')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdTuple {
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub s_next: usize,
    pub a_next: usize,
}

fn new_table(mdp: &FiniteMdp, sched: &Schedule) -> QTable {
    let mut q = QTable::new(mdp.n_states(), mdp.n_actions(), sched.learning_rate);
    q.epsilon_floor = sched.epsilon_floor;
    q
}

/// Applies `Q += alpha * delta * e` with accumulating traces (`e = 1_{(s,a)}` when `lambda = 0`).
fn td_apply(
    q: &mut QTable,
    trace: &mut [f64],
    lambda: f64,
    gamma: f64,
    s: usize,
    a: usize,
    delta: f64,
) {
    let alpha = q.alpha(s, a);
    let i = s * q.n_actions + a;
    q.updates[i] += 1;
    if lambda == 0.0 {
        q.values[i] += alpha * delta;
        return;
    }
    let decay = gamma * lambda;
    trace.iter_mut().for_each(|e| *e *= decay);
    trace[i] += 1.0;
    for (v, &e) in q.values.iter_mut().zip(trace.iter()) {
        *v += alpha * delta * e;
    }
}

/// Tabular SARSA on `mdp`.
pub fn sarsa_run<R: Rng + ?Sized>(mdp: &FiniteMdp, sched: &Schedule, rng: &mut R) -> QTable {
    let gamma = mdp.discount();
    let mut q = new_table(mdp, sched);
    let mut trace = vec![0.0; q.values.len()];
    let mut s = sample_index(mdp.initial_dist(), rng);
    let mut a = q.epsilon_greedy(s, rng);
    for _ in 0..sched.steps {
        let r = mdp.r(s, a);
        let s2 = sample_index(mdp.p(s, a), rng);
        let a2 = q.epsilon_greedy(s2, rng);
        let delta = r + gamma * q.q(s2, a2) - q.q(s, a);
        td_apply(&mut q, &mut trace, sched.trace_lambda, gamma, s, a, delta);
        s = s2;
        a = a2;
    }
    q
}

/// Tabular Q-learning on `mdp` with epsilon-greedy behaviour.
pub fn q_learning_run<R: Rng + ?Sized>(mdp: &FiniteMdp, sched: &Schedule, rng: &mut R) -> QTable {
    let gamma = mdp.discount();
    let mut q = new_table(mdp, sched);
    let mut s = sample_index(mdp.initial_dist(), rng);
    for _ in 0..sched.steps {
        let a = q.epsilon_greedy(s, rng);
        let r = mdp.r(s, a);
        let s2 = sample_index(mdp.p(s, a), rng);
        let alpha = q.alpha(s, a);
        let i = s * q.n_actions + a;
        q.updates[i] += 1;
        q.values[i] += alpha * (r + gamma * q.max(s2) - q.values[i]);
        s = s2;
    }
    q
}

/// Pending actions and the last complete `(state, executed action, reward)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayBuffers {
    pub delay: usize,
    /// Selected but not yet executed actions, oldest first.
    pub pending: VecDeque<usize>,
    /// Last pair `(s, a)` and its index in the stream.
    prev: Option<(usize, usize, usize)>,
    pairs: usize,
    trace: Vec<f64>,
    lambda: f64,
}

impl DelayBuffers {
    /// Buffers pre-filled with the initial actions (`initial.len()` must equal `delay`).
    pub fn new(initial: Vec<usize>, q: &QTable, lambda: f64) -> Self {
        Self {
            delay: initial.len(),
            pending: initial.into(),
            prev: None,
            pairs: 0,
            trace: vec![0.0; q.values.len()],
            lambda,
        }
    }
}

/// Feeds one observation to dSARSA and returns the action to execute now
/// plus the applied update, if any.
///
/// `observed` is the newly observed state, `reward` the reward of the
/// previously executed pair, `new_action` the action just selected. The
/// oldest pending action is the one executed at `observed`; the previous pair
/// receives the SARSA target `reward + gamma Q(observed, executed)`. Pairs
/// that executed an initial action are skipped.
pub fn dsarsa_step(
    q: &mut QTable,
    buffers: &mut DelayBuffers,
    observed: usize,
    reward: f64,
    new_action: usize,
    gamma: f64,
) -> (usize, Option<TdTuple>) {
    buffers.pending.push_back(new_action);
    let executed = buffers
        .pending
        .pop_front()
        .expect("buffer holds the new action");
    let mut applied = None;
    if let Some((s, a, idx)) = buffers.prev {
        if idx >= buffers.delay {
            let delta = reward + gamma * q.q(observed, executed) - q.q(s, a);
            td_apply(q, &mut buffers.trace, buffers.lambda, gamma, s, a, delta);
            applied = Some(TdTuple {
                s,
                a,
                r: reward,
                s_next: observed,
                a_next: executed,
            });
        }
    }
    buffers.prev = Some((observed, executed, buffers.pairs));
    buffers.pairs += 1;
    (executed, applied)
}

/// dSARSA with observation delay `delay` on `mdp`; the first `delay` actions
/// are uniform. With `delay = 0` the random stream is consumed exactly as by
/// [`sarsa_run`], so both return identical tables.
pub fn dsarsa_run<R: Rng + ?Sized>(
    mdp: &FiniteMdp,
    delay: usize,
    sched: &Schedule,
    rng: &mut R,
) -> QTable {
    let gamma = mdp.discount();
    let na = mdp.n_actions();
    let mut q = new_table(mdp, sched);
    let mut s = sample_index(mdp.initial_dist(), rng);
    let initial: Vec<usize> = (0..delay).map(|_| rng.random_range(0..na)).collect();
    let mut buffers = DelayBuffers::new(initial, &q, sched.trace_lambda);
    let mut reward = 0.0;
    for _ in 0..sched.steps {
        let a = q.epsilon_greedy(s, rng);
        let (executed, _) = dsarsa_step(&mut q, &mut buffers, s, reward, a, gamma);
        reward = mdp.r(s, executed);
        s = sample_index(mdp.p(s, executed), rng);
    }
    let a = q.epsilon_greedy(s, rng);
    dsarsa_step(&mut q, &mut buffers, s, reward, a, gamma);
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{maze_3x3, random_mdp, MazeConfig};
    use crate::mdp::{policy_evaluation_discounted, value_iteration};
    use crate::util::trial_rng;

    #[test]
    fn zero_delay_dsarsa_is_bit_identical_to_sarsa() {
        let mdp = random_mdp(4, 3, 0.2, &mut trial_rng(91, 0)).unwrap();
        for lambda in [0.0, 0.9] {
            let sched = Schedule {
                steps: 5_000,
                trace_lambda: lambda,
                ..Default::default()
            };
            let a = sarsa_run(&mdp, &sched, &mut trial_rng(92, 1));
            let b = dsarsa_run(&mdp, 0, &sched, &mut trial_rng(92, 1));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn hand_computed_delayed_updates() {
        // two states; action 0 stays, action 1 switches; r(s,a) = 2s + a
        let mut q = QTable::new(2, 2, LearningRate::Constant(0.5));
        let mut buf = DelayBuffers::new(vec![1], &q, 0.0);
        let gamma = 0.9;
        let step = |s: usize, a: usize| if a == 0 { s } else { 1 - s };
        let reward = |s: usize, a: usize| (2 * s + a) as f64;
        let (mut s, mut r) = (0, 0.0);
        let mut updates = Vec::new();
        for new_action in [0, 1, 0, 1, 0, 0] {
            let (exec, up) = dsarsa_step(&mut q, &mut buf, s, r, new_action, gamma);
            updates.extend(up);
            r = reward(s, exec);
            s = step(s, exec);
        }
        assert_eq!(updates.len(), 4);
        assert_eq!(q.values, vec![0.0, 0.95, 1.0, 1.5]);
    }

    #[test]
    fn zero_discount_learns_rewards() {
        let mdp = random_mdp(3, 2, 0.0, &mut trial_rng(93, 0))
            .unwrap()
            .with_discount(0.0)
            .unwrap();
        let q = q_learning_run(
            &mdp,
            &Schedule {
                steps: 20_000,
                ..Default::default()
            },
            &mut trial_rng(93, 1),
        );
        for (v, r) in q.values.iter().zip(mdp.rewards()) {
            assert!((v - r).abs() < 1e-12);
        }
    }

    #[test]
    fn bandit_values_converge_to_analytic() {
        let gamma = 0.5;
        let mdp = FiniteMdp::new(1, 2, vec![1.0, 1.0], vec![0.3, 0.8], vec![1.0], gamma).unwrap();
        let q = q_learning_run(
            &mdp,
            &Schedule {
                steps: 50_000,
                ..Default::default()
            },
            &mut trial_rng(94, 0),
        );
        let v = 0.8 / (1.0 - gamma);
        assert!(
            (q.q(0, 0) - (0.3 + gamma * v)).abs() < 0.01,
            "{:?}",
            q.values
        );
        assert!((q.q(0, 1) - v).abs() < 0.01);
    }

    #[test]
    fn undelayed_maze_greedy_policy_is_optimal() {
        let maze = maze_3x3(&MazeConfig::default())
            .unwrap()
            .with_discount(0.9)
            .unwrap();
        let q = q_learning_run(
            &maze,
            &Schedule {
                steps: 100_000,
                ..Default::default()
            },
            &mut trial_rng(95, 0),
        );
        let (v_opt, _) = value_iteration(&maze, 1e-12).unwrap();
        let (v, _) = policy_evaluation_discounted(&maze, &q.greedy_policy()).unwrap();
        for (a, b) in v.iter().zip(&v_opt) {
            assert!((a - b).abs() < 1e-9, "{v:?} vs {v_opt:?}");
        }
    }

    #[test]
    fn delayed_maze_policy_reaches_goal() {
        let cfg = MazeConfig::default();
        let maze = maze_3x3(&cfg).unwrap().with_discount(0.9).unwrap();
        let q = dsarsa_run(
            &maze,
            1,
            &Schedule {
                steps: 100_000,
                ..Default::default()
            },
            &mut trial_rng(96, 0),
        );
        let mut rng = trial_rng(96, 1);
        let runs = 1000;
        let mut success = 0;
        for _ in 0..runs {
            // observe s_t, act greedily; the previous choice executes now
            let mut s = cfg.start;
            let mut pending = rng.random_range(0..4);
            for _ in 0..20 {
                let next = q.greedy(s);
                let s2 = sample_index(maze.p(s, pending), &mut rng);
                if s2 == cfg.goal {
                    success += 1;
                    break;
                }
                s = s2;
                pending = next;
            }
        }
        assert!(success as f64 >= 0.9 * runs as f64, "{success}/{runs}");
    }
}
