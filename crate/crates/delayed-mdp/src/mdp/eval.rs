//! Exact evaluation and optimal control of tabular MDPs.

use super::graph::{chain_graph, components, recurrent_classes};
use super::{FiniteMdp, StationaryPolicy};
use crate::error::{Error, Result};
use crate::util::{argmax, argmin, dot, solve, solve_transposed};

/// Default iteration cap for value iteration.
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// `Q(s,a) = r(s,a) + gamma * sum_s' p(s'|s,a) v(s')`, row-major `[s][a]`.
pub fn q_values(mdp: &FiniteMdp, v: &[f64]) -> Vec<f64> {
    let g = mdp.discount();
    let mut q = Vec::with_capacity(mdp.n_states() * mdp.n_actions());
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            q.push(mdp.r(s, a) + g * dot(mdp.p(s, a), v));
        }
    }
    q
}

fn bellman_iterate(
    mdp: &FiniteMdp,
    tol: f64,
    max_iter: usize,
    pick: fn(&[f64]) -> usize,
) -> Result<(Vec<f64>, StationaryPolicy)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tol} must be positive"
        )));
    }
    let na = mdp.n_actions();
    let mut v = vec![0.0; mdp.n_states()];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let q = q_values(mdp, &v);
        let next: Vec<f64> = q.chunks(na).map(|row| row[pick(row)]).collect();
        residual = crate::util::max_abs_diff(&next, &v);
        v = next;
        if residual <= tol {
            let q = q_values(mdp, &v);
            let actions: Vec<usize> = q.chunks(na).map(pick).collect();
            return Ok((v, StationaryPolicy::deterministic(&actions, na)));
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual,
    })
}

/// Optimal discounted values and a greedy policy (ties to the lowest action).
///
/// Stops once successive iterates differ by at most `tol`; the returned
/// values then have Bellman residual at most `gamma * tol`.
pub fn value_iteration(mdp: &FiniteMdp, tol: f64) -> Result<(Vec<f64>, StationaryPolicy)> {
    value_iteration_with(mdp, tol, DEFAULT_MAX_ITER)
}

/// [`value_iteration`] with an explicit iteration cap.
pub fn value_iteration_with(
    mdp: &FiniteMdp,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, StationaryPolicy)> {
    bellman_iterate(mdp, tol, max_iter, argmax)
}

/// Pessimal counterpart of [`value_iteration`]: minimal discounted values.
pub fn worst_value_iteration(mdp: &FiniteMdp, tol: f64) -> Result<(Vec<f64>, StationaryPolicy)> {
    bellman_iterate(mdp, tol, DEFAULT_MAX_ITER, argmin)
}

/// Exact discounted values by a direct linear solve; also returns `d0 . V`.
pub fn policy_evaluation_discounted(
    mdp: &FiniteMdp,
    policy: &StationaryPolicy,
) -> Result<(Vec<f64>, f64)> {
    check_policy(mdp, policy)?;
    let n = mdp.n_states();
    let g = mdp.discount();
    let chain = mdp.chain(policy);
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = f64::from(u8::from(i == j)) - g * chain[i * n + j];
        }
    }
    let v = solve(n, &a, &mdp.policy_reward(policy))?;
    let ret = dot(mdp.initial_dist(), &v);
    Ok((v, ret))
}

pub(crate) fn check_policy(mdp: &FiniteMdp, policy: &StationaryPolicy) -> Result<()> {
    if policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions() {
        return Err(Error::DimensionMismatch(format!(
            "policy is {}x{}, MDP is {}x{}",
            policy.n_states(),
            policy.n_actions(),
            mdp.n_states(),
            mdp.n_actions()
        )));
    }
    Ok(())
}

/// Stationary distribution of the chain restricted to a closed class.
fn class_stationary(n: usize, chain: &[f64], class: &[usize]) -> Result<Vec<f64>> {
    let m = class.len();
    // (I - P_CC)^T mu = 0 with the last equation replaced by sum(mu) = 1.
    let mut a = vec![0.0; m * m];
    for (i, &si) in class.iter().enumerate() {
        for (j, &sj) in class.iter().enumerate() {
            // row i of (I - P)^T is column i of (I - P)
            a[i * m + j] = f64::from(u8::from(i == j)) - chain[sj * n + si];
        }
    }
    for j in 0..m {
        a[(m - 1) * m + j] = 1.0;
    }
    let mut b = vec![0.0; m];
    b[m - 1] = 1.0;
    solve(m, &a, &b)
}

/// Per-state long-run average reward for an arbitrary (possibly multichain) chain.
///
/// Each closed class gets its stationary gain; transient states average the
/// class gains by their absorption probabilities.
pub fn multichain_gain(mdp: &FiniteMdp, policy: &StationaryPolicy) -> Result<Vec<f64>> {
    check_policy(mdp, policy)?;
    let n = mdp.n_states();
    let chain = mdp.chain(policy);
    let reward = mdp.policy_reward(policy);
    chain_gain(n, &chain, &reward)
}

/// Long-run average reward from the initial distribution, `d0 . g`.
///
/// Only the states the policy can reach from the support of `d0` are
/// evaluated; that set is closed, so their gains are unchanged.
pub fn gain_from_initial(mdp: &FiniteMdp, policy: &StationaryPolicy) -> Result<f64> {
    check_policy(mdp, policy)?;
    let (n, na) = (mdp.n_states(), mdp.n_actions());
    let d0 = mdp.initial_dist();
    let mut local = vec![usize::MAX; n];
    let mut order: Vec<usize> = (0..n).filter(|&s| d0[s] > 0.0).collect();
    order.iter().enumerate().for_each(|(i, &s)| local[s] = i);
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut head = 0;
    while head < order.len() {
        let s = order[head];
        head += 1;
        let mut row: Vec<(usize, f64)> = Vec::new();
        for a in 0..na {
            let w = policy.probs(s)[a];
            if w == 0.0 {
                continue;
            }
            for (t, &p) in mdp.p(s, a).iter().enumerate() {
                if p > 0.0 {
                    if local[t] == usize::MAX {
                        local[t] = order.len();
                        order.push(t);
                    }
                    match row.iter_mut().find(|(j, _)| *j == t) {
                        Some(e) => e.1 += w * p,
                        None => row.push((t, w * p)),
                    }
                }
            }
        }
        rows.push(row);
    }
    let m = order.len();
    let mut chain = vec![0.0; m * m];
    for (i, row) in rows.iter().enumerate() {
        for &(t, p) in row {
            chain[i * m + local[t]] = p;
        }
    }
    let reward: Vec<f64> = order
        .iter()
        .map(|&s| dot(policy.probs(s), &mdp.rewards()[s * na..(s + 1) * na]))
        .collect();
    let gain = chain_gain(m, &chain, &reward)?;
    Ok(order.iter().zip(&gain).map(|(&s, g)| d0[s] * g).sum())
}

/// Per-state gain of a chain given by its row-major matrix and reward vector.
pub fn chain_gain(n: usize, chain: &[f64], reward: &[f64]) -> Result<Vec<f64>> {
    let adj = chain_graph(n, chain);
    let comps = components(&adj);
    let mut comp_of = vec![0usize; n];
    for (k, comp) in comps.iter().enumerate() {
        comp.iter().for_each(|&s| comp_of[s] = k);
    }
    let mut gain = vec![f64::NAN; n];
    // Sinks first: every state a component can move to outside itself is solved.
    for (k, comp) in comps.iter().enumerate() {
        let closed = comp
            .iter()
            .all(|&s| adj[s].iter().all(|&t| comp_of[t] == k));
        if closed {
            let g = if let [s] = comp[..] {
                reward[s]
            } else {
                let mu = class_stationary(n, chain, comp)?;
                comp.iter().zip(&mu).map(|(&s, &w)| w * reward[s]).sum()
            };
            comp.iter().for_each(|&s| gain[s] = g);
            continue;
        }
        // g_C = P_CC g_C + P_C,out g_out
        let outflow = |s: usize| -> f64 {
            adj[s]
                .iter()
                .filter(|&&t| comp_of[t] != k)
                .map(|&t| chain[s * n + t] * gain[t])
                .sum()
        };
        if let [s] = comp[..] {
            gain[s] = outflow(s) / (1.0 - chain[s * n + s]);
            continue;
        }
        let m = comp.len();
        let mut a = vec![0.0; m * m];
        for (i, &s) in comp.iter().enumerate() {
            for (j, &t) in comp.iter().enumerate() {
                a[i * m + j] = f64::from(u8::from(i == j)) - chain[s * n + t];
            }
        }
        let b: Vec<f64> = comp.iter().map(|&s| outflow(s)).collect();
        let x = solve(m, &a, &b)?;
        comp.iter().zip(x).for_each(|(&s, v)| gain[s] = v);
    }
    Ok(gain)
}

/// Gain and bias of a unichain policy; multichain chains are rejected.
pub fn average_reward_evaluation(
    mdp: &FiniteMdp,
    policy: &StationaryPolicy,
) -> Result<(f64, Vec<f64>)> {
    check_policy(mdp, policy)?;
    let n = mdp.n_states();
    let chain = mdp.chain(policy);
    let classes = recurrent_classes(n, &chain);
    if classes.len() != 1 {
        return Err(Error::Multichain { classes });
    }
    let mu = stationary_full(n, &chain, &classes[0])?;
    let r = mdp.policy_reward(policy);
    let gain = dot(&mu, &r);
    // (I - P + 1 mu^T) h = r - g 1  gives the bias with mu . h = 0.
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = f64::from(u8::from(i == j)) - chain[i * n + j] + mu[j];
        }
    }
    let rhs: Vec<f64> = r.iter().map(|x| x - gain).collect();
    let bias = solve(n, &a, &rhs)?;
    Ok((gain, bias))
}

fn stationary_full(n: usize, chain: &[f64], class: &[usize]) -> Result<Vec<f64>> {
    let mu_c = class_stationary(n, chain, class)?;
    let mut mu = vec![0.0; n];
    for (&s, &w) in class.iter().zip(&mu_c) {
        mu[s] = w;
    }
    Ok(mu)
}

/// Optimal gain of a communicating MDP by relative value iteration.
///
/// Uses the aperiodicity transform `P <- tau P + (1 - tau) I`, which keeps
/// every stationary policy's gain, and stops once the span of the Bellman
/// increment drops below `tol`.
pub fn optimal_gain(mdp: &FiniteMdp, tol: f64) -> Result<(f64, StationaryPolicy)> {
    let tau = 0.5;
    let n = mdp.n_states();
    let na = mdp.n_actions();
    let mut h = vec![0.0; n];
    for _ in 0..DEFAULT_MAX_ITER {
        let mut next = vec![0.0; n];
        for (s, nx) in next.iter_mut().enumerate() {
            *nx = (0..na)
                .map(|a| mdp.r(s, a) + tau * dot(mdp.p(s, a), &h) + (1.0 - tau) * h[s])
                .fold(f64::NEG_INFINITY, f64::max);
        }
        let diff: Vec<f64> = next.iter().zip(&h).map(|(x, y)| x - y).collect();
        let hi = diff.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = diff.iter().cloned().fold(f64::INFINITY, f64::min);
        let base = next[0];
        h = next.iter().map(|x| x - base).collect();
        if hi - lo < tol {
            let actions: Vec<usize> = (0..n)
                .map(|s| {
                    let q: Vec<f64> = (0..na)
                        .map(|a| mdp.r(s, a) + tau * dot(mdp.p(s, a), &h))
                        .collect();
                    argmax(&q)
                })
                .collect();
            return Ok((
                0.5 * (hi + lo),
                StationaryPolicy::deterministic(&actions, na),
            ));
        }
    }
    Err(Error::NonConvergence {
        iterations: DEFAULT_MAX_ITER,
        residual: f64::NAN,
    })
}

/// Which occupancy measure to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OccupancyKind {
    Discounted,
    Average,
}

/// Normalized state-action occupancy, row-major `[s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyDistribution {
    pub kind: OccupancyKind,
    pub n_actions: usize,
    pub weights: Vec<f64>,
}

impl OccupancyDistribution {
    pub fn state_marginal(&self) -> Vec<f64> {
        self.weights
            .chunks(self.n_actions)
            .map(|r| r.iter().sum())
            .collect()
    }
}

/// Discounted occupancy from the initial distribution, or the stationary
/// state-action distribution of a unichain policy.
pub fn occupancy(
    mdp: &FiniteMdp,
    policy: &StationaryPolicy,
    kind: OccupancyKind,
) -> Result<OccupancyDistribution> {
    check_policy(mdp, policy)?;
    let n = mdp.n_states();
    let chain = mdp.chain(policy);
    let state = match kind {
        OccupancyKind::Discounted => {
            let g = mdp.discount();
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    a[i * n + j] = f64::from(u8::from(i == j)) - g * chain[i * n + j];
                }
            }
            let b: Vec<f64> = mdp.initial_dist().iter().map(|x| (1.0 - g) * x).collect();
            solve_transposed(n, &a, &b)?
        }
        OccupancyKind::Average => {
            let classes = recurrent_classes(n, &chain);
            if classes.len() != 1 {
                return Err(Error::Multichain { classes });
            }
            stationary_full(n, &chain, &classes[0])?
        }
    };
    let na = mdp.n_actions();
    let mut weights = Vec::with_capacity(n * na);
    for (s, &w) in state.iter().enumerate() {
        for &p in policy.probs(s) {
            weights.push(w * p);
        }
    }
    Ok(OccupancyDistribution {
        kind,
        n_actions: na,
        weights,
    })
}

/// Discounted occupancy of states starting from a given state distribution.
pub fn discounted_state_occupancy(
    n: usize,
    chain: &[f64],
    discount: f64,
    start: &[f64],
) -> Result<Vec<f64>> {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = f64::from(u8::from(i == j)) - discount * chain[i * n + j];
        }
    }
    let b: Vec<f64> = start.iter().map(|x| (1.0 - discount) * x).collect();
    solve_transposed(n, &a, &b)
}
