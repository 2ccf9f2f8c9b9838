//! Graph structure of MDPs and Markov chains: recurrent classes,
//! reachability, communication and diameter.

use super::{FiniteMdp, StationaryPolicy};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rayon::prelude::*;
use std::collections::VecDeque;

/// Adjacency lists of a directed graph on `0..n`.
pub type Adjacency = Vec<Vec<usize>>;

/// Strongly connected components, sinks first (reverse topological order).
pub fn components(adj: &Adjacency) -> Vec<Vec<usize>> {
    let mut g = DiGraph::<(), ()>::with_capacity(adj.len(), 0);
    let nodes: Vec<_> = (0..adj.len()).map(|_| g.add_node(())).collect();
    for (u, outs) in adj.iter().enumerate() {
        for &v in outs {
            g.add_edge(nodes[u], nodes[v], ());
        }
    }
    tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
            c.sort_unstable();
            c
        })
        .collect()
}

/// Support graph of a row-major `n x n` stochastic matrix.
pub fn chain_graph(n: usize, chain: &[f64]) -> Adjacency {
    (0..n)
        .map(|s| (0..n).filter(|&t| chain[s * n + t] > 0.0).collect())
        .collect()
}

/// Closed communicating classes of a chain, sorted by smallest member.
pub fn recurrent_classes(n: usize, chain: &[f64]) -> Vec<Vec<usize>> {
    let adj = chain_graph(n, chain);
    let comps = components(&adj);
    let mut comp_of = vec![0usize; n];
    for (k, c) in comps.iter().enumerate() {
        for &s in c {
            comp_of[s] = k;
        }
    }
    let mut classes: Vec<Vec<usize>> = comps
        .iter()
        .enumerate()
        .filter(|(k, c)| c.iter().all(|&s| adj[s].iter().all(|&t| comp_of[t] == *k)))
        .map(|(_, c)| c.clone())
        .collect();
    classes.sort_by_key(|c| c[0]);
    classes
}

/// Recurrent classes of the chain induced by `policy`.
pub fn policy_recurrent_classes(mdp: &FiniteMdp, policy: &StationaryPolicy) -> Vec<Vec<usize>> {
    recurrent_classes(mdp.n_states(), &mdp.chain(policy))
}

/// Edge `x -> y` whenever some action moves `x` to `y` with positive probability.
pub fn support_graph(mdp: &FiniteMdp) -> Adjacency {
    let n = mdp.n_states();
    (0..n)
        .map(|s| {
            let mut outs: Vec<usize> = (0..n)
                .filter(|&t| (0..mdp.n_actions()).any(|a| mdp.p(s, a)[t] > 0.0))
                .collect();
            outs.dedup();
            outs
        })
        .collect()
}

/// States reachable from the support of the initial distribution under some action sequence.
pub fn reachable_from_initial(mdp: &FiniteMdp) -> Vec<bool> {
    let adj = support_graph(mdp);
    let starts: Vec<usize> = (0..mdp.n_states())
        .filter(|&s| mdp.initial_dist()[s] > 0.0)
        .collect();
    reachable(&adj, &starts)
}

/// Breadth-first reachability from a set of roots.
pub fn reachable(adj: &Adjacency, roots: &[usize]) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &r in roots {
        if !seen[r] {
            seen[r] = true;
            queue.push_back(r);
        }
    }
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Strong connectivity of a directed graph.
pub fn strongly_connected(adj: &Adjacency) -> bool {
    components(adj).len() == 1
}

/// Communicating MDP: every state reaches every other under some policy.
pub fn is_communicating(mdp: &FiniteMdp) -> bool {
    strongly_connected(&support_graph(mdp))
}

/// Diameter: max over ordered pairs of the minimal expected hitting time.
///
/// Computed per target by value iteration on the stochastic shortest-path
/// problem; returns `f64::INFINITY` when some target is unreachable.
pub fn diameter(mdp: &FiniteMdp, tol: f64) -> f64 {
    let n = mdp.n_states();
    // Every state must reach every target, else the diameter is infinite.
    if !is_communicating(mdp) {
        return f64::INFINITY;
    }
    let sparse: Vec<Vec<(usize, f64)>> = (0..n * mdp.n_actions())
        .map(|k| {
            let row = mdp.p(k / mdp.n_actions(), k % mdp.n_actions());
            row.iter()
                .enumerate()
                .filter(|(_, p)| **p > 0.0)
                .map(|(j, p)| (j, *p))
                .collect()
        })
        .collect();
    (0..n)
        .into_par_iter()
        .map(|target| {
            let mut h = vec![0.0f64; n];
            loop {
                let mut delta: f64 = 0.0;
                for s in 0..n {
                    if s == target {
                        continue;
                    }
                    let best = sparse[s * mdp.n_actions()..(s + 1) * mdp.n_actions()]
                        .iter()
                        .map(|row| 1.0 + row.iter().map(|(j, p)| p * h[*j]).sum::<f64>())
                        .fold(f64::INFINITY, f64::min);
                    delta = delta.max((best - h[s]).abs());
                    h[s] = best;
                }
                if delta < tol {
                    break;
                }
            }
            h.into_iter().fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_classes_of_two_absorbing_states() {
        // 0 -> {1,2}; 1 and 2 absorbing
        let chain = vec![0.0, 0.5, 0.5, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        assert_eq!(recurrent_classes(3, &chain), vec![vec![1], vec![2]]);
    }

    #[test]
    fn single_absorbing_state_is_self_loop() {
        let mdp = FiniteMdp::new(1, 1, vec![1.0], vec![0.0], vec![1.0], 0.5).unwrap();
        assert_eq!(support_graph(&mdp), vec![vec![0]]);
        assert!(is_communicating(&mdp));
        assert_eq!(diameter(&mdp, 1e-12), 0.0);
    }

    #[test]
    fn deterministic_cycle_diameter() {
        // 3-cycle under the single action: distance from 1 to 0 is 2.
        let t = vec![0., 1., 0., 0., 0., 1., 1., 0., 0.];
        let mdp = FiniteMdp::new(3, 1, t, vec![0.0; 3], vec![1.0, 0.0, 0.0], 0.9).unwrap();
        assert!((diameter(&mdp, 1e-12) - 2.0).abs() < 1e-9);
    }
}
