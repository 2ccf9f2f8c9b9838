//! Exact Lipschitz constants of tabular MDPs under a state embedding.
//!
//! Every constant is a maximum of finite ratios over pairs, so it is the
//! smallest constant valid on the given grid rather than a sufficient bound.

use super::metric::{wasserstein1, wasserstein1_line};
use super::{FiniteMdp, StationaryPolicy};
use crate::error::{Error, Result};

/// Lipschitz constants of transitions, rewards, policy and time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzConstants {
    pub l_p: f64,
    pub l_r: f64,
    /// Present when a policy was supplied.
    pub l_pi: Option<f64>,
    pub l_t: f64,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Default action embedding: action index on the real line.
pub fn index_actions(n_actions: usize) -> Vec<f64> {
    (0..n_actions).map(|a| a as f64).collect()
}

/// Computes `(L_P, L_r, L_pi, L_T)` by exhaustive pairwise maxima.
///
/// `action_coords` defaults to the action index on the line.
pub fn lipschitz_constants(
    mdp: &FiniteMdp,
    policy: Option<&StationaryPolicy>,
    action_coords: Option<&[f64]>,
) -> Result<LipschitzConstants> {
    let coords = mdp.state_coords().ok_or(Error::MissingEmbedding)?;
    let default_actions;
    let acts = match action_coords {
        Some(a) if a.len() == mdp.n_actions() => a,
        Some(_) => return Err(Error::DimensionMismatch("one coordinate per action".into())),
        None => {
            default_actions = index_actions(mdp.n_actions());
            &default_actions
        }
    };
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut l_p: f64 = 0.0;
    let mut l_r: f64 = 0.0;
    let mut l_t: f64 = 0.0;
    let mut dirac = vec![0.0; ns];
    for s in 0..ns {
        dirac[s] = 1.0;
        for a in 0..na {
            l_t = l_t.max(wasserstein1(mdp.p(s, a), &dirac, coords)?);
        }
        dirac[s] = 0.0;
    }
    let pairs: Vec<(usize, usize)> = (0..ns).flat_map(|s| (0..na).map(move |a| (s, a))).collect();
    for (i, &(s, a)) in pairs.iter().enumerate() {
        for &(t, b) in &pairs[i + 1..] {
            let dist = euclid(&coords[s], &coords[t]) + (acts[a] - acts[b]).abs();
            if dist == 0.0 {
                continue;
            }
            l_p = l_p.max(wasserstein1(mdp.p(s, a), mdp.p(t, b), coords)? / dist);
            l_r = l_r.max((mdp.r(s, a) - mdp.r(t, b)).abs() / dist);
        }
    }
    let l_pi = match policy {
        Some(pi) => Some(policy_lipschitz(pi, coords, acts)?),
        None => None,
    };
    Ok(LipschitzConstants {
        l_p,
        l_r,
        l_pi,
        l_t,
    })
}

/// `max_{s != s'} W1(pi(.|s), pi(.|s')) / d_S(s,s')` with actions on the line.
pub fn policy_lipschitz(
    policy: &StationaryPolicy,
    state_coords: &[Vec<f64>],
    action_coords: &[f64],
) -> Result<f64> {
    if policy.n_states() != state_coords.len() || policy.n_actions() != action_coords.len() {
        return Err(Error::DimensionMismatch("policy vs embeddings".into()));
    }
    let mut l: f64 = 0.0;
    for s in 0..policy.n_states() {
        for t in s + 1..policy.n_states() {
            let dist = euclid(&state_coords[s], &state_coords[t]);
            if dist == 0.0 {
                continue;
            }
            l = l.max(wasserstein1_line(policy.probs(s), policy.probs(t), action_coords) / dist);
        }
    }
    Ok(l)
}

/// Lipschitz constant of `Q(s, .)` in the action argument, maximized over states.
pub fn q_action_lipschitz(q: &[f64], n_actions: usize, action_coords: &[f64]) -> f64 {
    let mut l: f64 = 0.0;
    for row in q.chunks(n_actions) {
        for a in 0..n_actions {
            for b in a + 1..n_actions {
                let gap = (action_coords[a] - action_coords[b]).abs();
                if gap > 0.0 {
                    l = l.max((row[a] - row[b]).abs() / gap);
                }
            }
        }
    }
    l
}
