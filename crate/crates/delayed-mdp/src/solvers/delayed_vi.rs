//! Value iteration on a constantly delayed MDP without materializing the
//! augmented transition tensor.
//!
//! From `(s, a_1, rest)` the action `a` leads to `(s', rest, a)` with
//! `s' ~ p(.|s, a_1)`, so one Bellman sweep is a product of each base row
//! `p(.|s,a_1)` with the value table reshaped as `[s'][rest, a]`.

use crate::delay::RewardForm;
use crate::error::{Error, Result};
use crate::mdp::{check_budget, FiniteMdp, DEFAULT_ENTRY_BUDGET, DEFAULT_MAX_ITER};
use crate::util::argmax;

/// Optimal values over augmented states `(s, a_1..a_d)`, indexed
/// `s * A^d + code` with `a_1` the most significant digit.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayedValues {
    pub delay: usize,
    pub n_states: usize,
    pub n_actions: usize,
    pub values: Vec<f64>,
    /// Greedy action per augmented state (ties to the lowest action).
    pub actions: Vec<usize>,
}

impl DelayedValues {
    pub fn index(&self, s: usize, buffer: &[usize]) -> usize {
        buffer.iter().fold(s, |acc, &a| acc * self.n_actions + a)
    }
}

/// Beliefs of every augmented state, row-major `[x][s]`.
fn all_beliefs(mdp: &FiniteMdp, d: usize) -> Vec<f64> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    // level k holds beliefs of (s, a_1..a_k) at index s * A^k + code
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
    level
}

/// Optimal discounted values of the `d`-delayed MDP with the given reward form.
///
/// Stops when successive sweeps differ by at most `tol` in sup norm.
pub fn delayed_value_iteration(
    mdp: &FiniteMdp,
    d: usize,
    reward: RewardForm,
    tol: f64,
) -> Result<DelayedValues> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tol} must be positive"
        )));
    }
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let block = na.checked_pow(d as u32).ok_or(Error::BudgetExceeded {
        entries: u128::MAX,
        budget: DEFAULT_ENTRY_BUDGET,
    })?;
    let n = ns * block;
    check_budget(n as u128 * na as u128, DEFAULT_ENTRY_BUDGET)?;
    let gamma = mdp.discount();
    let tail = block / na.max(1);

    // r~(x, a), row-major [x][a]
    let rtilde: Vec<f64> = match (d, reward) {
        (0, _) => mdp.rewards().to_vec(),
        (_, RewardForm::Executed) => (0..n * na)
            .map(|i| {
                let x = i / na;
                mdp.r(x / block, (x % block) / tail)
            })
            .collect(),
        (_, RewardForm::Expected) => {
            let beliefs = all_beliefs(mdp, d);
            let mut r = vec![0.0; n * na];
            for (x, b) in beliefs.chunks(ns).enumerate() {
                for (z, &w) in b.iter().enumerate() {
                    if w > 0.0 {
                        for a in 0..na {
                            r[x * na + a] += w * mdp.r(z, a);
                        }
                    }
                }
            }
            r
        }
    };

    let mut v = vec![0.0; n];
    let mut q = vec![0.0; n * na];
    let mut w = vec![0.0; block];
    for _ in 0..DEFAULT_MAX_ITER {
        if d == 0 {
            for s in 0..ns {
                for a in 0..na {
                    let ev: f64 = mdp.p(s, a).iter().zip(&v).map(|(p, x)| p * x).sum();
                    q[s * na + a] = rtilde[s * na + a] + gamma * ev;
                }
            }
        } else {
            for s in 0..ns {
                for a1 in 0..na {
                    w.iter_mut().for_each(|x| *x = 0.0);
                    for (s2, &p) in mdp.p(s, a1).iter().enumerate() {
                        if p > 0.0 {
                            for (o, &val) in w.iter_mut().zip(&v[s2 * block..(s2 + 1) * block]) {
                                *o += p * val;
                            }
                        }
                    }
                    // x = (s, a1, rest); successor column rest * A + a
                    for rest in 0..tail {
                        let x = s * block + a1 * tail + rest;
                        for a in 0..na {
                            q[x * na + a] = rtilde[x * na + a] + gamma * w[rest * na + a];
                        }
                    }
                }
            }
        }
        let mut residual: f64 = 0.0;
        for (x, row) in q.chunks(na).enumerate() {
            let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            residual = residual.max((best - v[x]).abs());
            v[x] = best;
        }
        if residual <= tol {
            let actions = q.chunks(na).map(argmax).collect();
            return Ok(DelayedValues {
                delay: d,
                n_states: ns,
                n_actions: na,
                values: v,
                actions,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: DEFAULT_MAX_ITER,
        residual: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::{augment_constant_with, AugmentOptions};
    use crate::fixtures::random_mdp;
    use crate::mdp::value_iteration;
    use crate::util::trial_rng;

    #[test]
    fn matches_dense_augmented_value_iteration() {
        let mut rng = trial_rng(71, 0);
        for d in 0..3 {
            for reward in [RewardForm::Executed, RewardForm::Expected] {
                let mdp = random_mdp(3, 2, 0.3, &mut rng).unwrap();
                let opts = AugmentOptions {
                    reward,
                    ..Default::default()
                };
                let aug = augment_constant_with(&mdp, d, opts).unwrap();
                let (dense, pol) = value_iteration(&aug.mdp, 1e-12).unwrap();
                let fast = delayed_value_iteration(&mdp, d, reward, 1e-12).unwrap();
                for idx in 0..aug.n_states() {
                    let x = aug.state(idx);
                    let j = fast.index(x.last_state, &x.action_buffer);
                    assert!((dense[idx] - fast.values[j]).abs() < 1e-9);
                    assert_eq!(pol.mode(idx), fast.actions[j]);
                }
            }
        }
    }
}
