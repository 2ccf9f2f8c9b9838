//! Stochastic observation delays.
//!
//! The augmented state `(s, a_1..a_dmax, n)` records the last observed state
//! `s = s_{t-n}`; the last `n` buffer entries are the actions taken since.
//! Each step a fresh delay `delta ~ zeta` is drawn for the newest state, but
//! the observation never regresses, so `n' = min(delta, n + 1)` and the
//! observed state advances by `O = n + 1 - n'` steps.

use super::constant::build;
use super::{check_aug_budget, pow, weight_order, AugmentedMdp, DelaySpec, Layout};
use crate::error::Result;
use crate::mdp::{FiniteMdp, DEFAULT_ENTRY_BUDGET};

/// Distribution of the next delay `n'` given the current delay `n`.
pub fn next_delay_distribution(zeta: &[f64], n: usize) -> Vec<f64> {
    let d_max = zeta.len() - 1;
    let mut out = vec![0.0; d_max + 1];
    for (j, &z) in zeta.iter().enumerate() {
        out[j.min(n + 1).min(d_max)] += z;
    }
    out
}

/// Stochastic-delay augmentation with default budget.
pub fn augment_stochastic(mdp: &FiniteMdp, zeta: &[f64]) -> Result<AugmentedMdp> {
    augment_stochastic_with(mdp, zeta, DEFAULT_ENTRY_BUDGET)
}

/// Stochastic-delay augmentation.
///
/// The per-step reward sums the newly revealed rewards, discounted from the
/// oldest: `sum_k P(O=k) sum_{i<k} gamma^i E r(s_i, u_{i+1})`. The initial
/// delay is `d_max` with a uniform buffer.
pub fn augment_stochastic_with(
    mdp: &FiniteMdp,
    zeta: &[f64],
    budget: usize,
) -> Result<AugmentedMdp> {
    let d_max = weight_order("delay distribution", zeta)?;
    let zeta = &zeta[..=d_max];
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let layout = Layout::Stochastic {
        n_states: ns,
        n_actions: na,
        d_max,
    };
    let n_aug = check_aug_budget(&layout, na, budget)?;
    let block = pow(na, d_max);
    let gamma = mdp.discount();
    let next: Vec<Vec<f64>> = (0..=d_max)
        .map(|n| next_delay_distribution(zeta, n))
        .collect();

    let mut transition = vec![0.0; n_aug * na * n_aug];
    let mut reward = vec![0.0; n_aug * na];
    let mut init = vec![0.0; n_aug];
    for idx in 0..n_aug {
        let x = layout.decode(idx);
        let n = x.effective_delay.expect("stochastic layout");
        if n == d_max {
            init[idx] = mdp.initial_dist()[x.last_state] / block as f64;
        }
        let code = (idx / (d_max + 1)) % block;
        for a in 0..na {
            // u_1..u_n are the pending actions, u_{n+1} the new one.
            let mut u: Vec<usize> = x.action_buffer[d_max - n..].to_vec();
            u.push(a);
            let mut dists = Vec::with_capacity(n + 2);
            dists.push(super::Belief::dirac(ns, x.last_state).probs);
            for &ui in &u {
                let last = dists.last().expect("nonempty");
                dists.push(mdp.push(last, ui));
            }
            // Discounted partial sums of revealed rewards.
            let mut partial = vec![0.0; n + 2];
            for i in 0..=n {
                let step: f64 = dists[i]
                    .iter()
                    .enumerate()
                    .map(|(z, &w)| w * mdp.r(z, u[i]))
                    .sum();
                partial[i + 1] = partial[i] + gamma.powi(i as i32) * step;
            }
            let next_code = if d_max == 0 {
                0
            } else {
                (code % pow(na, d_max - 1)) * na + a
            };
            let row = &mut transition[(idx * na + a) * n_aug..(idx * na + a + 1) * n_aug];
            let mut r = 0.0;
            for (n2, &q) in next[n].iter().enumerate() {
                if q == 0.0 {
                    continue;
                }
                let observed = n + 1 - n2;
                r += q * partial[observed];
                for (s2, &w) in dists[observed].iter().enumerate() {
                    if w > 0.0 {
                        row[(s2 * block + next_code) * (d_max + 1) + n2] += q * w;
                    }
                }
            }
            reward[idx * na + a] = r;
        }
    }
    let aug = build(mdp, n_aug, na, transition, reward, init)?;
    Ok(AugmentedMdp {
        mdp: aug,
        base: mdp.clone(),
        layout,
        spec: DelaySpec::StochasticObs {
            zeta: zeta.to_vec(),
        },
    })
}
