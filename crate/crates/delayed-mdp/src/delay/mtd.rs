//! Mixture-transition-distribution (MTD) delays.
//!
//! Weights `lambda_g`, `g = 0..=d_max`, mix lagged contributions: `g = 0` is
//! the newest action (undelayed), `g = d_max` the oldest. Trailing zero
//! weights are dropped, so `lambda = (1, 0, ...)` yields the base MDP.
//!
//! * single-matrix variants (ISM/IMM) keep the current state and the last
//!   `d_max` actions: `P(s'|x,a) = sum_g lambda_g p_g(s'|s, a_{t-g})`;
//! * past-state variants (PSM/PMM) also keep the last `d_max` states and mix
//!   lagged state-action pairs: `P(s'|x,a) = sum_g lambda_g p_g(s'|s_{t-g}, a_{t-g})`.
//!
//! Single-matrix variants share one kernel (`p_g = p`); the multi-matrix
//! variants take one kernel per lag.

use super::constant::build;
use super::{check_aug_budget, pow, weight_order, AugmentedMdp, DelaySpec, Layout};
use crate::error::{Error, Result};
use crate::mdp::{check_distribution, FiniteMdp, StationaryPolicy, DEFAULT_ENTRY_BUDGET, ROW_TOL};

/// MTD augmentation with the default budget.
pub fn augment_mtd(mdp: &FiniteMdp, spec: &DelaySpec) -> Result<AugmentedMdp> {
    augment_mtd_with(mdp, spec, DEFAULT_ENTRY_BUDGET)
}

/// MTD augmentation.
pub fn augment_mtd_with(mdp: &FiniteMdp, spec: &DelaySpec, budget: usize) -> Result<AugmentedMdp> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let (lambda, kernels, past_states) = match spec {
        DelaySpec::MtdIsm { lambda } => (lambda, None, false),
        DelaySpec::MtdPsm { lambda } => (lambda, None, true),
        DelaySpec::MtdImm { lambda, kernels } => (lambda, Some(kernels), false),
        DelaySpec::MtdPmm { lambda, kernels } => (lambda, Some(kernels), true),
        _ => return Err(Error::InvalidParameter("expected an MTD delay spec".into())),
    };
    let d_max = weight_order("MTD weights", lambda)?;
    let lambda = &lambda[..=d_max];
    if let Some(ks) = kernels {
        if ks.len() < d_max + 1 {
            return Err(Error::KernelCount {
                expected: d_max + 1,
                got: ks.len(),
            });
        }
        for k in ks.iter().take(d_max + 1) {
            if k.len() != ns * na * ns {
                return Err(Error::DimensionMismatch(format!(
                    "lag kernel has {} entries",
                    k.len()
                )));
            }
            for chunk in k.chunks(ns) {
                check_distribution("lag kernel row", chunk, ROW_TOL)?;
            }
        }
    }
    let kernel = |g: usize, s: usize, a: usize| -> &[f64] {
        match kernels {
            Some(ks) => &ks[g][(s * na + a) * ns..(s * na + a + 1) * ns],
            None => mdp.p(s, a),
        }
    };
    let layout = if past_states {
        Layout::History {
            n_states: ns,
            n_actions: na,
            d_max,
        }
    } else {
        Layout::Buffer {
            n_states: ns,
            n_actions: na,
            len: d_max,
        }
    };
    let n = check_aug_budget(&layout, na, budget)?;
    let block = pow(na, d_max);
    let mut transition = vec![0.0; n * na * n];
    let mut reward = vec![0.0; n * na];
    let mut init = vec![0.0; n];
    for idx in 0..n {
        let x = layout.decode(idx);
        let starts_fresh = x.past_states.iter().all(|&p| p == x.last_state);
        if starts_fresh {
            init[idx] = mdp.initial_dist()[x.last_state] / block as f64;
        }
        let code = idx % block;
        let shifted = if d_max == 0 {
            0
        } else {
            (code % pow(na, d_max - 1)) * na
        };
        // Index of the successor's state part excluding the new state.
        let history_tail = if past_states && d_max > 0 {
            let kept = std::iter::once(&x.last_state).chain(&x.past_states[..d_max - 1]);
            kept.fold(0, |c, &s| c * ns + s)
        } else {
            0
        };
        for a in 0..na {
            let next_code = if d_max == 0 { 0 } else { shifted + a };
            let out = &mut transition[(idx * na + a) * n..(idx * na + a + 1) * n];
            let mut r = 0.0;
            for (g, &w) in lambda.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let act = if g == 0 {
                    a
                } else {
                    x.action_buffer[d_max - g]
                };
                let src = if past_states && g > 0 {
                    x.past_states[g - 1]
                } else {
                    x.last_state
                };
                r += w * mdp.r(src, act);
                for (s2, &p) in kernel(g, src, act).iter().enumerate() {
                    if p > 0.0 {
                        let state_part = if past_states {
                            s2 * pow(ns, d_max) + history_tail
                        } else {
                            s2
                        };
                        out[state_part * block + next_code] += w * p;
                    }
                }
            }
            reward[idx * na + a] = r;
        }
    }
    let aug = build(mdp, n, na, transition, reward, init)?;
    let spec = match spec {
        DelaySpec::MtdIsm { .. } => DelaySpec::MtdIsm {
            lambda: lambda.to_vec(),
        },
        DelaySpec::MtdPsm { .. } => DelaySpec::MtdPsm {
            lambda: lambda.to_vec(),
        },
        DelaySpec::MtdImm { kernels, .. } => DelaySpec::MtdImm {
            lambda: lambda.to_vec(),
            kernels: kernels[..=d_max].to_vec(),
        },
        DelaySpec::MtdPmm { kernels, .. } => DelaySpec::MtdPmm {
            lambda: lambda.to_vec(),
            kernels: kernels[..=d_max].to_vec(),
        },
        _ => unreachable!("checked above"),
    };
    Ok(AugmentedMdp {
        mdp: aug,
        base: mdp.clone(),
        layout,
        spec,
    })
}

/// Lag kernels `p_g = p P_pi^g` for `g = 0..=d_max`: one step of `p`, then `g`
/// steps of the chain induced by `policy`.
pub fn homogeneous_pmm_kernels(
    mdp: &FiniteMdp,
    policy: &StationaryPolicy,
    d_max: usize,
) -> Vec<Vec<f64>> {
    let ns = mdp.n_states();
    let chain = mdp.chain(policy);
    let mut kernels = Vec::with_capacity(d_max + 1);
    let mut current = mdp.transitions().to_vec();
    for _ in 0..=d_max {
        kernels.push(current.clone());
        let mut next = vec![0.0; current.len()];
        for (row_out, row_in) in next.chunks_mut(ns).zip(current.chunks(ns)) {
            for (z, &w) in row_in.iter().enumerate() {
                if w > 0.0 {
                    for (o, &q) in row_out.iter_mut().zip(&chain[z * ns..(z + 1) * ns]) {
                        *o += w * q;
                    }
                }
            }
        }
        current = next;
    }
    kernels
}
