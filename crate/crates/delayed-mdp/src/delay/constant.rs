//! Constant delays: augmented state `(s, a_1..a_d)` with `a_1` the oldest.

use super::{
    check_aug_budget, pow, AugmentOptions, AugmentedMdp, AugmentedState, Belief, DelaySpec, Layout,
    RewardForm,
};
use crate::error::{Error, Result};
use crate::mdp::FiniteMdp;

/// Belief of the current state: `delta_s` pushed through the buffer in order.
pub fn belief(mdp: &FiniteMdp, x: &AugmentedState) -> Belief {
    let mut dist = Belief::dirac(mdp.n_states(), x.last_state).probs;
    for &a in &x.action_buffer {
        dist = mdp.push(&dist, a);
    }
    Belief { probs: dist }
}

/// `E_{z ~ b(.|x)} r(z, a)`.
pub fn expected_delayed_reward(mdp: &FiniteMdp, x: &AugmentedState, a: usize) -> f64 {
    belief(mdp, x)
        .probs
        .iter()
        .enumerate()
        .map(|(z, &w)| w * mdp.r(z, a))
        .sum()
}

/// Constant-delay augmentation with the executed-action reward `r(s, a_1)`.
pub fn augment_constant(mdp: &FiniteMdp, d: usize) -> Result<AugmentedMdp> {
    augment_constant_with(mdp, d, AugmentOptions::default())
}

/// Constant-delay augmentation.
///
/// The first `d` actions are drawn uniformly, so the initial distribution is
/// `d0(s) / |A|^d` on every buffer.
pub fn augment_constant_with(
    mdp: &FiniteMdp,
    d: usize,
    opts: AugmentOptions,
) -> Result<AugmentedMdp> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let layout = Layout::Buffer {
        n_states: ns,
        n_actions: na,
        len: d,
    };
    let spec = DelaySpec::Constant(d);
    if d == 0 {
        return Ok(AugmentedMdp {
            mdp: mdp.clone(),
            base: mdp.clone(),
            layout,
            spec,
        });
    }
    let n = check_aug_budget(&layout, na, opts.budget)?;
    let block = pow(na, d);
    let tail = pow(na, d - 1);
    let mut transition = vec![0.0; n * na * n];
    let mut reward = vec![0.0; n * na];
    let mut init = vec![0.0; n];
    for idx in 0..n {
        let (s, code) = (idx / block, idx % block);
        let a1 = code / tail;
        init[idx] = mdp.initial_dist()[s] / block as f64;
        let expected = match opts.reward {
            RewardForm::Expected => Some(belief(mdp, &layout.decode(idx)).probs),
            RewardForm::Executed => None,
        };
        for a in 0..na {
            let next_code = (code % tail) * na + a;
            let row = &mut transition[(idx * na + a) * n..(idx * na + a + 1) * n];
            for (s2, &p) in mdp.p(s, a1).iter().enumerate() {
                if p > 0.0 {
                    row[s2 * block + next_code] = p;
                }
            }
            reward[idx * na + a] = match &expected {
                None => mdp.r(s, a1),
                Some(b) => b.iter().enumerate().map(|(z, &w)| w * mdp.r(z, a)).sum(),
            };
        }
    }
    let aug = build(mdp, n, na, transition, reward, init)?;
    Ok(AugmentedMdp {
        mdp: aug,
        base: mdp.clone(),
        layout,
        spec,
    })
}

/// Builds the augmented MDP, inheriting discount, reward mode and `r_max`.
pub(crate) fn build(
    base: &FiniteMdp,
    n: usize,
    na: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    init: Vec<f64>,
) -> Result<FiniteMdp> {
    // Products of probabilities drift from 1 by a few ulps; renormalize rows
    // that drift noticeably and leave exact ones bit-for-bit untouched.
    let mut transition = transition;
    for row in transition.chunks_mut(n) {
        let z: f64 = row.iter().sum();
        if (z - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidDistribution {
                what: "augmented transition row".into(),
                detail: format!("sums to {z}"),
            });
        }
        if (z - 1.0).abs() > 1e-14 {
            row.iter_mut().for_each(|p| *p /= z);
        }
    }
    let z: f64 = init.iter().sum();
    let init: Vec<f64> = if (z - 1.0).abs() > 1e-14 {
        init.iter().map(|p| p / z).collect()
    } else {
        init
    };
    let r_max = base.r_max();
    let aug = if base.signed_rewards() {
        FiniteMdp::new_signed(n, na, transition, reward, init, base.discount())?
    } else {
        FiniteMdp::new(n, na, transition, reward, init, base.discount())?
    };
    // The aggregated reward bound may exceed the base bound (stochastic delays).
    let observed = aug.r_max();
    aug.with_r_max(r_max.max(observed))
}
