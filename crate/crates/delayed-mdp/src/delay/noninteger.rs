//! Non-integer delays `d_int + frac` built from a pair of partial-step kernels.
//!
//! The observed state lies `frac` of a step before an integer time. The
//! augmented state `(s, a_1..a_k)`, `k = d_int + 1`, advances by finishing the
//! step of `a_1` with `b_frac` and then running `b_rest` with `a_2` (the new
//! action when `k = 1`) up to the next observation point.

use super::constant::build;
use super::{check_aug_budget, pow, AugmentedMdp, AugmentedState, Belief, DelaySpec, Layout};
use crate::error::{Error, Result};
use crate::mdp::{check_distribution, FiniteMdp, ROW_TOL};

/// Tolerance on the composition `sum_z b_rest(s'|z,a) b_frac(z|s,a) = p(s'|s,a)`.
pub const COMPOSITION_TOL: f64 = 1e-9;

fn row(kernel: &[f64], ns: usize, na: usize, s: usize, a: usize) -> &[f64] {
    let start = (s * na + a) * ns;
    &kernel[start..start + ns]
}

fn push(kernel: &[f64], ns: usize, na: usize, dist: &[f64], a: usize) -> Vec<f64> {
    let mut out = vec![0.0; ns];
    for (s, &w) in dist.iter().enumerate() {
        if w > 0.0 {
            for (o, &q) in out.iter_mut().zip(row(kernel, ns, na, s, a)) {
                *o += w * q;
            }
        }
    }
    out
}

/// Largest deviation between the composed kernel pair and the base transition.
pub fn composition_deviation(mdp: &FiniteMdp, b_frac: &[f64], b_rest: &[f64]) -> f64 {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut worst: f64 = 0.0;
    for s in 0..ns {
        for a in 0..na {
            let composed = push(b_rest, ns, na, row(b_frac, ns, na, s, a), a);
            worst = worst.max(crate::util::max_abs_diff(&composed, mdp.p(s, a)));
        }
    }
    worst
}

/// Belief of the state at which the next chosen action executes.
pub(crate) fn belief(mdp: &FiniteMdp, b_frac: &[f64], x: &AugmentedState) -> Belief {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let start = Belief::dirac(ns, x.last_state).probs;
    let mut dist = push(b_frac, ns, na, &start, x.action_buffer[0]);
    for &a in &x.action_buffer[1..] {
        dist = mdp.push(&dist, a);
    }
    Belief { probs: dist }
}

fn validate_kernel(what: &str, k: &[f64], ns: usize, na: usize) -> Result<()> {
    if k.len() != ns * na * ns {
        return Err(Error::DimensionMismatch(format!(
            "{what} has {} entries",
            k.len()
        )));
    }
    for chunk in k.chunks(ns) {
        check_distribution(what, chunk, ROW_TOL)?;
    }
    Ok(())
}

/// Non-integer delay augmentation; the reward is `E_{z ~ b(.|x)} r(z, a)`.
pub fn augment_non_integer(
    mdp: &FiniteMdp,
    spec: &DelaySpec,
    budget: usize,
) -> Result<AugmentedMdp> {
    let DelaySpec::NonInteger {
        frac,
        d_int,
        b_frac,
        b_rest,
    } = spec
    else {
        return Err(Error::InvalidParameter(
            "expected a non-integer delay spec".into(),
        ));
    };
    if !(*frac > 0.0 && *frac < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fractional part {frac} not in (0,1)"
        )));
    }
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    validate_kernel("fractional kernel", b_frac, ns, na)?;
    validate_kernel("remainder kernel", b_rest, ns, na)?;
    let dev = composition_deviation(mdp, b_frac, b_rest);
    if dev > COMPOSITION_TOL {
        return Err(Error::KernelMismatch { max_deviation: dev });
    }
    let k = d_int + 1;
    let layout = Layout::Buffer {
        n_states: ns,
        n_actions: na,
        len: k,
    };
    let n = check_aug_budget(&layout, na, budget)?;
    let block = pow(na, k);
    let tail = pow(na, k - 1);
    let mut transition = vec![0.0; n * na * n];
    let mut reward = vec![0.0; n * na];
    let mut init = vec![0.0; n];
    for idx in 0..n {
        let x = layout.decode(idx);
        init[idx] = mdp.initial_dist()[x.last_state] / block as f64;
        let b = belief(mdp, b_frac, &x);
        let z = row(b_frac, ns, na, x.last_state, x.action_buffer[0]);
        let code = idx % block;
        for a in 0..na {
            let a2 = if k == 1 { a } else { x.action_buffer[1] };
            let next = push(b_rest, ns, na, z, a2);
            let next_code = (code % tail) * na + a;
            let out = &mut transition[(idx * na + a) * n..(idx * na + a + 1) * n];
            for (s2, &w) in next.iter().enumerate() {
                if w > 0.0 {
                    out[s2 * block + next_code] = w;
                }
            }
            reward[idx * na + a] = b
                .probs
                .iter()
                .enumerate()
                .map(|(z, &w)| w * mdp.r(z, a))
                .sum();
        }
    }
    let aug = build(mdp, n, na, transition, reward, init)?;
    Ok(AugmentedMdp {
        mdp: aug,
        base: mdp.clone(),
        layout,
        spec: spec.clone(),
    })
}

/// Kernel `(1 - c) I + c U` applied for every action: `U` is the uniform matrix.
///
/// Squares of such kernels stay in the family (`c' = 2c - c^2`), which gives
/// exact symmetric square roots of doubly stochastic transitions.
pub fn symmetric_root_kernel(ns: usize, na: usize, c: f64) -> Vec<f64> {
    let mut k = vec![c / ns as f64; ns * na * ns];
    for s in 0..ns {
        for a in 0..na {
            k[(s * na + a) * ns + s] += 1.0 - c;
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::{augment_constant_with, AugmentOptions, RewardForm};
    use crate::mdp::{policy_evaluation_discounted, StationaryPolicy, DEFAULT_ENTRY_BUDGET};
    use crate::util::{sample_index, trial_rng};
    use rand::Rng;

    fn identity(ns: usize, na: usize) -> Vec<f64> {
        symmetric_root_kernel(ns, na, 0.0)
    }

    #[test]
    fn identity_fraction_reduces_to_integer_delay() {
        let mut rng = trial_rng(31, 0);
        let mdp = crate::fixtures::random_mdp(3, 2, 0.0, &mut rng).unwrap();
        let spec = DelaySpec::NonInteger {
            frac: 1e-6,
            d_int: 1,
            b_frac: identity(3, 2),
            b_rest: mdp.transitions().to_vec(),
        };
        let frac = augment_non_integer(&mdp, &spec, DEFAULT_ENTRY_BUDGET).unwrap();
        let opts = AugmentOptions {
            reward: RewardForm::Expected,
            ..Default::default()
        };
        let con = augment_constant_with(&mdp, 1, opts).unwrap();
        // The oldest slot is inert: (s, a_1, a_2) behaves like (s, a_2).
        for _ in 0..5 {
            let pi = StationaryPolicy::random(con.n_states(), 2, &mut rng);
            let mut probs = Vec::new();
            for idx in 0..frac.n_states() {
                let x = frac.state(idx);
                let y = AugmentedState::new(x.last_state, vec![x.action_buffer[1]]);
                probs.extend_from_slice(pi.probs(con.index(&y)));
            }
            let lifted = StationaryPolicy::new(frac.n_states(), 2, probs).unwrap();
            let (_, j1) = policy_evaluation_discounted(&con.mdp, &pi).unwrap();
            let (_, j2) = policy_evaluation_discounted(&frac.mdp, &lifted).unwrap();
            assert!((j1 - j2).abs() < 1e-9, "{j1} vs {j2}");
        }
    }

    #[test]
    fn mismatched_pair_is_rejected() {
        let mut rng = trial_rng(32, 0);
        let mdp = crate::fixtures::random_mdp(3, 2, 0.0, &mut rng).unwrap();
        let spec = DelaySpec::NonInteger {
            frac: 0.5,
            d_int: 0,
            b_frac: identity(3, 2),
            b_rest: identity(3, 2),
        };
        assert!(matches!(
            augment_non_integer(&mdp, &spec, DEFAULT_ENTRY_BUDGET),
            Err(Error::KernelMismatch { max_deviation }) if max_deviation > 0.1
        ));
    }

    #[test]
    fn random_valid_pairs_compose_exactly() {
        for c in [0.1, 0.3, 0.7] {
            let ns = 4;
            let half = symmetric_root_kernel(ns, 2, c);
            let full = symmetric_root_kernel(ns, 2, 2.0 * c - c * c);
            let mdp = FiniteMdp::new(ns, 2, full, vec![0.5; ns * 2], vec![0.25; ns], 0.9).unwrap();
            assert!(composition_deviation(&mdp, &half, &half) < 1e-12);
        }
    }

    #[test]
    fn half_step_delay_matches_two_clock_simulation() {
        let (ns, na, c) = (3, 2, 0.4);
        let half = symmetric_root_kernel(ns, na, c);
        let full = symmetric_root_kernel(ns, na, 2.0 * c - c * c);
        let reward = vec![0.0, 1.0, 0.7, 0.2, 0.4, 0.9];
        let gamma = 0.8;
        let mdp = FiniteMdp::new(ns, na, full, reward, vec![0.5, 0.3, 0.2], gamma).unwrap();
        let spec = DelaySpec::NonInteger {
            frac: 0.5,
            d_int: 0,
            b_frac: half.clone(),
            b_rest: half.clone(),
        };
        let aug = augment_non_integer(&mdp, &spec, DEFAULT_ENTRY_BUDGET).unwrap();
        let mut rng = trial_rng(33, 0);
        let pi = StationaryPolicy::random(aug.n_states(), na, &mut rng);
        let (_, exact) = policy_evaluation_discounted(&aug.mdp, &pi).unwrap();

        // Interleaved clocks: observed half-step states z and integer states s.
        let runs = 100_000;
        let horizon = 80;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..runs {
            let mut z = sample_index(mdp.initial_dist(), &mut rng);
            let mut prev = rng.random_range(0..na);
            let mut ret = 0.0;
            let mut disc = 1.0;
            for _ in 0..horizon {
                let s = sample_index(row(&half, ns, na, z, prev), &mut rng);
                let x = AugmentedState::new(z, vec![prev]);
                let a = pi.sample(aug.index(&x), &mut rng);
                ret += disc * mdp.r(s, a);
                disc *= gamma;
                z = sample_index(row(&half, ns, na, s, a), &mut rng);
                prev = a;
            }
            sum += ret;
            sq += ret * ret;
        }
        let mean = sum / runs as f64;
        let se = ((sq / runs as f64 - mean * mean) / runs as f64).sqrt();
        assert!(
            (mean - exact).abs() < 3.0 * se + gamma.powi(horizon) * 5.0,
            "{mean} vs {exact}"
        );
    }
}
