//! Exact evaluation of both sides of the delayed performance identities and bounds.

use super::{
    brute_force_optimal, delayed_value_iteration, BoundReport, Criterion, PolicyClass,
    PolicyClassKind,
};
use crate::delay::{
    augment_constant, augment_constant_with, augment_stochastic, AugmentOptions, AugmentedMdp,
    Belief, Layout, RewardForm,
};
use crate::error::{Error, Result};
use crate::fixtures::{gaussian_drift_discretized, DriftGrid};
use crate::mdp::graph::reachable_from_initial;
use crate::mdp::lipschitz::{index_actions, lipschitz_constants, q_action_lipschitz};
use crate::mdp::{
    discounted_state_occupancy, policy_evaluation_discounted, q_values, FiniteMdp, StationaryPolicy,
};
use crate::util::{dot, solve};

fn check_discount(mdp: &FiniteMdp) -> Result<f64> {
    let g = mdp.discount();
    if !(g < 1.0) {
        return Err(Error::InvalidParameter(format!("discount {g} must be < 1")));
    }
    Ok(g)
}

fn expected_reward_augmentation(mdp: &FiniteMdp, d: usize) -> Result<AugmentedMdp> {
    augment_constant_with(
        mdp,
        d,
        AugmentOptions {
            reward: RewardForm::Expected,
            ..Default::default()
        },
    )
}

/// Both sides of the delayed performance-difference identity for every
/// augmented state `x`:
///
/// `E_b V^pi - V^pi~(x) = 1/(1-gamma) E_{x' ~ d_x} [E_b V^pi - E_{b, pi~} Q^pi]`.
///
/// The left side uses two value solves; the right side the discounted
/// occupancy from each `x`. Reports the state with the largest residual.
pub fn delayed_pdl_check(
    mdp: &FiniteMdp,
    d: usize,
    undelayed: &StationaryPolicy,
    delayed: &StationaryPolicy,
) -> Result<BoundReport> {
    let gamma = check_discount(mdp)?;
    let aug = expected_reward_augmentation(mdp, d)?;
    let (v_pi, _) = policy_evaluation_discounted(mdp, undelayed)?;
    let q_pi = q_values(mdp, &v_pi);
    let (v_del, _) = policy_evaluation_discounted(&aug.mdp, delayed)?;
    let n = aug.n_states();
    let na = mdp.n_actions();
    let mut lhs = vec![0.0; n];
    let mut gap = vec![0.0; n];
    for x in 0..n {
        let b = aug.belief(x).probs;
        let bv = dot(&b, &v_pi);
        lhs[x] = bv - v_del[x];
        let bq: f64 = b
            .iter()
            .enumerate()
            .map(|(s, &w)| w * dot(delayed.probs(x), &q_pi[s * na..(s + 1) * na]))
            .sum();
        gap[x] = bv - bq;
    }
    let chain = aug.mdp.chain(delayed);
    let mut worst = (0usize, 0.0f64, -1.0f64);
    let mut start = vec![0.0; n];
    for x in 0..n {
        start[x] = 1.0;
        let occ = discounted_state_occupancy(n, &chain, gamma, &start)?;
        start[x] = 0.0;
        let rhs = dot(&occ, &gap) / (1.0 - gamma);
        let res = (lhs[x] - rhs).abs();
        if res > worst.2 {
            worst = (x, rhs, res);
        }
    }
    Ok(BoundReport::new(
        lhs[worst.0],
        worst.1,
        &[("residual", worst.2), ("state", worst.0 as f64)],
    ))
}

/// Delay-linear bound for time-Lipschitz MDPs and the exact belief-mixture policy:
/// `max_x E_b V^pi - V^pi~(x) <= 2 d L_T L_Q L_pi / (1 - gamma)` over reachable `x`.
///
/// `L_Q` is the exact Lipschitz constant of `Q^pi` in the action (actions on
/// the integer line), `L_pi` and `L_T` come from the state embedding.
pub fn tlc_bound_check(
    mdp: &FiniteMdp,
    d: usize,
    expert: &StationaryPolicy,
) -> Result<BoundReport> {
    let gamma = check_discount(mdp)?;
    let consts = lipschitz_constants(mdp, Some(expert), None)?;
    let l_pi = consts.l_pi.expect("policy supplied");
    let (v_pi, _) = policy_evaluation_discounted(mdp, expert)?;
    let l_q = q_action_lipschitz(
        &q_values(mdp, &v_pi),
        mdp.n_actions(),
        &index_actions(mdp.n_actions()),
    );
    let aug = expected_reward_augmentation(mdp, d)?;
    let mixture = aug.belief_mixture(expert);
    let (v_del, _) = policy_evaluation_discounted(&aug.mdp, &mixture)?;
    let reach = reachable_from_initial(&aug.mdp);
    let lhs = (0..aug.n_states())
        .filter(|&x| reach[x])
        .map(|x| dot(&aug.belief(x).probs, &v_pi) - v_del[x])
        .fold(f64::NEG_INFINITY, f64::max);
    let rhs = 2.0 * d as f64 * consts.l_t * l_q * l_pi / (1.0 - gamma);
    Ok(BoundReport::new(
        lhs,
        rhs,
        &[
            ("l_t", consts.l_t),
            ("l_q", l_q),
            ("l_pi", l_pi),
            ("delay", d as f64),
        ],
    ))
}

/// Belief mixture that treats the observed state as exactly `d` steps old,
/// ignoring the effective delay (the constant-delay imitation policy).
fn fixed_delay_mixture(
    aug: &AugmentedMdp,
    expert: &StationaryPolicy,
    d: usize,
) -> StationaryPolicy {
    let na = aug.mdp.n_actions();
    let mut probs = vec![0.0; aug.n_states() * na];
    for x in 0..aug.n_states() {
        let st = aug.state(x);
        let len = st.action_buffer.len();
        let mut b = Belief::dirac(aug.base.n_states(), st.last_state).probs;
        for &a in &st.action_buffer[len - d..] {
            b = aug.base.push(&b, a);
        }
        let row = &mut probs[x * na..(x + 1) * na];
        for (s, &w) in b.iter().enumerate() {
            if w > 0.0 {
                for (o, &p) in row.iter_mut().zip(expert.probs(s)) {
                    *o += w * p;
                }
            }
        }
    }
    StationaryPolicy::from_weights(aug.n_states(), na, &probs).expect("mixture of valid rows")
}

/// Mismatch bound under stochastic observation delays:
/// `|V^pi_check(x) - V^pi~(x)| <= L_Q~ L_pi L_T (n_bar_x + d) / (1 - gamma)`,
/// with `pi~` the mixture trained for the constant delay `d`, `pi_check` the
/// mixture adapted to the effective delay, and `n_bar_x` the discounted mean
/// effective delay from `x` under `pi_check`.
///
/// Reports the reachable state with the smallest slack.
pub fn stochastic_delay_bound_check(
    mdp: &FiniteMdp,
    zeta: &[f64],
    d_trained: usize,
    expert: &StationaryPolicy,
) -> Result<BoundReport> {
    let gamma = check_discount(mdp)?;
    let aug = augment_stochastic(mdp, zeta)?;
    let Layout::Stochastic { d_max, .. } = aug.layout else {
        unreachable!("stochastic layout")
    };
    if d_trained > d_max {
        return Err(Error::InvalidParameter(format!(
            "trained delay {d_trained} exceeds the largest delay {d_max}"
        )));
    }
    let consts = lipschitz_constants(mdp, Some(expert), None)?;
    let l_pi = consts.l_pi.expect("policy supplied");
    let trained = fixed_delay_mixture(&aug, expert, d_trained);
    let adapted = aug.belief_mixture(expert);
    let (v_trained, _) = policy_evaluation_discounted(&aug.mdp, &trained)?;
    let (v_adapted, _) = policy_evaluation_discounted(&aug.mdp, &adapted)?;
    let na = mdp.n_actions();
    let l_q = q_action_lipschitz(&q_values(&aug.mdp, &v_trained), na, &index_actions(na));

    // n_bar = (1 - gamma) (I - gamma P)^{-1} n under the adapted policy
    let n = aug.n_states();
    let chain = aug.mdp.chain(&adapted);
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = f64::from(u8::from(i == j)) - gamma * chain[i * n + j];
        }
    }
    let delays: Vec<f64> = (0..n)
        .map(|x| (1.0 - gamma) * aug.state(x).effective_delay.unwrap_or(0) as f64)
        .collect();
    let n_bar = solve(n, &a, &delays)?;

    let reach = reachable_from_initial(&aug.mdp);
    let scale = l_q * l_pi * consts.l_t / (1.0 - gamma);
    let mut report: Option<BoundReport> = None;
    for x in (0..n).filter(|&x| reach[x]) {
        let lhs = (v_adapted[x] - v_trained[x]).abs();
        let rhs = scale * (n_bar[x] + d_trained as f64);
        if report.as_ref().is_none_or(|r| rhs - lhs < r.slack) {
            report = Some(BoundReport::new(
                lhs,
                rhs,
                &[
                    ("l_q", l_q),
                    ("l_pi", l_pi),
                    ("l_t", consts.l_t),
                    ("mean_delay", n_bar[x]),
                    ("trained_delay", d_trained as f64),
                ],
            ));
        }
    }
    Ok(report.expect("initial states are reachable"))
}

/// Attainable-return intervals over deterministic augmented policies at two delays.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeReport {
    /// `(worst, best)` at the smaller delay.
    pub shorter: (f64, f64),
    /// `(worst, best)` at the larger delay.
    pub longer: (f64, f64),
    /// Longer interval inside the shorter one (within `1e-9`).
    pub contained: bool,
}

/// Interval shrinkage: `[worst, best]` at `d2` lies inside `[worst, best]` at `d1`.
///
/// Uses executed-action rewards, so the uniformly drawn initial actions count
/// toward the return at every delay.
pub fn variance_range_check(
    mdp: &FiniteMdp,
    d1: usize,
    d2: usize,
    cap: f64,
) -> Result<RangeReport> {
    if d1 > d2 {
        return Err(Error::InvalidParameter(format!(
            "need d1 <= d2, got {d1} > {d2}"
        )));
    }
    let range = |d: usize| -> Result<(f64, f64)> {
        let aug = augment_constant(mdp, d)?;
        let class = PolicyClass::for_augmented(&aug, PolicyClassKind::Augmented);
        let res = brute_force_optimal(&aug.mdp, &class, Criterion::Discounted, cap)?;
        Ok((res.worst, res.best))
    };
    let shorter = range(d1)?;
    let longer = range(d2)?;
    let contained = longer.0 >= shorter.0 - 1e-9 && longer.1 <= shorter.1 + 1e-9;
    Ok(RangeReport {
        shorter,
        longer,
        contained,
    })
}

/// Optimal return at `d2` (lhs) against the optimal return at `d1` (rhs);
/// delays never help, so `slack >= 0` when `d1 <= d2`.
pub fn monotonicity_check(mdp: &FiniteMdp, d1: usize, d2: usize, tol: f64) -> Result<BoundReport> {
    let opt = |d: usize| -> Result<f64> {
        let vals = delayed_value_iteration(mdp, d, RewardForm::Executed, tol)?;
        let block = vals.values.len() / mdp.n_states();
        Ok(vals
            .values
            .chunks(block)
            .zip(mdp.initial_dist())
            .map(|(row, &w)| w * row.iter().sum::<f64>() / block as f64)
            .sum())
    };
    let (j1, j2) = (opt(d1)?, opt(d2)?);
    Ok(BoundReport::new(
        j2,
        j1,
        &[("d1", d1 as f64), ("d2", d2 as f64)],
    ))
}

/// Lower bound on the delayed loss in the discretized Gaussian-drift problem.
///
/// The undelayed optimum is `0` everywhere, and any `d`-delayed policy faces a
/// belief with standard deviation `sigma sqrt(d)`, which costs at least
/// `sqrt(2/pi) L_Q L_pi sigma sqrt(d)` per step. On the grid, states are
/// rounded by at most half a step, which can recover at most
/// `L_Q L_pi h / 2` per step. The report compares the optimal delayed value
/// from the centre with a centred buffer (lhs) against
/// `-(sqrt(2/pi) sigma sqrt(d) - h/2) L_Q L_pi / (1 - gamma)` (rhs).
pub fn lower_bound_check(
    l_pi: f64,
    l_q: f64,
    sigma: f64,
    grid: DriftGrid,
    d: usize,
    discount: f64,
    tol: f64,
) -> Result<BoundReport> {
    let mdp = gaussian_drift_discretized(l_pi, l_q, sigma, grid, discount)?;
    let vals = delayed_value_iteration(&mdp, d, RewardForm::Expected, tol)?;
    let centre = grid.half_width;
    let x0 = vals.index(centre, &vec![centre; d]);
    let lhs = vals.values[x0];
    let per_step =
        (2.0 / std::f64::consts::PI).sqrt() * sigma * (d as f64).sqrt() - 0.5 * grid.step;
    let rhs = -l_q * l_pi * per_step / (1.0 - discount);
    Ok(BoundReport::new(
        lhs,
        rhs,
        &[
            ("l_q", l_q),
            ("l_pi", l_pi),
            ("sigma", sigma),
            ("step", grid.step),
            ("delay", d as f64),
        ],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{random_mdp, tlc_random};
    use crate::mdp::{occupancy, value_iteration, OccupancyKind};
    use crate::util::trial_rng;

    /// Classical identity on the undelayed MDP, coded from occupancies over pairs:
    /// `J(pi') - J(pi) = 1/(1-gamma) E_{(s,a) ~ d^pi'} [Q^pi(s,a) - V^pi(s)]`.
    fn classical_pdl(mdp: &FiniteMdp, pi: &StationaryPolicy, pi2: &StationaryPolicy) -> (f64, f64) {
        let (v, j) = policy_evaluation_discounted(mdp, pi).unwrap();
        let (_, j2) = policy_evaluation_discounted(mdp, pi2).unwrap();
        let q = q_values(mdp, &v);
        let occ = occupancy(mdp, pi2, OccupancyKind::Discounted).unwrap();
        let na = mdp.n_actions();
        let adv: f64 = occ
            .weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * (q[i] - v[i / na]))
            .sum();
        (j2 - j, adv / (1.0 - mdp.discount()))
    }

    #[test]
    fn zero_delay_reduces_to_classical_identity() {
        let mut rng = trial_rng(81, 0);
        for _ in 0..10 {
            let mdp = random_mdp(4, 3, 0.0, &mut rng).unwrap();
            let pi = StationaryPolicy::random(4, 3, &mut rng);
            let pi2 = StationaryPolicy::random(4, 3, &mut rng);
            let (lhs, rhs) = classical_pdl(&mdp, &pi, &pi2);
            assert!((lhs - rhs).abs() < 1e-10);
            let rep = delayed_pdl_check(&mdp, 0, &pi, &pi2).unwrap();
            assert!(rep.constants["residual"] < 1e-10);
            // initial-distribution average of the per-state identity is the classical one
            let (v, _) = policy_evaluation_discounted(&mdp, &pi).unwrap();
            let (v2, _) = policy_evaluation_discounted(&mdp, &pi2).unwrap();
            let avg: f64 = (0..4).map(|s| mdp.initial_dist()[s] * (v[s] - v2[s])).sum();
            assert!((avg + lhs).abs() < 1e-10);
        }
    }

    #[test]
    fn delayed_identity_holds_on_random_instances() {
        let mut rng = trial_rng(82, 0);
        for d in 1..=2 {
            let mdp = random_mdp(4, 2, 0.0, &mut rng).unwrap();
            let pi = StationaryPolicy::random(4, 2, &mut rng);
            let n = 4 * 2usize.pow(d as u32);
            let delayed = StationaryPolicy::random(n, 2, &mut rng);
            let rep = delayed_pdl_check(&mdp, d, &pi, &delayed).unwrap();
            assert!(rep.constants["residual"] < 1e-8, "{rep:?}");
        }
    }

    #[test]
    fn belief_mixture_on_deterministic_mdp_has_zero_gap() {
        // ring: action 0 stays, action 1 moves right
        let ns = 4;
        let mut t = vec![0.0; ns * 2 * ns];
        for s in 0..ns {
            t[(s * 2) * ns + s] = 1.0;
            t[(s * 2 + 1) * ns + (s + 1) % ns] = 1.0;
        }
        let r = vec![0.1, 0.5, 0.9, 0.2, 0.3, 0.7, 0.4, 0.8];
        let mdp = FiniteMdp::new(ns, 2, t, r, vec![0.25; 4], 0.9)
            .unwrap()
            .with_coords((0..ns).map(|s| vec![s as f64]).collect())
            .unwrap();
        let (_, pi) = value_iteration(&mdp, 1e-12).unwrap();
        let aug = expected_reward_augmentation(&mdp, 2).unwrap();
        let mix = aug.belief_mixture(&pi);
        let rep = delayed_pdl_check(&mdp, 2, &pi, &mix).unwrap();
        assert!(rep.lhs.abs() < 1e-9 && rep.rhs.abs() < 1e-9);
    }

    #[test]
    fn identity_dynamics_give_zero_tlc_bound() {
        let mut rng = trial_rng(83, 0);
        let mdp = tlc_random(5, 2, 0.0, &mut rng).unwrap();
        let (_, pi) = value_iteration(&mdp, 1e-12).unwrap();
        let rep = tlc_bound_check(&mdp, 2, &pi).unwrap();
        assert_eq!(rep.rhs, 0.0);
        assert!(rep.lhs <= 1e-9);
    }

    #[test]
    fn tlc_bound_holds_on_random_fixtures() {
        let mut rng = trial_rng(84, 0);
        for d in 1..=3 {
            for _ in 0..5 {
                let mdp = tlc_random(5, 2, 0.5, &mut rng).unwrap();
                let (_, pi) = value_iteration(&mdp, 1e-12).unwrap();
                let rep = tlc_bound_check(&mdp, d, &pi).unwrap();
                assert!(rep.slack >= -1e-9, "{rep:?}");
            }
        }
    }

    #[test]
    fn stochastic_bound_is_tight_at_trained_delay() {
        let mut rng = trial_rng(85, 0);
        let mdp = tlc_random(4, 2, 0.5, &mut rng).unwrap();
        let (_, pi) = value_iteration(&mdp, 1e-12).unwrap();
        let rep = stochastic_delay_bound_check(&mdp, &[0.0, 0.0, 1.0], 2, &pi).unwrap();
        assert!(rep.lhs < 1e-12, "{rep:?}");
        let rep = stochastic_delay_bound_check(&mdp, &[0.25; 4], 2, &pi).unwrap();
        assert!(rep.slack >= -1e-9, "{rep:?}");
    }

    #[test]
    fn range_intervals_shrink_with_delay() {
        let mut rng = trial_rng(86, 0);
        for _ in 0..5 {
            let mdp = random_mdp(3, 2, 0.0, &mut rng).unwrap();
            assert!(variance_range_check(&mdp, 0, 1, 1e7).unwrap().contained);
            assert!(variance_range_check(&mdp, 1, 2, 1e7).unwrap().contained);
            let rep = monotonicity_check(&mdp, 0, 2, 1e-12).unwrap();
            assert!(rep.slack >= -1e-9);
        }
    }

    #[test]
    fn control_free_mdp_has_degenerate_range() {
        let t = vec![0.3, 0.7, 0.3, 0.7, 0.6, 0.4, 0.6, 0.4];
        let r = vec![0.2, 0.2, 0.9, 0.9];
        let mdp = FiniteMdp::new(2, 2, t, r, vec![0.5, 0.5], 0.9).unwrap();
        let rep = variance_range_check(&mdp, 1, 1, 1e7).unwrap();
        assert_eq!(rep.shorter, rep.longer);
        assert!((rep.longer.1 - rep.longer.0).abs() < 1e-12);
    }

    #[test]
    fn drift_lower_bound_holds() {
        let grid = DriftGrid {
            step: 0.25,
            half_width: 16,
        };
        let undelayed = lower_bound_check(1.0, 1.0, 1.0, grid, 0, 0.9, 1e-10).unwrap();
        assert!(undelayed.lhs.abs() < 1e-9);
        let rep = lower_bound_check(1.0, 1.0, 1.0, grid, 1, 0.9, 1e-10).unwrap();
        assert!(rep.slack >= 0.0, "{rep:?}");
    }
}
