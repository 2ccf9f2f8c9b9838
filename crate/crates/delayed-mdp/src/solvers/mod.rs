//! Exact oracles over delayed processes: brute-force optima over restricted
//! policy classes, structure-exploiting delayed value iteration, and exact
//! evaluation of both sides of the delayed performance bounds.

mod bounds;
mod delayed_vi;

pub use bounds::{
    delayed_pdl_check, lower_bound_check, monotonicity_check, stochastic_delay_bound_check,
    tlc_bound_check, variance_range_check, RangeReport,
};
pub use delayed_vi::{delayed_value_iteration, DelayedValues};

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::delay::AugmentedMdp;
use crate::error::{Error, Result};
use crate::mdp::graph::reachable_from_initial;
use crate::mdp::{gain_from_initial, policy_evaluation_discounted, FiniteMdp, StationaryPolicy};
use crate::util::l1;

/// Default cap on the number of enumerated deterministic policies.
pub const DEFAULT_POLICY_CAP: f64 = 1e7;

/// L1 tolerance under which two beliefs are treated as identical.
pub const BELIEF_TOL: f64 = 1e-9;

/// Two sides of an inequality or identity, with the constants used.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub slack: f64,
    pub constants: BTreeMap<String, f64>,
}

impl BoundReport {
    pub fn new(lhs: f64, rhs: f64, constants: &[(&str, f64)]) -> Self {
        let constants = constants.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        Self {
            lhs,
            rhs,
            slack: rhs - lhs,
            constants,
        }
    }
}

/// Which deterministic policies are enumerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyClassKind {
    /// Any function of the augmented state.
    Augmented,
    /// Constant on augmented states sharing the same belief.
    BeliefClass,
    /// Function of the last observed state only.
    Memoryless,
}

/// Deterministic policy class over the reachable states of an MDP.
///
/// Reachable states are split into decision groups, each receiving one
/// action, and `fixed` states whose choice cannot affect the process (they
/// play action 0). Unreachable states also play action 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyClass {
    pub kind: PolicyClassKind,
    pub n_states: usize,
    pub n_actions: usize,
    pub groups: Vec<Vec<usize>>,
    pub fixed: Vec<usize>,
}

impl PolicyClass {
    /// Class over an augmented MDP; action-irrelevant states are pruned.
    pub fn for_augmented(aug: &AugmentedMdp, kind: PolicyClassKind) -> Self {
        let reach = reachable_from_initial(&aug.mdp);
        let mut fixed = Vec::new();
        let mut decision = Vec::new();
        for idx in (0..aug.n_states()).filter(|&i| reach[i]) {
            if aug.action_relevant(idx) {
                decision.push(idx);
            } else {
                fixed.push(idx);
            }
        }
        let groups = match kind {
            PolicyClassKind::Augmented => decision.into_iter().map(|i| vec![i]).collect(),
            PolicyClassKind::BeliefClass => {
                let mut groups: Vec<Vec<usize>> = Vec::new();
                let mut reps: Vec<Vec<f64>> = Vec::new();
                for idx in decision {
                    let b = aug.belief(idx).probs;
                    match reps.iter().position(|r| l1(r, &b) <= BELIEF_TOL) {
                        Some(k) => groups[k].push(idx),
                        None => {
                            reps.push(b);
                            groups.push(vec![idx]);
                        }
                    }
                }
                groups
            }
            PolicyClassKind::Memoryless => {
                let mut by_state: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
                for idx in decision {
                    by_state
                        .entry(aug.state(idx).last_state)
                        .or_default()
                        .push(idx);
                }
                by_state.into_values().collect()
            }
        };
        Self {
            kind,
            n_states: aug.n_states(),
            n_actions: aug.mdp.n_actions(),
            groups,
            fixed,
        }
    }

    /// Unrestricted deterministic class over the reachable states of a plain MDP.
    pub fn for_mdp(mdp: &FiniteMdp) -> Self {
        let reach = reachable_from_initial(mdp);
        Self {
            kind: PolicyClassKind::Augmented,
            n_states: mdp.n_states(),
            n_actions: mdp.n_actions(),
            groups: (0..mdp.n_states())
                .filter(|&s| reach[s])
                .map(|s| vec![s])
                .collect(),
            fixed: Vec::new(),
        }
    }

    /// Number of member policies, as a float to avoid overflow.
    pub fn size(&self) -> f64 {
        (self.n_actions as f64).powi(self.groups.len() as i32)
    }

    /// Member with the given index; group 0 is the most significant digit,
    /// so index order is lexicographic order of the group actions.
    pub fn policy(&self, mut index: u64) -> StationaryPolicy {
        let na = self.n_actions as u64;
        let mut actions = vec![0usize; self.n_states];
        for group in self.groups.iter().rev() {
            let a = (index % na) as usize;
            index /= na;
            for &s in group {
                actions[s] = a;
            }
        }
        StationaryPolicy::deterministic(&actions, self.n_actions)
    }
}

/// How a policy is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// `d0 . V` with the MDP's discount.
    Discounted,
    /// `d0 . g`: long-run average reward from the initial distribution.
    AverageFromInitial,
}

/// Extremes over a policy class.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub best: f64,
    pub worst: f64,
    pub argmax: StationaryPolicy,
    pub evaluated: u64,
}

/// Score of one policy under the criterion.
pub fn policy_score(
    mdp: &FiniteMdp,
    policy: &StationaryPolicy,
    criterion: Criterion,
) -> Result<f64> {
    match criterion {
        Criterion::Discounted => Ok(policy_evaluation_discounted(mdp, policy)?.1),
        Criterion::AverageFromInitial => gain_from_initial(mdp, policy),
    }
}

/// Exact best and worst scores over a deterministic class by exhaustive
/// evaluation; ties go to the lowest policy index.
pub fn brute_force_optimal(
    mdp: &FiniteMdp,
    class: &PolicyClass,
    criterion: Criterion,
    cap: f64,
) -> Result<BruteForceResult> {
    if class.n_states != mdp.n_states() || class.n_actions != mdp.n_actions() {
        return Err(Error::DimensionMismatch("policy class vs MDP".into()));
    }
    let count = class.size();
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    let count = count as u64;
    // (best value, best index, worst value, worst index)
    type Acc = (f64, u64, f64, u64);
    let merge = |a: Acc, b: Acc| -> Acc {
        let best = if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
            (b.0, b.1)
        } else {
            (a.0, a.1)
        };
        let worst = if b.2 < a.2 || (b.2 == a.2 && b.3 < a.3) {
            (b.2, b.3)
        } else {
            (a.2, a.3)
        };
        (best.0, best.1, worst.0, worst.1)
    };
    let identity = || (f64::NEG_INFINITY, u64::MAX, f64::INFINITY, u64::MAX);
    let (best, best_idx, worst, _) = (0..count)
        .into_par_iter()
        .map(|i| policy_score(mdp, &class.policy(i), criterion).map(|v| (v, i, v, i)))
        .try_reduce(identity, |a, b| Ok(merge(a, b)))?;
    Ok(BruteForceResult {
        best,
        worst,
        argmax: class.policy(best_idx),
        evaluated: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::augment_constant;
    use crate::fixtures::{belief_counterexample, random_mdp};
    use crate::util::{dot, trial_rng};

    #[test]
    fn belief_counterexample_optima() {
        let fx = belief_counterexample();
        let aug = augment_constant(&fx.mdp, fx.delay).unwrap();
        let full = PolicyClass::for_augmented(&aug, PolicyClassKind::Augmented);
        let res = brute_force_optimal(
            &aug.mdp,
            &full,
            Criterion::AverageFromInitial,
            DEFAULT_POLICY_CAP,
        )
        .unwrap();
        assert!(
            (res.best - fx.expected_augmented).abs() < 1e-9,
            "{}",
            res.best
        );
        let belief = PolicyClass::for_augmented(&aug, PolicyClassKind::BeliefClass);
        let res_b = brute_force_optimal(
            &aug.mdp,
            &belief,
            Criterion::AverageFromInitial,
            DEFAULT_POLICY_CAP,
        )
        .unwrap();
        assert!(
            (res_b.best - fx.expected_belief).abs() < 1e-9,
            "{}",
            res_b.best
        );
        let memoryless = PolicyClass::for_augmented(&aug, PolicyClassKind::Memoryless);
        let res_m = brute_force_optimal(
            &aug.mdp,
            &memoryless,
            Criterion::AverageFromInitial,
            DEFAULT_POLICY_CAP,
        )
        .unwrap();
        assert!(res_m.best <= res_b.best + 1e-12);
    }

    #[test]
    fn singleton_class_has_equal_extremes() {
        let mdp = random_mdp(3, 1, 0.0, &mut trial_rng(3, 0)).unwrap();
        let class = PolicyClass::for_mdp(&mdp);
        assert_eq!(class.size(), 1.0);
        let res = brute_force_optimal(&mdp, &class, Criterion::Discounted, 10.0).unwrap();
        assert_eq!(res.best, res.worst);
    }

    #[test]
    fn cap_is_enforced() {
        let mdp = random_mdp(5, 3, 0.0, &mut trial_rng(4, 0)).unwrap();
        let class = PolicyClass::for_mdp(&mdp);
        assert!(matches!(
            brute_force_optimal(&mdp, &class, Criterion::Discounted, 100.0),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn unrestricted_brute_force_matches_value_iteration() {
        let mut rng = trial_rng(5, 0);
        for _ in 0..10 {
            let mdp = random_mdp(4, 2, 0.2, &mut rng).unwrap();
            let res = brute_force_optimal(
                &mdp,
                &PolicyClass::for_mdp(&mdp),
                Criterion::Discounted,
                1e4,
            )
            .unwrap();
            let (v, _) = crate::mdp::value_iteration(&mdp, 1e-13).unwrap();
            assert!((res.best - dot(mdp.initial_dist(), &v)).abs() < 1e-10);
            let (w, _) = crate::mdp::worst_value_iteration(&mdp, 1e-13).unwrap();
            assert!((res.worst - dot(mdp.initial_dist(), &w)).abs() < 1e-10);
        }
    }

    #[test]
    fn class_inclusion_orders_optima() {
        let mut rng = trial_rng(6, 0);
        for _ in 0..10 {
            let mdp = random_mdp(3, 2, 0.0, &mut rng).unwrap();
            let aug = augment_constant(&mdp, 1).unwrap();
            let best = |kind| {
                let class = PolicyClass::for_augmented(&aug, kind);
                brute_force_optimal(&aug.mdp, &class, Criterion::Discounted, 1e6)
                    .unwrap()
                    .best
            };
            let a = best(PolicyClassKind::Augmented);
            let b = best(PolicyClassKind::BeliefClass);
            let m = best(PolicyClassKind::Memoryless);
            assert!(a >= b - 1e-12 && b >= m - 1e-12, "{a} {b} {m}");
        }
    }

    #[test]
    fn groups_partition_reachable_states() {
        let fx = belief_counterexample();
        let aug = augment_constant(&fx.mdp, 2).unwrap();
        let reach = reachable_from_initial(&aug.mdp);
        for kind in [
            PolicyClassKind::Augmented,
            PolicyClassKind::BeliefClass,
            PolicyClassKind::Memoryless,
        ] {
            let class = PolicyClass::for_augmented(&aug, kind);
            let mut seen = vec![0; aug.n_states()];
            for &s in class.groups.iter().flatten().chain(&class.fixed) {
                seen[s] += 1;
            }
            for s in 0..aug.n_states() {
                assert_eq!(seen[s], usize::from(reach[s]));
            }
        }
    }
}
