//! Verification campaigns: one random instance per trial, each checked
//! exactly (or by Monte Carlo for the estimator suites).

use clap::ValueEnum;
use delayed_mdp::delay::{augment_mtd, homogeneous_pmm_kernels, DelaySpec};
use delayed_mdp::fixtures::{maze_3x3, random_mdp, tlc_random, MazeConfig};
use delayed_mdp::mdp::graph::{diameter, is_communicating};
use delayed_mdp::mdp::{multichain_gain, value_iteration};
use delayed_mdp::polis::{
    bias_bound_check, coverage_check, renyi_discrete_check, variance_check, EstimatorConfig,
    HyperPolicy, LinearDriftBandit,
};
use delayed_mdp::solvers::{
    delayed_pdl_check, monotonicity_check, stochastic_delay_bound_check, tlc_bound_check,
    variance_range_check, BoundReport, DEFAULT_POLICY_CAP,
};
use delayed_mdp::util::{dirichlet_ones, trial_rng};
use delayed_mdp::StationaryPolicy;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Pdl,
    Tlc,
    Monotonicity,
    VarianceRange,
    StochasticDelay,
    Psm,
    Communicating,
    Diameter,
    Bias,
    Variance,
    Coverage,
    Renyi,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Pdl => "pdl",
            Suite::Tlc => "tlc",
            Suite::Monotonicity => "monotonicity",
            Suite::VarianceRange => "variance-range",
            Suite::StochasticDelay => "stochastic-delay",
            Suite::Psm => "psm",
            Suite::Communicating => "communicating",
            Suite::Diameter => "diameter",
            Suite::Bias => "bias",
            Suite::Variance => "variance",
            Suite::Coverage => "coverage",
            Suite::Renyi => "renyi",
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            Suite::Bias | Suite::Variance | Suite::Coverage => 4,
            Suite::Diameter => 3,
            _ => 100,
        }
    }

    /// Monte Carlo replications per trial, for the estimator suites.
    pub fn default_reps(self) -> usize {
        match self {
            Suite::Coverage => 2000,
            _ => 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteParams {
    pub seed: u64,
    pub delta: f64,
    pub reps: usize,
}

/// One checked instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub trial: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub violated: bool,
}

impl TrialRow {
    fn from_report(trial: usize, r: &BoundReport, tol: f64) -> Self {
        Self {
            trial,
            lhs: r.lhs,
            rhs: r.rhs,
            slack: r.slack,
            violated: !(r.slack >= -tol),
        }
    }

    /// `lhs <= rhs` checked exactly.
    fn at_most(trial: usize, lhs: f64, rhs: f64) -> Self {
        Self {
            trial,
            lhs,
            rhs,
            slack: rhs - lhs,
            violated: !(lhs <= rhs),
        }
    }
}

const BOUND_TOL: f64 = 1e-9;

fn drift_setup(stationary: bool) -> (LinearDriftBandit, HyperPolicy) {
    let (drift, offset, rho) = if stationary {
        (0.0, 0.2, vec![0.3, 0.0, 0.0])
    } else {
        (0.01, 0.0, vec![0.0, 0.5, 0.5])
    };
    let env = LinearDriftBandit::new(offset, drift, 1.0, 0.5, 0);
    let hp = HyperPolicy::new(1, vec![0.1], vec![1.0])
        .and_then(|h| h.with_rho(rho))
        .expect("valid hyper-policy");
    (env, hp)
}

fn run_trial(
    suite: Suite,
    trial: usize,
    p: &SuiteParams,
    rng: &mut ChaCha8Rng,
) -> delayed_mdp::Result<TrialRow> {
    Ok(match suite {
        Suite::Pdl => {
            let ns = rng.random_range(2..=5);
            let d = rng.random_range(0..=2);
            let mdp = random_mdp(ns, 3, 0.2, rng)?;
            let pi = StationaryPolicy::random(ns, 3, rng);
            let delayed = StationaryPolicy::random(ns * 3usize.pow(d as u32), 3, rng);
            let r = delayed_pdl_check(&mdp, d, &pi, &delayed)?;
            TrialRow::at_most(trial, r.constants["residual"], 1e-8)
        }
        Suite::Tlc => {
            let l_t = rng.random_range(0.1..1.0);
            let mdp = tlc_random(5, 2, l_t, rng)?;
            let (_, expert) = value_iteration(&mdp, 1e-12)?;
            // every fixture at each delay; the tightest report stands for the trial
            let mut worst: Option<BoundReport> = None;
            for d in 1..=3 {
                let r = tlc_bound_check(&mdp, d, &expert)?;
                if worst.as_ref().is_none_or(|w| r.slack < w.slack) {
                    worst = Some(r);
                }
            }
            TrialRow::from_report(trial, &worst.expect("three delays checked"), BOUND_TOL)
        }
        Suite::StochasticDelay => {
            let l_t = rng.random_range(0.1..1.0);
            let mdp = tlc_random(5, 2, l_t, rng)?;
            let (_, expert) = value_iteration(&mdp, 1e-12)?;
            TrialRow::from_report(
                trial,
                &stochastic_delay_bound_check(&mdp, &[0.25; 4], 2, &expert)?,
                BOUND_TOL,
            )
        }
        Suite::Monotonicity => {
            let (d1, d2) = if trial.is_multiple_of(2) {
                (0, 1)
            } else {
                (1, 2)
            };
            let mdp = random_mdp(3, 2, 0.3, rng)?;
            TrialRow::from_report(trial, &monotonicity_check(&mdp, d1, d2, 1e-12)?, BOUND_TOL)
        }
        Suite::VarianceRange => {
            let (d1, d2) = if trial.is_multiple_of(2) {
                (0, 1)
            } else {
                (1, 2)
            };
            let mdp = random_mdp(3, 2, 0.3, rng)?;
            let r = variance_range_check(&mdp, d1, d2, DEFAULT_POLICY_CAP)?;
            let (lhs, rhs) = (r.longer.1 - r.longer.0, r.shorter.1 - r.shorter.0);
            let slack = (r.longer.0 - r.shorter.0).min(r.shorter.1 - r.longer.1);
            TrialRow {
                trial,
                lhs,
                rhs,
                slack,
                violated: !r.contained,
            }
        }
        Suite::Psm => {
            let mdp = random_mdp(3, 2, 0.3, rng)?;
            let pi = StationaryPolicy::random(3, 2, rng);
            let lambda = dirichlet_ones(3, rng);
            let base = multichain_gain(&mdp, &pi)?[0];
            let kernels = homogeneous_pmm_kernels(&mdp, &pi, 2);
            let mut worst: f64 = 0.0;
            for spec in [
                DelaySpec::MtdPsm {
                    lambda: lambda.clone(),
                },
                DelaySpec::MtdPmm { lambda, kernels },
            ] {
                let aug = augment_mtd(&mdp, &spec)?;
                for g in multichain_gain(&aug.mdp, &aug.lift_memoryless(&pi))? {
                    worst = worst.max((g - base).abs());
                }
            }
            TrialRow::at_most(trial, worst, 1e-9)
        }
        Suite::Communicating => {
            let mdp = random_mdp(3, 2, 0.3, rng)?;
            let lambda = dirichlet_ones(3, rng);
            let aug = augment_mtd(&mdp, &DelaySpec::MtdIsm { lambda })?;
            let ok = is_communicating(&mdp) && is_communicating(&aug.mdp);
            let slack = if ok { 1.0 } else { -1.0 };
            TrialRow {
                trial,
                lhs: 0.0,
                rhs: slack,
                slack,
                violated: !ok,
            }
        }
        Suite::Diameter => {
            let maze = maze_3x3(&MazeConfig::default())?;
            let d_max = 1 + trial % 3;
            let mut lambda = vec![0.0; d_max + 1];
            let w: f64 = rng.random_range(0.1..0.9);
            lambda[0] = 1.0 - w;
            lambda[d_max] = w;
            let aug = augment_mtd(&maze, &DelaySpec::MtdIsm { lambda })?;
            let bound = d_max as f64 - 3.0 + 9f64.ln() / 4f64.ln();
            TrialRow::at_most(trial, bound, diameter(&aug.mdp, 1e-10))
        }
        Suite::Bias => {
            let (env, hp) = drift_setup(false);
            let (alpha, omega) = if trial.is_multiple_of(2) {
                (20, 0.9)
            } else {
                (5, 1.0)
            };
            let cfg = EstimatorConfig {
                alpha,
                beta: 5,
                gamma: 0.9,
                omega,
                ..Default::default()
            };
            TrialRow::from_report(
                trial,
                &bias_bound_check(&env, &hp, &cfg, 100, p.reps, rng)?,
                0.0,
            )
        }
        Suite::Variance => {
            let (env, hp) = drift_setup(trial.is_multiple_of(2));
            let cfg = EstimatorConfig {
                alpha: 20,
                beta: 5,
                gamma: 0.9,
                omega: 0.9,
                ..Default::default()
            };
            TrialRow::from_report(
                trial,
                &variance_check(&env, &hp, &cfg, 100, p.reps, rng)?,
                0.0,
            )
        }
        Suite::Coverage => {
            let (env, hp) = drift_setup(true);
            let cfg = EstimatorConfig {
                alpha: 20,
                beta: 5,
                gamma: 0.9,
                omega: 1.0,
                ..Default::default()
            };
            let r = coverage_check(&env, &hp, &cfg, 100, p.reps, p.delta, rng)?;
            let target = 1.0 - p.delta;
            TrialRow {
                trial,
                lhs: target,
                rhs: r.rate,
                slack: r.rate - target,
                violated: !r.passes(0.05),
            }
        }
        Suite::Renyi => TrialRow::from_report(trial, &renyi_discrete_check(rng)?, BOUND_TOL),
    })
}

/// Runs `trials` instances in parallel; rows come back in trial order.
pub fn run_suite(
    suite: Suite,
    trials: usize,
    p: &SuiteParams,
) -> delayed_mdp::Result<Vec<TrialRow>> {
    (0..trials)
        .into_par_iter()
        .map(|i| run_trial(suite, i, p, &mut trial_rng(p.seed, i as u64)))
        .collect()
}
