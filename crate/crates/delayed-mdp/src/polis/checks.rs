//! Monte Carlo checks of the estimator bias, variance and confidence bounds
//! on synthetic bandits, and of the mixture-divergence bound on discrete
//! distributions.

use rand::Rng;
use statrs::distribution::{Binomial, DiscreteCDF};

use super::env::LinearDriftBandit;
use super::estimators::{
    bias_bound, bias_bound_general, j_behind, j_future_hat, mixture_bound, surrogate_objective,
    variance_upper_bound,
};
use super::{c_factor, EstimatorConfig, HyperPolicy, LifelongTrace, TraceEntry};
use crate::error::{Error, Result};
use crate::mdp::metric::renyi2_discrete;
use crate::solvers::BoundReport;
use crate::util::dirichlet_ones;

fn check_setup(cfg: &EstimatorConfig, now: usize, replications: usize) -> Result<usize> {
    cfg.validate()?;
    if cfg.delay != 0 || replications < 2 || now + 1 < cfg.alpha {
        return Err(Error::InvalidParameter(
            "needs delay 0, two replications and a full window".into(),
        ));
    }
    Ok(now + 1 - cfg.alpha)
}

/// Draws a fresh window `now - alpha + 1 ..= now` from `hp` on `env`.
pub fn simulate_window<R: Rng + ?Sized>(
    env: &LinearDriftBandit,
    hp: &HyperPolicy,
    cfg: &EstimatorConfig,
    now: usize,
    rng: &mut R,
) -> Result<LifelongTrace> {
    let start = check_setup(cfg, now, 2)?;
    let mut trace = LifelongTrace::new();
    for t in start..=now {
        let (theta, eps) = hp.sample(t as f64, rng);
        let reward = env.sample_reward(&theta, t, rng);
        trace.push(TraceEntry {
            t,
            theta,
            eps,
            reward,
        })?;
    }
    Ok(trace)
}

fn mean_and_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (
        mean,
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0),
    )
}

/// Exact `E[J_behind]` (and `E[J_hat]` when `hp` is stationary, where every
/// importance ratio equals `C_gamma(beta) / C_omega(alpha)`).
fn exact_means(
    env: &LinearDriftBandit,
    hp: &HyperPolicy,
    cfg: &EstimatorConfig,
    now: usize,
) -> (f64, Option<f64>) {
    let start = now + 1 - cfg.alpha;
    let c_w = c_factor(cfg.omega, cfg.alpha);
    let mut behind = 0.0;
    let mut weighted = 0.0;
    for t in start..=now {
        let w = cfg.omega.powi((now - t) as i32);
        let m = env.expected_under(&hp.gaussian(t as f64), t);
        behind += w * cfg.gamma.powi((t - start) as i32) * m;
        weighted += w * m;
    }
    let future = (hp.amplitude() == 0.0).then(|| c_factor(cfg.gamma, cfg.beta) * weighted / c_w);
    (behind / c_w, future)
}

/// Monte Carlo bias of the future-return estimator on a drifting bandit
/// against the exact lookahead return, compared with the general bias bound
/// plus three standard errors. Needs `delay = 0`.
pub fn bias_bound_check<R: Rng + ?Sized>(
    env: &LinearDriftBandit,
    hp: &HyperPolicy,
    cfg: &EstimatorConfig,
    now: usize,
    replications: usize,
    rng: &mut R,
) -> Result<BoundReport> {
    check_setup(cfg, now, replications)?;
    let samples = (0..replications)
        .map(|_| j_future_hat(&simulate_window(env, hp, cfg, now, rng)?, hp, cfg))
        .collect::<Result<Vec<_>>>()?;
    let (mean, var) = mean_and_var(&samples);
    let se = (var / replications as f64).sqrt();
    let truth: f64 = (0..cfg.beta)
        .map(|j| {
            cfg.gamma.powi(j as i32)
                * env.expected_under(&hp.gaussian((now + 1 + j) as f64), now + 1 + j)
        })
        .sum();
    let (l_m, l_nu) = (env.drift.abs(), hp.l1_lipschitz());
    let r_max = env.reward_bound(now + cfg.beta);
    let general = bias_bound_general(l_m, l_nu, r_max, cfg);
    let main = bias_bound(l_m, l_nu, r_max, cfg).unwrap_or(f64::NAN);
    Ok(BoundReport::new(
        (mean - truth).abs(),
        general + 3.0 * se,
        &[
            ("bound_general", general),
            ("bound_main", main),
            ("std_error", se),
            ("estimate_mean", mean),
            ("truth", truth),
            ("l_m", l_m),
            ("l_nu", l_nu),
            ("r_max", r_max),
        ],
    ))
}

fn j_bar_samples<R: Rng + ?Sized>(
    env: &LinearDriftBandit,
    hp: &HyperPolicy,
    cfg: &EstimatorConfig,
    now: usize,
    replications: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    (0..replications)
        .map(|_| {
            let trace = simulate_window(env, hp, cfg, now, rng)?;
            Ok(j_future_hat(&trace, hp, cfg)? + j_behind(&trace, cfg)?)
        })
        .collect()
}

/// Empirical variance of `J_hat + J_behind` against the variance bound, with
/// `r_max` taken from the bandit's reward range.
pub fn variance_check<R: Rng + ?Sized>(
    env: &LinearDriftBandit,
    hp: &HyperPolicy,
    cfg: &EstimatorConfig,
    now: usize,
    replications: usize,
    rng: &mut R,
) -> Result<BoundReport> {
    check_setup(cfg, now, replications)?;
    let cfg = EstimatorConfig {
        r_max: env.reward_bound(now),
        ..*cfg
    };
    let samples = j_bar_samples(env, hp, &cfg, now, replications, rng)?;
    let (mean, var) = mean_and_var(&samples);
    let bound = variance_upper_bound(hp, now, &cfg)?;
    Ok(BoundReport::new(
        var,
        bound,
        &[("mean", mean), ("r_max", cfg.r_max)],
    ))
}

/// Outcome of a confidence-coverage experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub delta: f64,
    pub replications: usize,
    pub covered: usize,
    pub rate: f64,
    /// One-sided binomial p-value of observing at most `covered` successes
    /// if the true coverage were exactly `1 - delta`.
    pub p_value: f64,
    /// `E[J_hat + J_behind]` the lower bounds are compared with.
    pub target: f64,
}

impl CoverageReport {
    /// Coverage is not significantly below `1 - delta` at level `alpha`.
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }
}

/// Frequency with which the surrogate at the confidence-matched penalty
/// `lambda = sqrt((1 - delta)/delta 2 r_max^2)` lies below `E[J_hat + J_behind]`.
/// The expectation is exact for stationary `hp`; otherwise it is the mean
/// of an independent batch of the same size.
pub fn coverage_check<R: Rng + ?Sized>(
    env: &LinearDriftBandit,
    hp: &HyperPolicy,
    cfg: &EstimatorConfig,
    now: usize,
    replications: usize,
    delta: f64,
    rng: &mut R,
) -> Result<CoverageReport> {
    check_setup(cfg, now, replications)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence level {delta} outside (0, 1)"
        )));
    }
    let r_max = env.reward_bound(now);
    let lambda_reg = EstimatorConfig::lambda_for_confidence(delta, r_max);
    let cfg = EstimatorConfig {
        r_max,
        lambda_reg,
        delta_conf: delta,
        ..*cfg
    };
    let target = match exact_means(env, hp, &cfg, now) {
        (behind, Some(future)) => behind + future,
        _ => mean_and_var(&j_bar_samples(env, hp, &cfg, now, replications, rng)?).0,
    };
    let mut covered = 0;
    for _ in 0..replications {
        let lower = surrogate_objective(&simulate_window(env, hp, &cfg, now, rng)?, hp, &cfg)?;
        covered += usize::from(target >= lower);
    }
    let binom = Binomial::new(1.0 - delta, replications as u64)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(CoverageReport {
        delta,
        replications,
        covered,
        rate: covered as f64 / replications as f64,
        p_value: binom.cdf(covered as u64),
        target,
    })
}

/// One random instance of the mixture-divergence bound on 3-point
/// distributions: exact `d_2` between the normalized mixtures against
/// `C_omega(alpha) / C_gamma(beta)^2 * B`.
pub fn renyi_discrete_check<R: Rng + ?Sized>(rng: &mut R) -> Result<BoundReport> {
    let alpha = rng.random_range(1..=6);
    let beta = rng.random_range(1..=4);
    let gamma: f64 = rng.random_range(0.3..=1.0);
    let omega: f64 = rng.random_range(0.3..=1.0);
    let future: Vec<Vec<f64>> = (0..beta).map(|_| dirichlet_ones(3, rng)).collect();
    let past: Vec<Vec<f64>> = (0..alpha).map(|_| dirichlet_ones(3, rng)).collect();
    let g: Vec<f64> = (0..beta).map(|j| gamma.powi(j as i32)).collect();
    let w: Vec<f64> = (0..alpha)
        .map(|k| omega.powi((alpha - 1 - k) as i32))
        .collect();
    let b = mixture_bound(&g, &w, |j, k| {
        Ok(renyi2_discrete(&future[j], &past[k])?.ln())
    })?;
    let (c_g, c_w) = (c_factor(gamma, beta), c_factor(omega, alpha));
    let mix = |parts: &[Vec<f64>], weights: &[f64], c: f64| -> Vec<f64> {
        (0..3)
            .map(|i| {
                parts
                    .iter()
                    .zip(weights)
                    .map(|(p, x)| x * p[i])
                    .sum::<f64>()
                    / c
            })
            .collect()
    };
    let exact = renyi2_discrete(&mix(&future, &g, c_g), &mix(&past, &w, c_w))?;
    Ok(BoundReport::new(
        exact,
        c_w / (c_g * c_g) * b,
        &[
            ("alpha", alpha as f64),
            ("beta", beta as f64),
            ("gamma", gamma),
            ("omega", omega),
        ],
    ))
}
