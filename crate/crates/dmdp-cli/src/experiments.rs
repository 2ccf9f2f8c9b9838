//! Reference reproductions: the two counter-examples, UCRL2 on the delayed
//! maze and the lifelong trading / sine-bandit runs.

use clap::ValueEnum;
use delayed_mdp::delay::{augment_constant, augment_mtd, DelaySpec};
use delayed_mdp::fixtures::{belief_counterexample, maze_3x3, mtd_counterexample, MazeConfig};
use delayed_mdp::learners::{ucrl2_run, Ucrl2Config};
use delayed_mdp::mdp::optimal_gain;
use delayed_mdp::polis::{
    polis_loop, EstimatorConfig, HyperPolicy, LifelongEnv, LoopConfig, PolisRun, SineBandit,
    VasicekTradingEnv,
};
use delayed_mdp::solvers::{
    brute_force_optimal, Criterion, PolicyClass, PolicyClassKind, DEFAULT_POLICY_CAP,
};
use delayed_mdp::util::trial_rng;
use rayon::prelude::*;

/// A computed quantity next to its reference value.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub quantity: &'static str,
    pub value: f64,
    pub expected: f64,
}

impl Comparison {
    pub fn error(&self) -> f64 {
        (self.value - self.expected).abs()
    }
}

pub const COUNTEREXAMPLE_TOL: f64 = 1e-9;

/// Optimal augmented and belief-class average returns from the start state.
pub fn belief_comparison() -> delayed_mdp::Result<Vec<Comparison>> {
    let fx = belief_counterexample();
    let aug = augment_constant(&fx.mdp, fx.delay)?;
    let best = |kind| -> delayed_mdp::Result<f64> {
        let class = PolicyClass::for_augmented(&aug, kind);
        Ok(brute_force_optimal(
            &aug.mdp,
            &class,
            Criterion::AverageFromInitial,
            DEFAULT_POLICY_CAP,
        )?
        .best)
    };
    Ok(vec![
        Comparison {
            quantity: "augmented_optimum",
            value: best(PolicyClassKind::Augmented)?,
            expected: fx.expected_augmented,
        },
        Comparison {
            quantity: "belief_class_optimum",
            value: best(PolicyClassKind::BeliefClass)?,
            expected: fx.expected_belief,
        },
    ])
}

/// Optimal gains under the mixed delay and the one-step delay.
pub fn mtd_comparison(epsilon: f64) -> delayed_mdp::Result<Vec<Comparison>> {
    let fx = mtd_counterexample(epsilon)?;
    let gain = |spec: &DelaySpec| -> delayed_mdp::Result<f64> {
        Ok(optimal_gain(&augment_mtd(&fx.mdp, spec)?.mdp, 1e-13)?.0)
    };
    Ok(vec![
        Comparison {
            quantity: "mixed_delay_gain",
            value: gain(&fx.mixed)?,
            expected: fx.expected_mixed,
        },
        Comparison {
            quantity: "one_step_gain",
            value: gain(&fx.one_step)?,
            expected: fx.expected_one_step,
        },
    ])
}

/// Regret statistics across seeds at one recorded step.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretPoint {
    pub lambda: Vec<f64>,
    pub step: u64,
    pub mean_regret: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MazeParams {
    pub lambdas: Vec<Vec<f64>>,
    pub steps: u64,
    pub seeds: usize,
    pub seed: u64,
    /// Record every `every` steps (and the last step).
    pub every: u64,
}

/// Runs UCRL2 on the maze augmented with each lag distribution; seed `k`
/// uses the same random stream for every distribution.
pub fn maze_ucrl2(p: &MazeParams) -> delayed_mdp::Result<(Vec<RegretPoint>, Vec<Vec<f64>>)> {
    let maze = maze_3x3(&MazeConfig::default())?;
    let cfg = Ucrl2Config {
        horizon: p.steps,
        ..Default::default()
    };
    let mut points = Vec::new();
    let mut finals = Vec::new();
    for lambda in &p.lambdas {
        let aug = augment_mtd(
            &maze,
            &DelaySpec::MtdIsm {
                lambda: lambda.clone(),
            },
        )?;
        let traces = (0..p.seeds)
            .into_par_iter()
            .map(|k| ucrl2_run(&aug.mdp, &cfg, &mut trial_rng(p.seed, k as u64)))
            .collect::<delayed_mdp::Result<Vec<_>>>()?;
        let steps = (1..=p.steps).filter(|s| s % p.every.max(1) == 0 || *s == p.steps);
        for step in steps {
            let vals: Vec<f64> = traces.iter().map(|t| t.regret_at(step)).collect();
            let (mean, std) = mean_std(&vals);
            points.push(RegretPoint {
                lambda: lambda.clone(),
                step,
                mean_regret: mean,
                std,
            });
        }
        finals.push(traces.iter().map(|t| t.final_regret()).collect());
    }
    Ok((points, finals))
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolisEnvKind {
    Vasicek,
    SineBandit,
}

impl PolisEnvKind {
    pub fn name(self) -> &'static str {
        match self {
            PolisEnvKind::Vasicek => "vasicek",
            PolisEnvKind::SineBandit => "sine-bandit",
        }
    }

    pub fn default_lambda_reg(self) -> f64 {
        match self {
            PolisEnvKind::Vasicek => 1.0,
            PolisEnvKind::SineBandit => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolisParams {
    pub env: PolisEnvKind,
    pub delay: usize,
    pub seeds: usize,
    pub seed: u64,
    pub lambda_reg: f64,
    pub steps: usize,
}

/// One seed's run with the starting hyper-policy amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: usize,
    pub initial_amplitude: f64,
    pub run: PolisRun,
}

fn preset(p: &PolisParams) -> delayed_mdp::Result<(HyperPolicy, LoopConfig)> {
    let (hp, alpha, step_size) = match p.env {
        PolisEnvKind::Vasicek => (HyperPolicy::new(2, vec![0.05], vec![0.5, 0.5])?, 100, 0.005),
        PolisEnvKind::SineBandit => (
            HyperPolicy::new(1, vec![0.05], vec![0.5])?.with_rho(vec![0.0, 0.3, 0.3])?,
            100,
            0.02,
        ),
    };
    let estimator = EstimatorConfig {
        alpha,
        beta: 20,
        gamma: 1.0,
        omega: 1.0,
        lambda_reg: p.lambda_reg,
        delay: p.delay,
        ..Default::default()
    };
    let cfg = LoopConfig {
        steps: p.steps,
        estimator,
        behavioural_period: alpha,
        step_size,
        ..Default::default()
    };
    Ok((hp, cfg))
}

/// Runs the lifelong loop once per seed; seed `k` fixes both the
/// environment's randomness and the hyper-policy draws.
pub fn polis_runs(p: &PolisParams) -> delayed_mdp::Result<Vec<SeedRun>> {
    let (hp, cfg) = preset(p)?;
    (0..p.seeds)
        .into_par_iter()
        .map(|k| {
            let mut env: Box<dyn LifelongEnv + Send> = match p.env {
                PolisEnvKind::Vasicek => Box::new(VasicekTradingEnv::new(p.delay, k as u64)),
                PolisEnvKind::SineBandit => Box::new(SineBandit::new(1.0, 0.05, 0.0, p.delay)),
            };
            let run = polis_loop(
                env.as_mut(),
                hp.clone(),
                &cfg,
                &mut trial_rng(p.seed, k as u64),
            )?;
            Ok(SeedRun {
                seed: k,
                initial_amplitude: hp.amplitude(),
                run,
            })
        })
        .collect()
}
