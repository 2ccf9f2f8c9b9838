//! The lifelong training loop: act with the hyper-policy, and every few
//! steps re-fit its mean path by gradient ascent on the surrogate.

use rand::Rng;

use super::env::LifelongEnv;
use super::estimators::{
    surrogate_gradient, surrogate_objective, variance_upper_bound, GradientForm,
};
use super::{c_factor, EstimatorConfig, HyperPolicy, LifelongTrace, TraceEntry};
use crate::error::{Error, Result};

/// Adam ascent on a parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(dim: usize, step_size: f64) -> Self {
        Self {
            step_size,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    /// Moves `params` along `grad` (ascent).
    pub fn ascend(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p += self.step_size * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopConfig {
    pub steps: usize,
    pub estimator: EstimatorConfig,
    /// Initial steps played with the starting hyper-policy; at least `alpha`.
    pub behavioural_period: usize,
    pub retrain_period: usize,
    pub epochs: usize,
    pub step_size: f64,
    pub gradient: GradientForm,
    /// Differentiate the window return by re-simulating the environment with
    /// reparameterized past parameters, when the environment supports it.
    pub replay_behind: bool,
    /// Also fit the log standard deviations (by finite differences).
    pub train_sigma: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            estimator: EstimatorConfig::default(),
            behavioural_period: 100,
            retrain_period: 50,
            epochs: 100,
            step_size: 0.01,
            gradient: GradientForm::ScoreFunction,
            replay_behind: false,
            train_sigma: false,
        }
    }
}

/// One played step; the surrogate and variance bound are reported on
/// retraining steps, after the update.
#[derive(Debug, Clone, PartialEq)]
pub struct PolisRow {
    pub t: usize,
    pub theta: Vec<f64>,
    /// Hyper-policy mean the parameters were drawn around.
    pub mean: Vec<f64>,
    pub reward: f64,
    pub retrain: bool,
    pub surrogate_value: Option<f64>,
    pub bound_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolisRun {
    pub rows: Vec<PolisRow>,
    pub hp: HyperPolicy,
}

impl PolisRun {
    pub fn cumulative_reward(&self) -> f64 {
        self.rows.iter().map(|r| r.reward).sum()
    }
}

/// Gradient of the window return through environment replay, by central
/// differences in `rho` with the drawn noise held fixed.
fn replay_gradient<E: LifelongEnv + ?Sized>(
    env: &E,
    trace: &LifelongTrace,
    hp: &HyperPolicy,
    cfg: &EstimatorConfig,
) -> Option<Vec<f64>> {
    let now = trace.now()?;
    let start = now + 1 - cfg.window();
    let first = trace.entries().first()?.t;
    let value = |rho: &[f64]| -> Option<f64> {
        let hp = HyperPolicy {
            rho: rho.to_vec(),
            ..hp.clone()
        };
        let theta_at = |tau: usize| {
            let e = trace.at(tau.max(first)).expect("inside the trace");
            hp.reparameterize(tau as f64, &e.eps)
        };
        let rewards = env.replay(start, now, &theta_at)?;
        let total: f64 = rewards
            .iter()
            .enumerate()
            .map(|(k, r)| cfg.omega.powi((now - start - k) as i32) * cfg.gamma.powi(k as i32) * r)
            .sum();
        Some(total / c_factor(cfg.omega, cfg.window()))
    };
    let h = 1e-5;
    let mut rho = hp.rho.clone();
    let mut g = Vec::with_capacity(rho.len());
    for k in 0..rho.len() {
        let base = rho[k];
        rho[k] = base + h;
        let up = value(&rho)?;
        rho[k] = base - h;
        let dn = value(&rho)?;
        rho[k] = base;
        g.push((up - dn) / (2.0 * h));
    }
    Some(g)
}

fn retrain<E: LifelongEnv + ?Sized>(
    env: &E,
    trace: &LifelongTrace,
    hp: &mut HyperPolicy,
    cfg: &LoopConfig,
) -> Result<()> {
    let est = &cfg.estimator;
    let mut opt = Adam::new(hp.rho.len(), cfg.step_size);
    let mut sigma_opt = Adam::new(hp.sigma.len(), cfg.step_size);
    for _ in 0..cfg.epochs {
        let mut g = surrogate_gradient(trace, hp, est, cfg.gradient)?;
        if cfg.replay_behind {
            if let Some(gb) = replay_gradient(env, trace, hp, est) {
                g.iter_mut().zip(gb).for_each(|(a, b)| *a += b);
            }
        }
        if cfg.train_sigma {
            let h: f64 = 1e-5;
            let mut gs = Vec::with_capacity(hp.sigma.len());
            for i in 0..hp.sigma.len() {
                let mut up = hp.clone();
                up.sigma[i] *= h.exp();
                let mut dn = hp.clone();
                dn.sigma[i] *= (-h).exp();
                gs.push(
                    (surrogate_objective(trace, &up, est)? - surrogate_objective(trace, &dn, est)?)
                        / (2.0 * h),
                );
            }
            let mut log_sigma: Vec<f64> = hp.sigma.iter().map(|s| s.ln()).collect();
            sigma_opt.ascend(&mut log_sigma, &gs);
            hp.sigma = log_sigma.into_iter().map(f64::exp).collect();
        }
        opt.ascend(&mut hp.rho, &g);
        if hp.rho.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateHyperPolicy(
                "parameters diverged during ascent".into(),
            ));
        }
    }
    Ok(())
}

/// Runs the lifelong loop for `cfg.steps` steps starting at time 0.
pub fn polis_loop<E: LifelongEnv + ?Sized, R: Rng + ?Sized>(
    env: &mut E,
    hp: HyperPolicy,
    cfg: &LoopConfig,
    rng: &mut R,
) -> Result<PolisRun> {
    let est = &cfg.estimator;
    est.validate()?;
    if cfg.behavioural_period < est.alpha || cfg.retrain_period == 0 {
        return Err(Error::InvalidParameter(
            "behavioural period must cover the window and the retrain period must be positive"
                .into(),
        ));
    }
    if hp.dim_theta != env.dim_theta() {
        return Err(Error::DimensionMismatch(format!(
            "hyper-policy draws {} parameters, environment takes {}",
            hp.dim_theta,
            env.dim_theta()
        )));
    }
    let mut hp = hp;
    let mut trace = LifelongTrace::new();
    let mut rows = Vec::with_capacity(cfg.steps);
    for t in 0..cfg.steps {
        let mut row_extra = (false, None, None);
        if t >= cfg.behavioural_period && t % cfg.retrain_period == 0 {
            retrain(&*env, &trace, &mut hp, cfg)?;
            let now = t - 1;
            row_extra = (
                true,
                Some(surrogate_objective(&trace, &hp, est)?),
                Some(variance_upper_bound(&hp, now, est)?),
            );
        }
        let mean = hp.mean(t as f64);
        let (theta, eps) = hp.sample(t as f64, rng);
        let reward = env.step(t, &theta).map_err(|e| match e {
            Error::Env { .. } => e,
            other => Error::Env {
                step: t,
                msg: other.to_string(),
            },
        })?;
        trace.push(TraceEntry {
            t,
            theta: theta.clone(),
            eps,
            reward,
        })?;
        let (retrain, surrogate_value, bound_value) = row_extra;
        rows.push(PolisRow {
            t,
            theta,
            mean,
            reward,
            retrain,
            surrogate_value,
            bound_value,
        });
    }
    Ok(PolisRun { rows, hp })
}
