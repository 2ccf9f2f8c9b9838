//! Lifelong policy optimization through multiple importance sampling.
//!
//! A hyper-policy `nu_rho(theta | t)` draws the policy parameters used at
//! time `t`. From the last `alpha` samples `(t, theta_t, r_t)` the expected
//! return over the next `beta` steps is estimated by reweighting past rewards
//! with mixture importance weights; the estimate plus the discounted return of
//! the window, minus a variance penalty built from pairwise exponential
//! 2-Renyi divergences, is maximized by gradient ascent.
//!
//! The hyper-policy is a diagonal Gaussian with fixed per-dimension standard
//! deviations whose mean follows a Fourier feature map over a fixed
//! frequency grid.

mod checks;
mod env;
mod estimators;
mod lifelong;

pub use checks::{
    bias_bound_check, coverage_check, renyi_discrete_check, simulate_window, variance_check,
    CoverageReport,
};
pub use env::{LifelongEnv, LinearDriftBandit, SineBandit, VasicekTradingEnv};
pub use estimators::{
    bias_bound, bias_bound_general, delay_shifted_estimators, j_behind, j_future_hat,
    mixture_bound, renyi_mixture_bound, surrogate_gradient, surrogate_objective,
    variance_upper_bound, GradientForm,
};
pub use lifelong::{polis_loop, Adam, LoopConfig, PolisRow, PolisRun};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::mdp::metric::DiagGaussian;

/// `(1 - tau^xi) / (1 - tau)` for `tau < 1`, `xi` otherwise.
pub fn c_factor(tau: f64, xi: usize) -> f64 {
    if tau < 1.0 {
        (1.0 - tau.powi(xi as i32)) / (1.0 - tau)
    } else {
        xi as f64
    }
}

/// Gaussian hyper-policy with a Fourier mean path.
///
/// Parameters are stored per policy dimension `i` as
/// `[c_0, a_1, b_1, ..., a_F, b_F]` at offset `i * (1 + 2F)`, giving
/// `m_i(t) = c_0 + sum_j a_j sin(w_j t) + b_j cos(w_j t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperPolicy {
    pub dim_theta: usize,
    pub freqs: Vec<f64>,
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl HyperPolicy {
    /// Zero mean path.
    pub fn new(dim_theta: usize, freqs: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if sigma.len() != dim_theta {
            return Err(Error::DimensionMismatch(format!(
                "{} sigmas for {dim_theta} dimensions",
                sigma.len()
            )));
        }
        if let Some(s) = sigma.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::DegenerateHyperPolicy(format!(
                "sigma {s} must be positive and finite"
            )));
        }
        let rho = vec![0.0; dim_theta * (1 + 2 * freqs.len())];
        Ok(Self {
            dim_theta,
            freqs,
            rho,
            sigma,
        })
    }

    pub fn with_rho(mut self, rho: Vec<f64>) -> Result<Self> {
        if rho.len() != self.rho.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} parameters, got {}",
                self.rho.len(),
                rho.len()
            )));
        }
        self.rho = rho;
        Ok(self)
    }

    pub fn n_features(&self) -> usize {
        1 + 2 * self.freqs.len()
    }

    /// `[1, sin(w_1 t), cos(w_1 t), ...]`.
    pub fn features(&self, t: f64) -> Vec<f64> {
        let mut f = Vec::with_capacity(self.n_features());
        f.push(1.0);
        for &w in &self.freqs {
            f.push((w * t).sin());
            f.push((w * t).cos());
        }
        f
    }

    pub fn mean(&self, t: f64) -> Vec<f64> {
        let f = self.features(t);
        self.rho
            .chunks(f.len())
            .map(|c| c.iter().zip(&f).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn gaussian(&self, t: f64) -> DiagGaussian {
        DiagGaussian {
            mean: self.mean(t),
            std: self.sigma.clone(),
        }
    }

    pub fn log_density(&self, theta: &[f64], t: f64) -> f64 {
        let m = self.mean(t);
        let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        theta
            .iter()
            .zip(&m)
            .zip(&self.sigma)
            .map(|((x, mu), s)| {
                let z = (x - mu) / s;
                -0.5 * z * z - s.ln() - half_log_2pi
            })
            .sum()
    }

    pub fn density(&self, theta: &[f64], t: f64) -> f64 {
        self.log_density(theta, t).exp()
    }

    /// Gradient of `log nu(theta | t)` with respect to `rho`.
    pub fn grad_log_density(&self, theta: &[f64], t: f64) -> Vec<f64> {
        let f = self.features(t);
        let m = self.mean(t);
        let mut g = Vec::with_capacity(self.rho.len());
        for i in 0..self.dim_theta {
            let c = (theta[i] - m[i]) / (self.sigma[i] * self.sigma[i]);
            g.extend(f.iter().map(|phi| c * phi));
        }
        g
    }

    /// Draws `theta = m(t) + sigma * eps`; returns `(theta, eps)`.
    pub fn sample<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let eps: Vec<f64> = (0..self.dim_theta)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        (self.reparameterize(t, &eps), eps)
    }

    pub fn reparameterize(&self, t: f64, eps: &[f64]) -> Vec<f64> {
        self.mean(t)
            .iter()
            .zip(eps)
            .zip(&self.sigma)
            .map(|((m, e), s)| m + s * e)
            .collect()
    }

    /// Euclidean norm of the oscillating coefficients.
    pub fn amplitude(&self) -> f64 {
        let nf = self.n_features();
        self.rho
            .iter()
            .enumerate()
            .filter(|(k, _)| k % nf != 0)
            .map(|(_, v)| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Time-Lipschitz constant of `t -> nu(.|t)` in L1 norm: the L1 distance
    /// between equal-variance Gaussians is at most
    /// `sum_i sqrt(2/pi) |dm_i| / sigma_i`, and `|m_i'| <= sum_j w_j (|a_j| + |b_j|)`.
    pub fn l1_lipschitz(&self) -> f64 {
        let nf = self.n_features();
        (0..self.dim_theta)
            .map(|i| {
                let c = &self.rho[i * nf..(i + 1) * nf];
                let speed: f64 = self
                    .freqs
                    .iter()
                    .enumerate()
                    .map(|(j, w)| w.abs() * (c[1 + 2 * j].abs() + c[2 + 2 * j].abs()))
                    .sum();
                (2.0 / std::f64::consts::PI).sqrt() * speed / self.sigma[i]
            })
            .sum()
    }
}

/// One lifelong interaction step; `eps` is the standard noise behind `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub t: usize,
    pub theta: Vec<f64>,
    pub eps: Vec<f64>,
    pub reward: f64,
}

/// History of consecutive interaction steps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LifelongTrace {
    entries: Vec<TraceEntry>,
}

impl LifelongTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a step; times must increase by one.
    pub fn push(&mut self, entry: TraceEntry) -> Result<()> {
        if let Some(last) = self.entries.last() {
            if entry.t != last.t + 1 {
                return Err(Error::InvalidParameter(format!(
                    "time {} does not follow {}",
                    entry.t, last.t
                )));
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    /// Appends `(t, theta, r)` with zero noise.
    pub fn record(&mut self, t: usize, theta: Vec<f64>, reward: f64) -> Result<()> {
        let eps = vec![0.0; theta.len()];
        self.push(TraceEntry {
            t,
            theta,
            eps,
            reward,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[TraceEntry] {
        &self.entries
    }

    /// Current time `T`.
    pub fn now(&self) -> Option<usize> {
        self.entries.last().map(|e| e.t)
    }

    pub fn at(&self, t: usize) -> Option<&TraceEntry> {
        let first = self.entries.first()?.t;
        t.checked_sub(first).and_then(|i| self.entries.get(i))
    }
}

/// Estimator and surrogate settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// Window length.
    pub alpha: usize,
    /// Lookahead.
    pub beta: usize,
    pub gamma: f64,
    /// Recency discount of past samples.
    pub omega: f64,
    pub lambda_reg: f64,
    pub delta_conf: f64,
    /// Steps between a parameter draw and the reward it produces.
    pub delay: usize,
    pub r_max: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            alpha: 100,
            beta: 20,
            gamma: 1.0,
            omega: 1.0,
            lambda_reg: 0.1,
            delta_conf: 0.2,
            delay: 0,
            r_max: 1.0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 1 || self.beta < 1 {
            return Err(Error::InvalidParameter(
                "alpha and beta must be at least 1".into(),
            ));
        }
        if !(self.omega > 0.0 && self.omega <= 1.0) || !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter(
                "omega must lie in (0,1] and gamma in [0,1]".into(),
            ));
        }
        if self.delay >= self.alpha {
            return Err(Error::WindowTooShort {
                needed: self.delay + 1,
                have: self.alpha,
            });
        }
        if !(self.lambda_reg >= 0.0) || !(self.r_max >= 0.0) {
            return Err(Error::InvalidParameter(
                "lambda_reg and r_max must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Effective window `alpha - delay`.
    pub fn window(&self) -> usize {
        self.alpha - self.delay
    }

    /// Penalty weight matching confidence `delta`: `sqrt((1 - delta)/delta * 2 r_max^2)`.
    pub fn lambda_for_confidence(delta: f64, r_max: f64) -> f64 {
        ((1.0 - delta) / delta * 2.0 * r_max * r_max).sqrt()
    }
}
