//! Lifelong environments driven by per-step policy parameters.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::mdp::metric::DiagGaussian;

/// An environment queried once per time step with the parameters drawn for it.
pub trait LifelongEnv {
    fn dim_theta(&self) -> usize;

    /// Bound on `|r_t|`; infinite when rewards are unbounded.
    fn r_max(&self) -> f64;

    /// Advances from time `t` (which must be the next unplayed step) under `theta`.
    fn step(&mut self, t: usize, theta: &[f64]) -> Result<f64>;

    /// Recomputes the rewards of the already played steps `start..=end` as if
    /// `theta_at(tau)` had been used at every decision time `tau`, keeping the
    /// exogenous randomness fixed. `None` when the controllable dynamics cannot
    /// be re-simulated.
    fn replay(
        &self,
        _start: usize,
        _end: usize,
        _theta_at: &dyn Fn(usize) -> Vec<f64>,
    ) -> Option<Vec<f64>> {
        None
    }
}

fn expect_step(now: usize, t: usize) -> Result<()> {
    if t != now {
        return Err(Error::Env {
            step: t,
            msg: format!("expected step {now}"),
        });
    }
    Ok(())
}

/// Trading on a mean-reverting rate `x_{t+1} = 0.9 x_t + u_t`, `u_t ~ N(0, 1)`.
///
/// At decision time `tau` the agent sees `x_tau` and commits to
/// `a = tanh(theta_0 x_tau + theta_1)`, which executes `delay` steps later
/// (the first `delay` executed positions are flat). Executing `a_t` from
/// portfolio `p_t = a_{t-1}` earns `a_t (x_{t+1} - x_t) - fee |a_t - p_t|`.
#[derive(Debug, Clone)]
pub struct VasicekTradingEnv {
    pub ar_coefficient: f64,
    pub noise_std: f64,
    pub fee: f64,
    pub delay: usize,
    rates: Vec<f64>,
    pending: VecDeque<f64>,
    portfolio: f64,
    rng: ChaCha8Rng,
}

impl VasicekTradingEnv {
    pub fn new(delay: usize, seed: u64) -> Self {
        Self {
            ar_coefficient: 0.9,
            noise_std: 1.0,
            fee: 1e-5,
            delay,
            rates: vec![0.0],
            pending: std::iter::repeat_n(0.0, delay).collect(),
            portfolio: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn position(theta: &[f64], rate: f64) -> f64 {
        (theta[0] * rate + theta[1]).tanh()
    }

    /// Rate path observed so far, `x_0, ..., x_now`.
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }
}

impl LifelongEnv for VasicekTradingEnv {
    fn dim_theta(&self) -> usize {
        2
    }

    fn r_max(&self) -> f64 {
        f64::INFINITY
    }

    fn step(&mut self, t: usize, theta: &[f64]) -> Result<f64> {
        expect_step(self.rates.len() - 1, t)?;
        if theta.len() != 2 || theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Env {
                step: t,
                msg: format!("bad parameters {theta:?}"),
            });
        }
        let x = self.rates[t];
        self.pending.push_back(Self::position(theta, x));
        let a = self.pending.pop_front().expect("just pushed");
        let u: f64 = self.rng.sample(StandardNormal);
        let next = self.ar_coefficient * x + self.noise_std * u;
        self.rates.push(next);
        let r = a * (next - x) - self.fee * (a - self.portfolio).abs();
        self.portfolio = a;
        Ok(r)
    }

    fn replay(
        &self,
        start: usize,
        end: usize,
        theta_at: &dyn Fn(usize) -> Vec<f64>,
    ) -> Option<Vec<f64>> {
        if end + 1 >= self.rates.len() || start > end {
            return None;
        }
        let executed = |t: usize| match t.checked_sub(self.delay) {
            Some(tau) => Self::position(&theta_at(tau), self.rates[tau]),
            None => 0.0,
        };
        let mut prev = if start == 0 { 0.0 } else { executed(start - 1) };
        let mut out = Vec::with_capacity(end - start + 1);
        for t in start..=end {
            let a = executed(t);
            out.push(a * (self.rates[t + 1] - self.rates[t]) - self.fee * (a - prev).abs());
            prev = a;
        }
        Some(out)
    }
}

/// One-dimensional bandit with a sinusoidal target:
/// `r_t = exp(-(theta_{t-delay} - c_t)^2)`, `c_t = amplitude sin(freq t + phase)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SineBandit {
    pub amplitude: f64,
    pub freq: f64,
    pub phase: f64,
    pub delay: usize,
    played: Vec<f64>,
}

impl SineBandit {
    pub fn new(amplitude: f64, freq: f64, phase: f64, delay: usize) -> Self {
        Self {
            amplitude,
            freq,
            phase,
            delay,
            played: Vec::new(),
        }
    }

    pub fn context(&self, t: usize) -> f64 {
        self.amplitude * (self.freq * t as f64 + self.phase).sin()
    }

    fn reward(&self, theta: Option<f64>, t: usize) -> f64 {
        // before the first delayed parameter arrives the agent plays 0
        let x = theta.unwrap_or(0.0);
        (-(x - self.context(t)).powi(2)).exp()
    }
}

impl LifelongEnv for SineBandit {
    fn dim_theta(&self) -> usize {
        1
    }

    fn r_max(&self) -> f64 {
        1.0
    }

    fn step(&mut self, t: usize, theta: &[f64]) -> Result<f64> {
        expect_step(self.played.len(), t)?;
        let x = *theta.first().ok_or(Error::Env {
            step: t,
            msg: "empty parameters".into(),
        })?;
        self.played.push(x);
        let src = t.checked_sub(self.delay).map(|tau| self.played[tau]);
        Ok(self.reward(src, t))
    }

    fn replay(
        &self,
        start: usize,
        end: usize,
        theta_at: &dyn Fn(usize) -> Vec<f64>,
    ) -> Option<Vec<f64>> {
        (end < self.played.len() && start <= end).then(|| {
            (start..=end)
                .map(|t| self.reward(t.checked_sub(self.delay).map(|tau| theta_at(tau)[0]), t))
                .collect()
        })
    }
}

/// Bandit whose mean reward drifts linearly in time:
/// `r = offset + drift t + gain tanh(theta_0) + u`, `u ~ U[-noise, noise]`.
/// The per-step change of the mean is exactly `|drift|`.
#[derive(Debug, Clone)]
pub struct LinearDriftBandit {
    pub offset: f64,
    pub drift: f64,
    pub gain: f64,
    pub noise: f64,
    next: usize,
    rng: ChaCha8Rng,
}

impl LinearDriftBandit {
    pub fn new(offset: f64, drift: f64, gain: f64, noise: f64, seed: u64) -> Self {
        Self {
            offset,
            drift,
            gain,
            noise,
            next: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn mean_reward(&self, theta: &[f64], t: usize) -> f64 {
        self.offset + self.drift * t as f64 + self.gain * theta[0].tanh()
    }

    pub fn sample_reward<R: Rng + ?Sized>(&self, theta: &[f64], t: usize, rng: &mut R) -> f64 {
        let u = if self.noise > 0.0 {
            rng.random_range(-self.noise..=self.noise)
        } else {
            0.0
        };
        self.mean_reward(theta, t) + u
    }

    /// `E[r_t]` with `theta ~ g`, by trapezoid quadrature over +-10 sd.
    pub fn expected_under(&self, g: &DiagGaussian, t: usize) -> f64 {
        let (m, s) = (g.mean[0], g.std[0]);
        let n = 4000;
        let h = 20.0 / n as f64;
        let mut acc = 0.0;
        for k in 0..=n {
            let z = -10.0 + k as f64 * h;
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            acc += w * (-0.5 * z * z).exp() * (m + s * z).tanh();
        }
        let e_tanh = acc * h / (2.0 * std::f64::consts::PI).sqrt();
        self.offset + self.drift * t as f64 + self.gain * e_tanh
    }

    /// Bound on `|r_t|` for all `t <= horizon`.
    pub fn reward_bound(&self, horizon: usize) -> f64 {
        self.offset.abs() + (self.drift * horizon as f64).abs() + self.gain.abs() + self.noise
    }
}

impl LifelongEnv for LinearDriftBandit {
    fn dim_theta(&self) -> usize {
        1
    }

    fn r_max(&self) -> f64 {
        if self.drift == 0.0 {
            self.reward_bound(0)
        } else {
            f64::INFINITY
        }
    }

    fn step(&mut self, t: usize, theta: &[f64]) -> Result<f64> {
        expect_step(self.next, t)?;
        self.next += 1;
        let mut rng = self.rng.clone();
        let r = self.sample_reward(theta, t, &mut rng);
        self.rng = rng;
        Ok(r)
    }
}
