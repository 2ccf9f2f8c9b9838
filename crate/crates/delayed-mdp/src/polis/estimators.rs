//! Importance-sampling estimators over a lifelong window, their bias and
//! variance bounds, and the penalized surrogate with its gradient.
//!
//! With delay `D` the window keeps `alpha - D` rewards `r_t`,
//! `t = T - alpha + D + 1 ..= T`, each paired with the parameters
//! `theta_{t-D}` that produced it; `D = 0` is the plain estimator.

use super::{c_factor, EstimatorConfig, HyperPolicy, LifelongTrace};
use crate::error::{Error, Result};
use crate::mdp::metric::log_renyi2_gaussian;

/// How the future-return part of the gradient is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientForm {
    /// Derivative of the realized estimator with the sampled parameters held fixed.
    Pathwise,
    /// Score-function form: the pathwise term plus the log-derivative of the
    /// density each sample was drawn from.
    #[default]
    ScoreFunction,
}

/// Window geometry: `(T, first reward time)`.
fn window(trace: &LifelongTrace, cfg: &EstimatorConfig) -> Result<(usize, usize)> {
    cfg.validate()?;
    let now = trace.now().ok_or(Error::WindowTooShort {
        needed: cfg.alpha,
        have: 0,
    })?;
    if trace.len() < cfg.alpha {
        return Err(Error::WindowTooShort {
            needed: cfg.alpha,
            have: trace.len(),
        });
    }
    Ok((now, now + 1 - cfg.window()))
}

fn omega_weight(cfg: &EstimatorConfig, now: usize, t: usize) -> f64 {
    cfg.omega.powi((now - t) as i32)
}

/// Mixture weights, features and means of the lookahead times (first) and
/// window times, shared by every sample of one evaluation.
struct MixtureTable {
    /// `(weight, features, mean)`; lookahead entries carry `+` sign.
    rows: Vec<(f64, Vec<f64>, Vec<f64>)>,
    n_future: usize,
}

impl MixtureTable {
    fn new(hp: &HyperPolicy, now: usize, start: usize, cfg: &EstimatorConfig) -> Self {
        let entry = |w: f64, t: usize| (w, hp.features(t as f64), hp.mean(t as f64));
        let mut rows: Vec<_> = (0..cfg.beta)
            .map(|j| entry(cfg.gamma.powi(j as i32), now + 1 + j))
            .collect();
        rows.extend((start..=now).map(|k| entry(omega_weight(cfg, now, k), k)));
        Self {
            rows,
            n_future: cfg.beta,
        }
    }

    /// Mixture importance ratio `sum_s g_s nu(theta|s) / sum_k w_k nu(theta|k)`
    /// and, if asked, its gradient in `rho`.
    fn ratio(
        &self,
        hp: &HyperPolicy,
        theta: &[f64],
        with_grad: bool,
    ) -> Result<(f64, Option<Vec<f64>>)> {
        // the normalizing constants agree across times and cancel
        let logs: Vec<f64> = self
            .rows
            .iter()
            .map(|(_, _, m)| {
                theta
                    .iter()
                    .zip(m)
                    .zip(&hp.sigma)
                    .map(|((x, mu), s)| -0.5 * ((x - mu) / s).powi(2))
                    .sum()
            })
            .collect();
        let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scaled: Vec<f64> = self
            .rows
            .iter()
            .zip(&logs)
            .map(|((w, _, _), l)| w * (l - shift).exp())
            .collect();
        let num: f64 = scaled[..self.n_future].iter().sum();
        let den: f64 = scaled[self.n_future..].iter().sum();
        if !(den > 0.0) || !den.is_finite() || !num.is_finite() {
            return Err(Error::DegenerateHyperPolicy(format!(
                "importance weight denominator {den}"
            )));
        }
        let r = num / den;
        if !with_grad {
            return Ok((r, None));
        }
        let nf = hp.n_features();
        let mut grad = vec![0.0; hp.rho.len()];
        for (k, ((_, f, m), v)) in self.rows.iter().zip(&scaled).enumerate() {
            let (norm, sign) = if k < self.n_future {
                (num, 1.0)
            } else {
                (den, -1.0)
            };
            if norm <= 0.0 || *v == 0.0 {
                continue;
            }
            let c = sign * r * v / norm;
            for i in 0..hp.dim_theta {
                let ci = c * (theta[i] - m[i]) / (hp.sigma[i] * hp.sigma[i]);
                for (o, phi) in grad[i * nf..(i + 1) * nf].iter_mut().zip(f) {
                    *o += ci * phi;
                }
            }
        }
        Ok((r, Some(grad)))
    }
}

/// Estimated discounted return over the next `beta` steps.
pub fn j_future_hat(trace: &LifelongTrace, hp: &HyperPolicy, cfg: &EstimatorConfig) -> Result<f64> {
    let (now, start) = window(trace, cfg)?;
    let table = MixtureTable::new(hp, now, start, cfg);
    let mut total = 0.0;
    for t in start..=now {
        let src = trace.at(t - cfg.delay).expect("window checked");
        let (r, _) = table.ratio(hp, &src.theta, false)?;
        total += omega_weight(cfg, now, t) * r * trace.at(t).expect("window checked").reward;
    }
    Ok(total)
}

/// Recency-weighted discounted return of the window, normalized by `C_omega`.
pub fn j_behind(trace: &LifelongTrace, cfg: &EstimatorConfig) -> Result<f64> {
    let (now, start) = window(trace, cfg)?;
    let total: f64 = (start..=now)
        .map(|t| {
            omega_weight(cfg, now, t)
                * cfg.gamma.powi((t - start) as i32)
                * trace.at(t).expect("window").reward
        })
        .sum();
    Ok(total / c_factor(cfg.omega, cfg.window()))
}

/// Both estimators with the reward shift `cfg.delay`.
pub fn delay_shifted_estimators(
    trace: &LifelongTrace,
    hp: &HyperPolicy,
    cfg: &EstimatorConfig,
) -> Result<(f64, f64)> {
    Ok((j_future_hat(trace, hp, cfg)?, j_behind(trace, cfg)?))
}

/// Upper bound `B` on the divergence between the lookahead and window
/// mixtures, scaled as `C_gamma(beta)^2 / C_omega(alpha) * d_2(mix || mix)`:
/// `B = (sum_s g_s (sum_t w_t / d_2(nu_s || nu_t))^(-1/2))^2`.
pub fn renyi_mixture_bound(hp: &HyperPolicy, now: usize, cfg: &EstimatorConfig) -> Result<f64> {
    cfg.validate()?;
    let start = (now + 1)
        .checked_sub(cfg.window())
        .ok_or(Error::WindowTooShort {
            needed: cfg.window(),
            have: now + 1,
        })?;
    let future: Vec<f64> = (0..cfg.beta).map(|j| cfg.gamma.powi(j as i32)).collect();
    let past: Vec<f64> = (start..=now).map(|t| omega_weight(cfg, now, t)).collect();
    let future_nu: Vec<_> = (0..cfg.beta)
        .map(|j| hp.gaussian((now + 1 + j) as f64))
        .collect();
    let past_nu: Vec<_> = (start..=now).map(|t| hp.gaussian(t as f64)).collect();
    mixture_bound(&future, &past, |j, k| {
        log_renyi2_gaussian(&future_nu[j], &past_nu[k]).map_err(|e| {
            Error::DivergenceInfinite(format!(
                "lookahead time {}, window time {}: {e}",
                now + 1 + j,
                start + k
            ))
        })
    })
}

/// The mixture bound `(sum_j g_j (sum_k w_k / d_2(p_j || q_k))^(-1/2))^2` for
/// arbitrary components, given `log d_2(p_j || q_k)`.
pub fn mixture_bound(
    future_weights: &[f64],
    past_weights: &[f64],
    log_d2: impl Fn(usize, usize) -> Result<f64>,
) -> Result<f64> {
    let mut outer = 0.0;
    for (j, g) in future_weights.iter().enumerate() {
        let mut inner = 0.0;
        for (k, w) in past_weights.iter().enumerate() {
            inner += w * (-log_d2(j, k)?).exp();
        }
        if !(inner > 0.0) {
            return Err(Error::DivergenceInfinite(format!(
                "lookahead component {j}: every window divergence overflows"
            )));
        }
        outer += g / inner.sqrt();
    }
    Ok(outer * outer)
}

/// `B` and optionally its gradient (equal variances across time).
fn mixture_terms(
    hp: &HyperPolicy,
    now: usize,
    cfg: &EstimatorConfig,
    with_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    cfg.validate()?;
    let start = (now + 1)
        .checked_sub(cfg.window())
        .ok_or(Error::WindowTooShort {
            needed: cfg.window(),
            have: now + 1,
        })?;
    let past: Vec<_> = (start..=now)
        .map(|t| {
            (
                t,
                omega_weight(cfg, now, t),
                hp.gaussian(t as f64),
                hp.features(t as f64),
            )
        })
        .collect();
    let mut outer = 0.0;
    let mut grad = with_grad.then(|| vec![0.0; hp.rho.len()]);
    let nf = hp.n_features();
    for j in 0..cfg.beta {
        let s = now + 1 + j;
        let g = cfg.gamma.powi(j as i32);
        let nu_s = hp.gaussian(s as f64);
        let mut inner = 0.0;
        let mut closest = (f64::INFINITY, start);
        let mut inv_d2 = Vec::with_capacity(past.len());
        for (t, w, nu_t, _) in &past {
            let log_d2 = log_renyi2_gaussian(&nu_s, nu_t).map_err(|e| {
                Error::DivergenceInfinite(format!("lookahead time {s}, window time {t}: {e}"))
            })?;
            if log_d2 < closest.0 {
                closest = (log_d2, *t);
            }
            let v = (-log_d2).exp();
            inv_d2.push(v);
            inner += w * v;
        }
        if !(inner > 0.0) {
            return Err(Error::DivergenceInfinite(format!(
                "lookahead time {s}: every window divergence overflows (smallest log d_2 = {} at time {})",
                closest.0, closest.1
            )));
        }
        outer += g * inner.powf(-0.5);
        if let Some(grad) = grad.as_mut() {
            // d inner = -sum_t w_t / d_2 * d log d_2, d log d_2 = sum_i 2 gap_i / sigma_i^2 (phi_s - phi_t)
            let fs = hp.features(s as f64);
            let coef = g * (-0.5) * inner.powf(-1.5);
            for ((_, w, nu_t, ft), v) in past.iter().zip(&inv_d2) {
                for i in 0..hp.dim_theta {
                    let gap = nu_s.mean[i] - nu_t.mean[i];
                    let c = coef * (-w * v) * 2.0 * gap / (hp.sigma[i] * hp.sigma[i]);
                    for k in 0..nf {
                        grad[i * nf + k] += c * (fs[k] - ft[k]);
                    }
                }
            }
        }
    }
    let b = outer * outer;
    let grad = grad.map(|g| g.into_iter().map(|x| 2.0 * outer * x).collect());
    Ok((b, grad))
}

/// Variance bound `2 r_max^2 (C_gamma(alpha)^2 + C_omega(alpha) B)`.
pub fn variance_upper_bound(hp: &HyperPolicy, now: usize, cfg: &EstimatorConfig) -> Result<f64> {
    let b = renyi_mixture_bound(hp, now, cfg)?;
    let a = cfg.window();
    Ok(2.0 * cfg.r_max * cfg.r_max * (c_factor(cfg.gamma, a).powi(2) + c_factor(cfg.omega, a) * b))
}

fn penalty_root(b: f64, cfg: &EstimatorConfig) -> f64 {
    let a = cfg.window();
    (c_factor(cfg.gamma, a).powi(2) + c_factor(cfg.omega, a) * b).sqrt()
}

/// `J_hat + J_check - lambda sqrt(C_gamma(alpha)^2 + C_omega(alpha) B)`.
pub fn surrogate_objective(
    trace: &LifelongTrace,
    hp: &HyperPolicy,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    let (fut, behind) = delay_shifted_estimators(trace, hp, cfg)?;
    let now = trace.now().expect("window checked");
    let b = renyi_mixture_bound(hp, now, cfg)?;
    Ok(fut + behind - cfg.lambda_reg * penalty_root(b, cfg))
}

/// Gradient of the surrogate in `rho`, with past rewards held at their
/// realized values (so the window-return term contributes nothing).
pub fn surrogate_gradient(
    trace: &LifelongTrace,
    hp: &HyperPolicy,
    cfg: &EstimatorConfig,
    form: GradientForm,
) -> Result<Vec<f64>> {
    let (now, start) = window(trace, cfg)?;
    let table = MixtureTable::new(hp, now, start, cfg);
    let mut grad = vec![0.0; hp.rho.len()];
    for t in start..=now {
        let src = trace.at(t - cfg.delay).expect("window checked");
        let (r, g) = table.ratio(hp, &src.theta, true)?;
        let scale = omega_weight(cfg, now, t) * trace.at(t).expect("window").reward;
        for (o, d) in grad.iter_mut().zip(g.expect("requested")) {
            *o += scale * d;
        }
        if form == GradientForm::ScoreFunction {
            for (o, d) in grad
                .iter_mut()
                .zip(hp.grad_log_density(&src.theta, src.t as f64))
            {
                *o += scale * r * d;
            }
        }
    }
    if cfg.lambda_reg > 0.0 {
        let (b, gb) = mixture_terms(hp, now, cfg, true)?;
        let c = cfg.lambda_reg * c_factor(cfg.omega, cfg.window()) / (2.0 * penalty_root(b, cfg));
        for (o, d) in grad.iter_mut().zip(gb.expect("requested")) {
            *o -= c * d;
        }
    }
    Ok(grad)
}

/// Bias bound for `omega < 1`:
/// `(L_M + 2 r_max L_nu) C_gamma(beta) (omega/(1-omega) + 1/(1-gamma))`.
pub fn bias_bound(l_m: f64, l_nu: f64, r_max: f64, cfg: &EstimatorConfig) -> Result<f64> {
    if !(cfg.omega < 1.0) {
        return Err(Error::InvalidParameter(
            "this bias bound needs omega < 1".into(),
        ));
    }
    let w = cfg.omega;
    Ok((l_m + 2.0 * r_max * l_nu)
        * c_factor(cfg.gamma, cfg.beta)
        * (w / (1.0 - w) + 1.0 / (1.0 - cfg.gamma)))
}

/// Tighter bias bound valid for `0 < omega <= 1`; at `omega = 1` the window
/// term is `(alpha - 1) / 2`.
pub fn bias_bound_general(l_m: f64, l_nu: f64, r_max: f64, cfg: &EstimatorConfig) -> f64 {
    let (w, a) = (cfg.omega, cfg.window() as i32);
    let window_term = if w < 1.0 {
        w * (1.0 - a as f64 * w.powi(a - 1) + (a - 1) as f64 * w.powi(a))
            / ((1.0 - w) * (1.0 - w.powi(a)))
    } else {
        (a - 1) as f64 / 2.0
    };
    (l_m + 2.0 * r_max * l_nu)
        * c_factor(cfg.gamma, cfg.beta)
        * (window_term + 1.0 / (1.0 - cfg.gamma))
}
