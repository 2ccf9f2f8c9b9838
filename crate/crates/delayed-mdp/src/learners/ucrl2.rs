//! UCRL2: optimism over a confidence set of MDPs, with episodes ending when
//! some state-action count doubles.
//!
//! Radii at the start of episode `k` (time `t_k`, `N = max(1, N_k(s,a))`):
//! reward `r_max sqrt(c_r ln(2 S A t_k / delta) / (2N))`, transition rows in
//! L1 `sqrt(c_p S ln(2 A t_k / delta) / N)`. The defaults `c_r = 7`,
//! `c_p = 14` are the usual ones; both are configurable.

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::graph::is_communicating;
use crate::mdp::{optimal_gain, FiniteMdp};
use crate::util::{argmax, sample_index};

/// Run settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ucrl2Config {
    pub horizon: u64,
    /// Confidence parameter.
    pub delta: f64,
    pub reward_constant: f64,
    pub transition_constant: f64,
    /// Aperiodicity weight of extended value iteration.
    pub evi_tau: f64,
    /// Plan on the true model with zero-width confidence.
    pub known_model: bool,
}

impl Default for Ucrl2Config {
    fn default() -> Self {
        Self {
            horizon: 100_000,
            delta: 0.05,
            reward_constant: 7.0,
            transition_constant: 14.0,
            evi_tau: 0.5,
            known_model: false,
        }
    }
}

/// One environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretRow {
    /// 1-based time step.
    pub step: u64,
    pub reward: f64,
    pub cumulative_reward: f64,
    /// `step * rho_star - cumulative_reward`.
    pub regret: f64,
    pub episode_id: u64,
}

/// Per-step regret against the optimal gain.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub rho_star: f64,
    pub rows: Vec<RegretRow>,
}

impl RegretTrace {
    pub fn final_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.regret)
    }

    /// Regret after `t` steps (`0` for `t = 0`).
    pub fn regret_at(&self, t: u64) -> f64 {
        match t {
            0 => 0.0,
            _ => self.rows[(t as usize).min(self.rows.len()) - 1].regret,
        }
    }

    pub fn episodes(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.episode_id + 1)
    }
}

/// Empirical model with confidence radii, row-major `[s][a]` (and `[s][a][s']`).
#[derive(Debug, Clone, PartialEq)]
pub struct OptimisticModel {
    pub n_states: usize,
    pub n_actions: usize,
    pub p_hat: Vec<f64>,
    pub r_hat: Vec<f64>,
    pub radius_p: Vec<f64>,
    pub radius_r: Vec<f64>,
    pub r_max: f64,
}

/// Maximizes `p . u` over `||p - p_hat||_1 <= radius` on the simplex, with
/// states pre-sorted by decreasing `u`.
fn optimistic_row(p_hat: &[f64], radius: f64, order: &[usize], out: &mut [f64]) {
    out.copy_from_slice(p_hat);
    let top = order[0];
    out[top] = (p_hat[top] + radius / 2.0).min(1.0);
    let mut excess: f64 = out.iter().sum::<f64>() - 1.0;
    for &s in order.iter().rev() {
        if excess <= 0.0 {
            break;
        }
        if s == top {
            continue;
        }
        let cut = excess.min(out[s]);
        out[s] -= cut;
        excess -= cut;
    }
}

/// Extended value iteration on the optimistic model until the span of the
/// Bellman increment is below `eps`; returns the greedy deterministic policy
/// and the optimistic gain estimate.
pub fn extended_value_iteration(
    model: &OptimisticModel,
    eps: f64,
    tau: f64,
) -> Result<(Vec<usize>, f64)> {
    let (ns, na) = (model.n_states, model.n_actions);
    let r_tilde: Vec<f64> = model
        .r_hat
        .iter()
        .zip(&model.radius_r)
        .map(|(r, c)| (r + c).min(model.r_max))
        .collect();
    let mut u: Vec<f64> = vec![0.0; ns];
    let mut next = vec![0.0; ns];
    let mut q = vec![0.0; ns * na];
    let mut row = vec![0.0; ns];
    let mut order: Vec<usize> = (0..ns).collect();
    const MAX_ITER: usize = 1_000_000;
    for _ in 0..MAX_ITER {
        order.sort_by(|&i, &j| u[j].total_cmp(&u[i]).then(i.cmp(&j)));
        for s in 0..ns {
            for a in 0..na {
                let i = s * na + a;
                optimistic_row(
                    &model.p_hat[i * ns..(i + 1) * ns],
                    model.radius_p[i],
                    &order,
                    &mut row,
                );
                let ev: f64 = row.iter().zip(&u).map(|(p, v)| p * v).sum();
                q[i] = r_tilde[i] + tau * ev + (1.0 - tau) * u[s];
            }
            next[s] = q[s * na..(s + 1) * na]
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
        }
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        for (n, o) in next.iter().zip(&u) {
            hi = hi.max(n - o);
            lo = lo.min(n - o);
        }
        let base = next.iter().cloned().fold(f64::INFINITY, f64::min);
        for (o, n) in u.iter_mut().zip(&next) {
            *o = n - base;
        }
        if hi - lo < eps {
            let policy = q.chunks(na).map(argmax).collect();
            return Ok((policy, 0.5 * (hi + lo)));
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITER,
        residual: f64::NAN,
    })
}

/// Runs UCRL2 for `cfg.horizon` steps on `mdp` (rewards read as `r(s,a)`)
/// and records the regret against the exact optimal gain.
pub fn ucrl2_run<R: Rng + ?Sized>(
    mdp: &FiniteMdp,
    cfg: &Ucrl2Config,
    rng: &mut R,
) -> Result<RegretTrace> {
    if !is_communicating(mdp) {
        return Err(Error::NotCommunicating);
    }
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) || !(cfg.evi_tau > 0.0 && cfg.evi_tau <= 1.0) {
        return Err(Error::InvalidParameter(
            "delta must lie in (0,1) and tau in (0,1]".into(),
        ));
    }
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let (rho_star, _) = optimal_gain(mdp, 1e-10)?;
    let mut counts = vec![0u64; ns * na];
    let mut reward_sum = vec![0.0; ns * na];
    let mut trans = vec![0u64; ns * na * ns];
    let mut rows = Vec::with_capacity(cfg.horizon as usize);
    let mut s = sample_index(mdp.initial_dist(), rng);
    let (mut t, mut cum, mut episode) = (0u64, 0.0, 0u64);
    while t < cfg.horizon {
        let t_k = (t + 1) as f64;
        let model = if cfg.known_model {
            OptimisticModel {
                n_states: ns,
                n_actions: na,
                p_hat: mdp.transitions().to_vec(),
                r_hat: mdp.rewards().to_vec(),
                radius_p: vec![0.0; ns * na],
                radius_r: vec![0.0; ns * na],
                r_max: mdp.r_max(),
            }
        } else {
            let log_r = (2.0 * (ns * na) as f64 * t_k / cfg.delta).ln();
            let log_p = (2.0 * na as f64 * t_k / cfg.delta).ln();
            let mut p_hat = vec![0.0; ns * na * ns];
            let mut r_hat = vec![0.0; ns * na];
            let mut radius_p = vec![0.0; ns * na];
            let mut radius_r = vec![0.0; ns * na];
            for i in 0..ns * na {
                let n = counts[i].max(1) as f64;
                if counts[i] > 0 {
                    r_hat[i] = reward_sum[i] / n;
                    for (o, &c) in p_hat[i * ns..(i + 1) * ns]
                        .iter_mut()
                        .zip(&trans[i * ns..(i + 1) * ns])
                    {
                        *o = c as f64 / n;
                    }
                } else {
                    // any row is plausible; start from a point mass
                    p_hat[i * ns + i / na] = 1.0;
                }
                radius_r[i] = mdp.r_max() * (cfg.reward_constant * log_r / (2.0 * n)).sqrt();
                radius_p[i] = if counts[i] > 0 {
                    (cfg.transition_constant * ns as f64 * log_p / n).sqrt()
                } else {
                    2.0
                };
            }
            OptimisticModel {
                n_states: ns,
                n_actions: na,
                p_hat,
                r_hat,
                radius_p,
                radius_r,
                r_max: mdp.r_max(),
            }
        };
        let (policy, _) = extended_value_iteration(&model, 1.0 / t_k.sqrt(), cfg.evi_tau)?;
        let mut in_episode = vec![0u64; ns * na];
        loop {
            let a = policy[s];
            let i = s * na + a;
            if in_episode[i] >= counts[i].max(1) || t >= cfg.horizon {
                break;
            }
            let r = mdp.r(s, a);
            let s2 = sample_index(mdp.p(s, a), rng);
            in_episode[i] += 1;
            reward_sum[i] += r;
            trans[i * ns + s2] += 1;
            t += 1;
            cum += r;
            rows.push(RegretRow {
                step: t,
                reward: r,
                cumulative_reward: cum,
                regret: t as f64 * rho_star - cum,
                episode_id: episode,
            });
            s = s2;
        }
        for (c, v) in counts.iter_mut().zip(&in_episode) {
            *c += v;
        }
        episode += 1;
    }
    Ok(RegretTrace { rho_star, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::trial_rng;

    fn bandit() -> FiniteMdp {
        FiniteMdp::new(1, 2, vec![1.0, 1.0], vec![1.0, 0.0], vec![1.0], 0.9).unwrap()
    }

    #[test]
    fn optimistic_row_moves_mass_to_best_state() {
        let mut out = vec![0.0; 3];
        optimistic_row(&[0.2, 0.5, 0.3], 0.4, &[2, 0, 1], &mut out);
        assert!(
            (out[2] - 0.5).abs() < 1e-12
                && (out[1] - 0.3).abs() < 1e-12
                && (out[0] - 0.2).abs() < 1e-12
        );
        optimistic_row(&[0.2, 0.5, 0.3], 2.0, &[0, 1, 2], &mut out);
        assert_eq!(out, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn bandit_regret_is_sublinear() {
        let cfg = Ucrl2Config {
            horizon: 10_000,
            ..Default::default()
        };
        let trace = ucrl2_run(&bandit(), &cfg, &mut trial_rng(111, 0)).unwrap();
        assert_eq!(trace.rho_star, 1.0);
        assert!(trace.final_regret() < 1e3, "{}", trace.final_regret());
    }

    #[test]
    fn known_model_regret_is_bounded() {
        let mdp = crate::fixtures::random_mdp(5, 3, 0.2, &mut trial_rng(112, 0)).unwrap();
        let cfg = Ucrl2Config {
            horizon: 20_000,
            known_model: true,
            ..Default::default()
        };
        let trace = ucrl2_run(&mdp, &cfg, &mut trial_rng(112, 1)).unwrap();
        // only the transient plus sampling noise of the optimal chain remain
        assert!(
            trace.final_regret().abs() < 3.0 * (cfg.horizon as f64).sqrt(),
            "{}",
            trace.final_regret()
        );
        let early = trace.regret_at(10_000);
        assert!((trace.final_regret() - early).abs() < 3.0 * (cfg.horizon as f64).sqrt());
    }

    #[test]
    fn regret_increments_are_bounded_and_reproducible() {
        let mdp = crate::fixtures::random_mdp(4, 2, 0.3, &mut trial_rng(113, 0)).unwrap();
        let cfg = Ucrl2Config {
            horizon: 3_000,
            ..Default::default()
        };
        let a = ucrl2_run(&mdp, &cfg, &mut trial_rng(113, 1)).unwrap();
        let b = ucrl2_run(&mdp, &cfg, &mut trial_rng(113, 1)).unwrap();
        assert_eq!(a, b);
        let mut prev = 0.0;
        for row in &a.rows {
            assert!((row.regret - prev).abs() <= mdp.r_max() + a.rho_star.abs() + 1e-12);
            prev = row.regret;
        }
        assert!(a.episodes() > 1);
    }

    #[test]
    fn rejects_non_communicating() {
        let p = vec![1.0, 0.0, 0.0, 1.0];
        let mdp = FiniteMdp::new(2, 1, p, vec![0.0, 1.0], vec![1.0, 0.0], 0.9).unwrap();
        assert!(matches!(
            ucrl2_run(&mdp, &Ucrl2Config::default(), &mut trial_rng(0, 0)),
            Err(Error::NotCommunicating)
        ));
    }
}
