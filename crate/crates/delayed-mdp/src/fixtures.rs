//! Concrete instances used by the checks and experiments, plus random generators.

use crate::delay::DelaySpec;
use crate::error::{Error, Result};
use crate::mdp::graph::is_communicating;
use crate::mdp::FiniteMdp;
use crate::util::dirichlet_ones;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

/// Two-path counter-example where belief-based policies lose to augmented ones.
#[derive(Debug, Clone)]
pub struct BeliefCounterexample {
    pub mdp: FiniteMdp,
    pub delay: usize,
    /// Best average reward over augmented-state policies.
    pub expected_augmented: f64,
    /// Best average reward over belief-based policies.
    pub expected_belief: f64,
}

/// State indices of the belief counter-example.
pub mod belief_states {
    pub const START: usize = 0;
    /// Reached by action `a`; both branches stay possible.
    pub const UNDECIDED: usize = 1;
    pub const LEFT: usize = 2;
    pub const RIGHT: usize = 3;
    /// The two decision states, `s` and `s'`.
    pub const DECISION: [usize; 2] = [4, 5];
    pub fn intermediate(branch: usize, a2: usize) -> usize {
        6 + branch * 2 + a2
    }
    pub fn terminal(branch: usize, a2: usize, a3: usize) -> usize {
        10 + branch * 4 + a2 * 2 + a3
    }
}

/// Values of terminal nodes `[branch][a2][a3]` with actions `a = 0`, `b = 1`.
pub const BELIEF_TERMINAL_VALUES: [[[f64; 2]; 2]; 2] =
    [[[10.0, 0.0], [15.0, 0.0]], [[0.0, 20.0], [10.0, 0.0]]];

/// Builds the two-path counter-example (18 states, 2 actions).
///
/// From the start, action `a` leads to a state from which both decision
/// states are equally likely, while `b` commits to the left or right branch
/// (again with probability one half each) which reveals the decision state.
/// Two more actions then select an absorbing terminal whose per-step reward
/// is the value in [`BELIEF_TERMINAL_VALUES`], so the long-run average from
/// the start equals the expected terminal value.
pub fn belief_counterexample() -> BeliefCounterexample {
    use belief_states::*;
    let (ns, na) = (18, 2);
    let mut t = vec![0.0; ns * na * ns];
    let mut r = vec![0.0; ns * na];
    let mut set = |s: usize, a: usize, s2: usize, p: f64| t[(s * na + a) * ns + s2] += p;
    set(START, 0, UNDECIDED, 1.0);
    set(START, 1, LEFT, 0.5);
    set(START, 1, RIGHT, 0.5);
    for a in 0..na {
        set(UNDECIDED, a, DECISION[0], 0.5);
        set(UNDECIDED, a, DECISION[1], 0.5);
        set(LEFT, a, DECISION[0], 1.0);
        set(RIGHT, a, DECISION[1], 1.0);
    }
    for branch in 0..2 {
        for a2 in 0..na {
            set(DECISION[branch], a2, intermediate(branch, a2), 1.0);
            for a3 in 0..na {
                set(intermediate(branch, a2), a3, terminal(branch, a2, a3), 1.0);
                let term = terminal(branch, a2, a3);
                for a in 0..na {
                    set(term, a, term, 1.0);
                    r[term * na + a] = BELIEF_TERMINAL_VALUES[branch][a2][a3];
                }
            }
        }
    }
    let mut init = vec![0.0; ns];
    init[START] = 1.0;
    let mdp = FiniteMdp::new(ns, na, t, r, init, 0.9).expect("fixture is valid");
    BeliefCounterexample {
        mdp,
        delay: 2,
        expected_augmented: 13.75,
        expected_belief: 12.5,
    }
}

/// Two-state MTD counter-example: the higher mean delay earns more.
#[derive(Debug, Clone)]
pub struct MtdCounterexample {
    pub mdp: FiniteMdp,
    /// Mostly two-step delay with a small undelayed share `epsilon`.
    pub mixed: DelaySpec,
    /// Pure one-step delay.
    pub one_step: DelaySpec,
    pub expected_mixed: f64,
    pub expected_one_step: f64,
}

/// Builds the MTD counter-example for `epsilon in [0, 0.5)`.
pub fn mtd_counterexample(epsilon: f64) -> Result<MtdCounterexample> {
    if !(0.0..0.5).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!(
            "epsilon {epsilon} not in [0, 0.5)"
        )));
    }
    // states s0, s1; actions a, b; transitions uniform regardless of action
    let t = vec![0.5; 2 * 2 * 2];
    let r = vec![1.0, 0.0, 0.0, 1.0]; // r(s0,a) = r(s1,b) = 1
    let mdp = FiniteMdp::new(2, 2, t, r, vec![0.5, 0.5], 0.9)?;
    Ok(MtdCounterexample {
        mdp,
        mixed: DelaySpec::MtdIsm {
            lambda: vec![epsilon, 0.0, 1.0 - epsilon],
        },
        one_step: DelaySpec::MtdIsm {
            lambda: vec![0.0, 1.0, 0.0],
        },
        expected_mixed: 0.5 * (1.0 + epsilon),
        expected_one_step: 0.5,
    })
}

/// Layout of the 3x3 maze.
#[derive(Debug, Clone, PartialEq)]
pub struct MazeConfig {
    pub start: usize,
    pub goal: usize,
    /// Blocked moves between adjacent cells (unordered pairs).
    pub walls: Vec<(usize, usize)>,
}

impl Default for MazeConfig {
    /// Start top-left, goal middle-right, one wall between the top-right cell
    /// and the goal; the shortest reward cycle (three moves plus the return
    /// to the start) has length 4.
    fn default() -> Self {
        Self {
            start: 0,
            goal: 5,
            walls: vec![(2, 5)],
        }
    }
}

/// Maze actions.
pub const NORTH: usize = 0;
pub const EAST: usize = 1;
pub const SOUTH: usize = 2;
pub const WEST: usize = 3;

/// 3x3 grid world with 4 moves; bumping stays put. Entering the goal pays 1,
/// and any action at the goal returns to the start.
pub fn maze_3x3(config: &MazeConfig) -> Result<FiniteMdp> {
    let (ns, na) = (9, 4);
    if config.start >= ns || config.goal >= ns || config.start == config.goal {
        return Err(Error::InvalidParameter(
            "start and goal must be distinct cells".into(),
        ));
    }
    let blocked = |a: usize, b: usize| {
        config
            .walls
            .iter()
            .any(|&(x, y)| (x, y) == (a, b) || (y, x) == (a, b))
    };
    let mut t = vec![0.0; ns * na * ns];
    let mut r = vec![0.0; ns * na];
    for s in 0..ns {
        let (row, col) = (s / 3, s % 3);
        for a in 0..na {
            let next = if s == config.goal {
                config.start
            } else {
                let target = match a {
                    NORTH if row > 0 => Some(s - 3),
                    EAST if col < 2 => Some(s + 1),
                    SOUTH if row < 2 => Some(s + 3),
                    WEST if col > 0 => Some(s - 1),
                    _ => None,
                };
                match target {
                    Some(n) if !blocked(s, n) => n,
                    _ => s,
                }
            };
            t[(s * na + a) * ns + next] = 1.0;
            if next == config.goal && s != config.goal {
                r[s * na + a] = 1.0;
            }
        }
    }
    let mut init = vec![0.0; ns];
    init[config.start] = 1.0;
    let coords = (0..ns)
        .map(|s| vec![(s / 3) as f64, (s % 3) as f64])
        .collect();
    FiniteMdp::new(ns, na, t, r, init, 0.99)?
        .with_r_max(1.0)?
        .with_coords(coords)
}

/// Random MDP on the integer line with `W1(p(.|s,a), delta_s) <= l_t`.
///
/// Each row mixes a Dirichlet draw on the window `|s' - s| <= ceil(l_t)` with
/// the Dirac at `s`, scaling the moving part down until the bound holds.
/// Rewards `f(s) + g(a)` have increments at most 1 in each argument, so they
/// are 1-Lipschitz for `d_S + d_A`.
pub fn tlc_random<R: Rng + ?Sized>(
    n_states: usize,
    n_actions: usize,
    l_t: f64,
    rng: &mut R,
) -> Result<FiniteMdp> {
    if !(l_t >= 0.0 && l_t.is_finite()) || n_states == 0 || n_actions == 0 {
        return Err(Error::InfeasibleTarget(format!(
            "time-Lipschitz target {l_t}"
        )));
    }
    let radius = l_t.ceil() as usize;
    let (ns, na) = (n_states, n_actions);
    let mut t = vec![0.0; ns * na * ns];
    for s in 0..ns {
        let lo = s.saturating_sub(radius);
        let hi = (s + radius).min(ns - 1);
        for a in 0..na {
            let row = &mut t[(s * na + a) * ns..(s * na + a + 1) * ns];
            row[s] = 1.0;
            if radius == 0 {
                continue;
            }
            let q = dirichlet_ones(hi - lo + 1, rng);
            let moved: f64 = q
                .iter()
                .enumerate()
                .map(|(i, w)| w * (lo + i).abs_diff(s) as f64)
                .sum();
            let w = if moved > 0.0 {
                (l_t / moved).min(1.0)
            } else {
                0.0
            };
            for (i, qi) in q.iter().enumerate() {
                row[lo + i] += w * qi;
            }
            row[s] -= w;
        }
    }
    let walk = |n: usize, rng: &mut R| -> Vec<f64> {
        let mut v = vec![0.0; n];
        for i in 1..n {
            v[i] = v[i - 1] + rng.random_range(-0.3..=0.3);
        }
        v
    };
    let f = walk(ns, rng);
    let g = walk(na, rng);
    let mut r: Vec<f64> = (0..ns * na).map(|i| f[i / na] + g[i % na]).collect();
    let lowest = r.iter().cloned().fold(f64::INFINITY, f64::min);
    r.iter_mut().for_each(|x| *x -= lowest);
    let init = vec![1.0 / ns as f64; ns];
    let coords = (0..ns).map(|s| vec![s as f64]).collect();
    FiniteMdp::new(ns, na, t, r, init, 0.9)?.with_coords(coords)
}

/// Discretization of the scalar Gaussian-drift problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftGrid {
    /// Grid step.
    pub step: f64,
    /// States are `i * step` for `i in -half_width..=half_width`.
    pub half_width: usize,
}

/// Gaussian drift `s' = s + a / l_pi + N(0, sigma^2)` on a grid, with reward
/// `-l_q |l_pi s + a|`.
///
/// Actions are `l_pi * step * j`, `j in -half_width..=half_width`, so the
/// deterministic part lands on grid points; it is clamped at the border and
/// the noise is integrated over grid cells and renormalized.
pub fn gaussian_drift_discretized(
    l_pi: f64,
    l_q: f64,
    sigma: f64,
    grid: DriftGrid,
    discount: f64,
) -> Result<FiniteMdp> {
    let m = grid.half_width as i64;
    let h = grid.step;
    if !(h > 0.0 && l_pi > 0.0 && l_q >= 0.0 && sigma >= 0.0) {
        return Err(Error::InvalidParameter("drift grid parameters".into()));
    }
    let ns = (2 * m + 1) as usize;
    let noise = if sigma > 0.0 {
        if h > sigma {
            return Err(Error::GridTooCoarse(format!(
                "step {h} exceeds noise scale {sigma}"
            )));
        }
        let normal = Normal::new(0.0, sigma).expect("positive scale");
        let edge = (m as f64 + 0.5) * h;
        let outside = 2.0 * normal.cdf(-edge);
        if outside > 1e-3 {
            return Err(Error::GridTooCoarse(format!(
                "truncated mass {outside:.3e} > 1e-3"
            )));
        }
        Some(normal)
    } else {
        None
    };
    let mut t = vec![0.0; ns * ns * ns];
    let mut r = vec![0.0; ns * ns];
    for i in -m..=m {
        let s = (i + m) as usize;
        for j in -m..=m {
            let a = (j + m) as usize;
            let center = (i + j).clamp(-m, m);
            let row = &mut t[(s * ns + a) * ns..(s * ns + a + 1) * ns];
            match &noise {
                None => row[(center + m) as usize] = 1.0,
                Some(normal) => {
                    for k in -m..=m {
                        let off = (k - center) as f64 * h;
                        row[(k + m) as usize] =
                            normal.cdf(off + 0.5 * h) - normal.cdf(off - 0.5 * h);
                    }
                    let z: f64 = row.iter().sum();
                    row.iter_mut().for_each(|p| *p /= z);
                }
            }
            let action = l_pi * h * j as f64;
            r[s * ns + a] = -l_q * (l_pi * h * i as f64 + action).abs();
        }
    }
    let mut init = vec![0.0; ns];
    init[m as usize] = 1.0;
    let coords = (-m..=m).map(|i| vec![i as f64 * h]).collect();
    FiniteMdp::new_signed(ns, ns, t, r, init, discount)?.with_coords(coords)
}

/// Action coordinates of [`gaussian_drift_discretized`].
pub fn drift_action_coords(l_pi: f64, grid: DriftGrid) -> Vec<f64> {
    let m = grid.half_width as i64;
    (-m..=m).map(|j| l_pi * grid.step * j as f64).collect()
}

/// Random MDP: Dirichlet(1) rows, entries dropped with probability `sparsity`
/// (keeping at least one), uniform `[0,1]` rewards and uniform start.
///
/// Draws are repeated until the MDP is communicating.
pub fn random_mdp<R: Rng + ?Sized>(
    n_states: usize,
    n_actions: usize,
    sparsity: f64,
    rng: &mut R,
) -> Result<FiniteMdp> {
    if !(0.0..1.0).contains(&sparsity) {
        return Err(Error::InvalidParameter(format!(
            "sparsity {sparsity} not in [0,1)"
        )));
    }
    let (ns, na) = (n_states, n_actions);
    for _ in 0..1000 {
        let mut t = Vec::with_capacity(ns * na * ns);
        for _ in 0..ns * na {
            let mut row = dirichlet_ones(ns, rng);
            if sparsity > 0.0 {
                let keep = rng.random_range(0..ns);
                for (i, p) in row.iter_mut().enumerate() {
                    if i != keep && rng.random::<f64>() < sparsity {
                        *p = 0.0;
                    }
                }
                let z: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= z);
            }
            t.extend(row);
        }
        let r: Vec<f64> = (0..ns * na).map(|_| rng.random::<f64>()).collect();
        let mdp = FiniteMdp::new(ns, na, t, r, vec![1.0 / ns as f64; ns], 0.9)?.with_r_max(1.0)?;
        if is_communicating(&mdp) {
            return Ok(mdp);
        }
    }
    Err(Error::NotCommunicating)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::graph::diameter;
    use crate::mdp::lipschitz::lipschitz_constants;
    use crate::mdp::optimal_gain;
    use crate::util::trial_rng;

    #[test]
    fn random_mdp_is_reproducible() {
        let a = random_mdp(4, 2, 0.3, &mut trial_rng(9, 1)).unwrap();
        let b = random_mdp(4, 2, 0.3, &mut trial_rng(9, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn maze_gain_is_inverse_cycle_length() {
        let maze = maze_3x3(&MazeConfig::default()).unwrap();
        assert!(is_communicating(&maze));
        let (g, _) = optimal_gain(&maze, 1e-12).unwrap();
        assert!((g - 0.25).abs() < 1e-9, "{g}");
        assert!(diameter(&maze, 1e-12) >= 3.0);
    }

    #[test]
    fn zero_target_gives_identity_dynamics() {
        let mdp = tlc_random(5, 2, 0.0, &mut trial_rng(1, 1)).unwrap();
        for s in 0..5 {
            for a in 0..2 {
                assert_eq!(mdp.p(s, a)[s], 1.0);
            }
        }
    }

    #[test]
    fn measured_time_constant_respects_target() {
        for seed in 0..100 {
            let target = 0.2 + 0.02 * seed as f64;
            let mdp = tlc_random(5, 2, target, &mut trial_rng(seed, 2)).unwrap();
            let c = lipschitz_constants(&mdp, None, None).unwrap();
            assert!(c.l_t <= target + 1e-12, "{} > {target}", c.l_t);
            assert!(c.l_r <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn mtd_counterexample_rejects_large_epsilon() {
        assert!(mtd_counterexample(0.5).is_err());
    }

    #[test]
    fn deterministic_drift_rewards_vanish_on_the_cancelling_action() {
        let grid = DriftGrid {
            step: 0.5,
            half_width: 4,
        };
        let mdp = gaussian_drift_discretized(2.0, 1.0, 0.0, grid, 0.9).unwrap();
        for i in 0..9 {
            let cancel = 8 - i; // j = -i in centered indices
            assert_eq!(mdp.r(i, cancel), 0.0);
        }
    }

    #[test]
    fn coarse_drift_grid_is_rejected() {
        let grid = DriftGrid {
            step: 0.5,
            half_width: 2,
        };
        assert!(matches!(
            gaussian_drift_discretized(1.0, 1.0, 1.0, grid, 0.9),
            Err(Error::GridTooCoarse(_))
        ));
    }
}
