//! Delayed processes and their augmented-MDP reductions.
//!
//! Every construction returns an [`AugmentedMdp`]: an ordinary
//! [`FiniteMdp`] over augmented states together with the layout needed to
//! decode an index back into `(state, action buffer, ...)` and compute beliefs.

mod constant;
mod mtd;
mod noninteger;
mod stochastic;

pub use constant::{augment_constant, augment_constant_with, belief, expected_delayed_reward};
pub use mtd::{augment_mtd, augment_mtd_with, homogeneous_pmm_kernels};
pub use noninteger::{augment_non_integer, composition_deviation, symmetric_root_kernel};
pub use stochastic::{augment_stochastic, augment_stochastic_with, next_delay_distribution};

use crate::error::{Error, Result};
use crate::mdp::graph::{support_graph, Adjacency};
use crate::mdp::{check_distribution, FiniteMdp, StationaryPolicy, DEFAULT_ENTRY_BUDGET, ROW_TOL};

/// Description of the delay process.
#[derive(Debug, Clone, PartialEq)]
pub enum DelaySpec {
    Constant(usize),
    /// Observation delay drawn from `zeta` over `0..=d_max` at each step.
    StochasticObs {
        zeta: Vec<f64>,
    },
    /// Delay `d_int + frac` with partial-step kernels `b_frac`, `b_rest`
    /// (flat `[s][a][s']` tensors) composing to the base transition.
    NonInteger {
        frac: f64,
        d_int: usize,
        b_frac: Vec<f64>,
        b_rest: Vec<f64>,
    },
    MtdIsm {
        lambda: Vec<f64>,
    },
    MtdPsm {
        lambda: Vec<f64>,
    },
    MtdImm {
        lambda: Vec<f64>,
        kernels: Vec<Vec<f64>>,
    },
    MtdPmm {
        lambda: Vec<f64>,
        kernels: Vec<Vec<f64>>,
    },
}

impl DelaySpec {
    /// One-line description, used as the `spec` header of serialized augmentations.
    pub fn describe(&self) -> String {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        match self {
            DelaySpec::Constant(d) => format!("constant d={d}"),
            DelaySpec::StochasticObs { zeta } => format!("stochastic zeta={}", join(zeta)),
            DelaySpec::NonInteger { frac, d_int, .. } => {
                format!("non-integer d_int={d_int} frac={frac:?}")
            }
            DelaySpec::MtdIsm { lambda } => format!("mtd-ism lambda={}", join(lambda)),
            DelaySpec::MtdPsm { lambda } => format!("mtd-psm lambda={}", join(lambda)),
            DelaySpec::MtdImm { lambda, .. } => format!("mtd-imm lambda={}", join(lambda)),
            DelaySpec::MtdPmm { lambda, .. } => format!("mtd-pmm lambda={}", join(lambda)),
        }
    }
}

/// Checks a weight vector and returns its order: the index of the last nonzero weight.
pub(crate) fn weight_order(what: &str, w: &[f64]) -> Result<usize> {
    if w.is_empty() {
        return Err(Error::InvalidDistribution {
            what: what.into(),
            detail: "empty".into(),
        });
    }
    check_distribution(what, w, ROW_TOL)?;
    Ok(w.iter().rposition(|&x| x > 0.0).unwrap_or(0))
}

/// Reward attached to an augmented transition for constant delays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RewardForm {
    /// `r(s, a_1)`: the reward of the action executed now at the observed state.
    #[default]
    Executed,
    /// `E_{z ~ b(.|x)} r(z, a)`: the expected reward of the newly chosen action.
    Expected,
}

/// Options shared by the constructions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentOptions {
    pub reward: RewardForm,
    pub budget: usize,
}

impl Default for AugmentOptions {
    fn default() -> Self {
        Self {
            reward: RewardForm::Executed,
            budget: DEFAULT_ENTRY_BUDGET,
        }
    }
}

/// Augmented state: last observed state plus pending actions (oldest first).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AugmentedState {
    pub last_state: usize,
    pub action_buffer: Vec<usize>,
    /// Current observation delay (stochastic delays only).
    pub effective_delay: Option<usize>,
    /// Earlier states, most recent first (past-state MTD variants only).
    pub past_states: Vec<usize>,
}

impl AugmentedState {
    pub fn new(last_state: usize, action_buffer: Vec<usize>) -> Self {
        Self {
            last_state,
            action_buffer,
            effective_delay: None,
            past_states: Vec::new(),
        }
    }
}

/// Distribution of the unobserved current state.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    pub probs: Vec<f64>,
}

impl Belief {
    pub fn dirac(n: usize, s: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[s] = 1.0;
        Self { probs }
    }
}

/// How augmented indices are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// `(s, a_1..a_len)`.
    Buffer {
        n_states: usize,
        n_actions: usize,
        len: usize,
    },
    /// `(s, a_1..a_dmax, n)`.
    Stochastic {
        n_states: usize,
        n_actions: usize,
        d_max: usize,
    },
    /// `(s_t, s_{t-1}..s_{t-dmax}, a_{t-dmax}..a_{t-1})`.
    History {
        n_states: usize,
        n_actions: usize,
        d_max: usize,
    },
}

pub(crate) fn pow(base: usize, exp: usize) -> usize {
    base.pow(exp as u32)
}

pub(crate) fn buffer_code(buf: &[usize], n_actions: usize) -> usize {
    buf.iter().fold(0, |c, &a| c * n_actions + a)
}

pub(crate) fn decode_buffer(mut code: usize, len: usize, n_actions: usize) -> Vec<usize> {
    let mut buf = vec![0; len];
    for slot in buf.iter_mut().rev() {
        *slot = code % n_actions;
        code /= n_actions;
    }
    buf
}

impl Layout {
    pub fn n_base_states(&self) -> usize {
        match *self {
            Layout::Buffer { n_states, .. }
            | Layout::Stochastic { n_states, .. }
            | Layout::History { n_states, .. } => n_states,
        }
    }

    pub fn n_actions(&self) -> usize {
        match *self {
            Layout::Buffer { n_actions, .. }
            | Layout::Stochastic { n_actions, .. }
            | Layout::History { n_actions, .. } => n_actions,
        }
    }

    /// Number of augmented states, or `None` on overflow.
    pub fn size(&self) -> Option<usize> {
        match *self {
            Layout::Buffer {
                n_states,
                n_actions,
                len,
            } => n_actions.checked_pow(len as u32)?.checked_mul(n_states),
            Layout::Stochastic {
                n_states,
                n_actions,
                d_max,
            } => n_actions
                .checked_pow(d_max as u32)?
                .checked_mul(n_states)?
                .checked_mul(d_max + 1),
            Layout::History {
                n_states,
                n_actions,
                d_max,
            } => n_states
                .checked_pow(d_max as u32 + 1)?
                .checked_mul(n_actions.checked_pow(d_max as u32)?),
        }
    }

    pub fn encode(&self, x: &AugmentedState) -> usize {
        match *self {
            Layout::Buffer { n_actions, len, .. } => {
                x.last_state * pow(n_actions, len) + buffer_code(&x.action_buffer, n_actions)
            }
            Layout::Stochastic {
                n_actions, d_max, ..
            } => {
                (x.last_state * pow(n_actions, d_max) + buffer_code(&x.action_buffer, n_actions))
                    * (d_max + 1)
                    + x.effective_delay.unwrap_or(d_max)
            }
            Layout::History {
                n_states,
                n_actions,
                d_max,
            } => {
                let states = std::iter::once(&x.last_state)
                    .chain(&x.past_states)
                    .fold(0, |c, &s| c * n_states + s);
                states * pow(n_actions, d_max) + buffer_code(&x.action_buffer, n_actions)
            }
        }
    }

    pub fn decode(&self, idx: usize) -> AugmentedState {
        match *self {
            Layout::Buffer { n_actions, len, .. } => {
                let block = pow(n_actions, len);
                AugmentedState::new(idx / block, decode_buffer(idx % block, len, n_actions))
            }
            Layout::Stochastic {
                n_actions, d_max, ..
            } => {
                let n = idx % (d_max + 1);
                let rest = idx / (d_max + 1);
                let block = pow(n_actions, d_max);
                let mut x = AugmentedState::new(
                    rest / block,
                    decode_buffer(rest % block, d_max, n_actions),
                );
                x.effective_delay = Some(n);
                x
            }
            Layout::History {
                n_states,
                n_actions,
                d_max,
            } => {
                let block = pow(n_actions, d_max);
                let buf = decode_buffer(idx % block, d_max, n_actions);
                let mut code = idx / block;
                let mut states = vec![0; d_max + 1];
                for slot in states.iter_mut().rev() {
                    *slot = code % n_states;
                    code /= n_states;
                }
                let mut x = AugmentedState::new(states[0], buf);
                x.past_states = states[1..].to_vec();
                x
            }
        }
    }
}

/// An augmented MDP with the data needed to interpret its states.
#[derive(Debug, Clone)]
pub struct AugmentedMdp {
    pub mdp: FiniteMdp,
    pub base: FiniteMdp,
    pub layout: Layout,
    pub spec: DelaySpec,
}

impl AugmentedMdp {
    pub fn n_states(&self) -> usize {
        self.mdp.n_states()
    }

    pub fn state(&self, idx: usize) -> AugmentedState {
        self.layout.decode(idx)
    }

    pub fn index(&self, x: &AugmentedState) -> usize {
        self.layout.encode(x)
    }

    /// Belief over base states of the state at which a newly chosen action executes.
    pub fn belief(&self, idx: usize) -> Belief {
        let x = self.state(idx);
        match &self.spec {
            DelaySpec::Constant(_) => belief(&self.base, &x),
            DelaySpec::StochasticObs { .. } => {
                let n = x.effective_delay.unwrap_or(0);
                let d_max = x.action_buffer.len();
                let mut dist = Belief::dirac(self.base.n_states(), x.last_state).probs;
                for &a in &x.action_buffer[d_max - n..] {
                    dist = self.base.push(&dist, a);
                }
                Belief { probs: dist }
            }
            DelaySpec::NonInteger { b_frac, .. } => noninteger::belief(&self.base, b_frac, &x),
            _ => Belief::dirac(self.base.n_states(), x.last_state),
        }
    }

    /// True when the action chosen at `idx` can influence the process.
    ///
    /// For constant and stochastic observation delays the new action executes
    /// at a state distributed as the belief; if every state in its support is
    /// control-free, all choices are bisimilar.
    pub fn action_relevant(&self, idx: usize) -> bool {
        match self.spec {
            DelaySpec::Constant(d) if d > 0 => {}
            DelaySpec::StochasticObs { .. } => {}
            _ => return true,
        }
        let b = self.belief(idx);
        b.probs
            .iter()
            .enumerate()
            .any(|(s, &w)| w > 0.0 && !self.base.is_control_free(s))
    }

    /// Delayed policy acting on the last observed state only.
    pub fn lift_memoryless(&self, base_policy: &StationaryPolicy) -> StationaryPolicy {
        let na = self.mdp.n_actions();
        let mut probs = Vec::with_capacity(self.n_states() * na);
        for idx in 0..self.n_states() {
            probs.extend_from_slice(base_policy.probs(self.state(idx).last_state));
        }
        StationaryPolicy::new(self.n_states(), na, probs).expect("rows copied from a valid policy")
    }

    /// Belief mixture `pi~(a|x) = sum_s b(s|x) pi(a|s)`.
    pub fn belief_mixture(&self, base_policy: &StationaryPolicy) -> StationaryPolicy {
        let na = self.mdp.n_actions();
        let mut probs = vec![0.0; self.n_states() * na];
        for idx in 0..self.n_states() {
            let b = self.belief(idx);
            let row = &mut probs[idx * na..(idx + 1) * na];
            for (s, &w) in b.probs.iter().enumerate() {
                if w > 0.0 {
                    for (o, &p) in row.iter_mut().zip(base_policy.probs(s)) {
                        *o += w * p;
                    }
                }
            }
            let z: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= z);
        }
        StationaryPolicy::new(self.n_states(), na, probs).expect("mixture of valid rows")
    }
}

/// Augments according to a spec with default options.
pub fn augment(mdp: &FiniteMdp, spec: &DelaySpec) -> Result<AugmentedMdp> {
    augment_with(mdp, spec, AugmentOptions::default())
}

/// Augments according to a spec.
pub fn augment_with(
    mdp: &FiniteMdp,
    spec: &DelaySpec,
    opts: AugmentOptions,
) -> Result<AugmentedMdp> {
    match spec {
        DelaySpec::Constant(d) => augment_constant_with(mdp, *d, opts),
        DelaySpec::StochasticObs { zeta } => augment_stochastic_with(mdp, zeta, opts.budget),
        DelaySpec::NonInteger { .. } => augment_non_integer(mdp, spec, opts.budget),
        _ => augment_mtd_with(mdp, spec, opts.budget),
    }
}

/// Edges of nonzero-probability transitions under some action.
pub fn reachable_augmented_graph(aug: &FiniteMdp) -> Adjacency {
    support_graph(aug)
}

pub(crate) fn check_aug_budget(layout: &Layout, n_actions: usize, budget: usize) -> Result<usize> {
    let n = layout.size().ok_or(Error::BudgetExceeded {
        entries: u128::MAX,
        budget,
    })?;
    crate::mdp::check_budget(n as u128 * n as u128 * n_actions as u128, budget)?;
    Ok(n)
}
