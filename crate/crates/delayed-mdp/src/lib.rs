//! Delayed Markov decision processes: exact constructions, solvers, learners
//! and numerical checks of their performance bounds.
//!
//! * [`mdp`] — tabular MDPs, exact evaluation, probability metrics;
//! * [`delay`] — constant, stochastic, non-integer and MTD delays as augmented MDPs;
//! * [`solvers`] — brute-force optima over policy classes and bound checks;
//! * [`learners`] — dSARSA, DIDA, UCRL2 and tabular baselines;
//! * [`polis`] — importance-sampling lifelong policy optimization;
//! * [`fixtures`] — concrete instances and random generators.

// NaN must fail bound checks, so `!(a <= b)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Dense tabular kernels read best with explicit indices.
#![allow(clippy::needless_range_loop)]

pub mod delay;
pub mod error;
pub mod fixtures;
pub mod learners;
pub mod mdp;
pub mod polis;
pub mod solvers;
pub mod util;

pub use error::{Error, Result};
pub use mdp::{FiniteMdp, StationaryPolicy};
