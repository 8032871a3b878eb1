//! Desk-scale algorithmic probability and universal reinforcement learning.
//!
//! The crate is split along the objects it computes with:
//!
//! * [`machine`]: monotone machines with budgeted, resumable execution and
//!   prefix enumeration.
//! * [`prior`]: anytime rational brackets for the universal prior and its
//!   normalizations.
//! * [`env`]: chronological conditional semimeasures and finite Bayesian
//!   mixtures over them.
//! * [`values`]: discounting, knowledge-seeking and reward-seeking value
//!   functions, expectimax planning and a brute-force policy oracle.
//! * [`bayesexp`]: an exploration/exploitation agent driven by
//!   information-seeking value, plus an episode harness and its metrics.

pub mod bayesexp;
pub mod bits;
pub mod env;
mod error;
pub mod machine;
pub mod prior;
pub mod rational;
pub mod values;

pub use error::{Error, Result};
