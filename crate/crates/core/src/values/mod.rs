//! Discounting and the entropy, information and reward value functions.
//!
//! Probabilities stay exact rationals up to the point where a logarithm or a
//! weighted value sum is taken; from there on values are `f64`, summed in a
//! fixed order (actions ascending, percepts ascending) so results are
//! reproducible.
//!
//! Knowledge-seeking values are evaluated over the next `depth` percepts,
//! i.e. for lifetime `m = t + depth - 1`. Reward values are truncated after
//! `depth` steps; with `depth = H_t(eps)` the truncation error is at most
//! `eps` because rewards lie in `[0, 1]`.

mod discount;
mod oracle;
mod planner;

use serde::Serialize;

use crate::env::{Action, History};

pub use discount::{effective_horizon, DiscountSchedule};
pub use oracle::brute_force_oracle;
pub use planner::{
    entropy_value, eps_optimal_action, eps_optimal_reward_action, info_value, optimal_value, policy_value,
    reward_value, Planner,
};

/// Values within this distance of the maximum count as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueKind {
    /// Entropy of future percepts under the raw or normalized mixture.
    Entropy { normalized: bool },
    /// Expected information gain about the member environments.
    Information,
    /// Discounted reward under the mixture (or a single environment).
    Reward {
        #[serde(skip)]
        discount: DiscountSchedule,
    },
}

impl ValueKind {
    pub fn name(&self) -> &'static str {
        match self {
            ValueKind::Entropy { .. } => "entropy",
            ValueKind::Information => "info",
            ValueKind::Reward { .. } => "reward",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanResult {
    pub value: f64,
    pub best_action: Action,
    pub per_action_values: Vec<f64>,
}

impl PlanResult {
    /// Picks the least action within [`TIE_TOLERANCE`] of the maximum.
    pub fn from_values(per_action_values: Vec<f64>) -> Self {
        let value = per_action_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let best_action = per_action_values
            .iter()
            .position(|&v| v >= value - TIE_TOLERANCE)
            .unwrap_or(0);
        PlanResult {
            value,
            best_action,
            per_action_values,
        }
    }

    /// The least action whose value is strictly within `eps` of the maximum.
    pub fn least_within(&self, eps: f64) -> Action {
        self.per_action_values
            .iter()
            .position(|&v| self.value - v < eps)
            .unwrap_or(self.best_action)
    }
}

/// A deterministic policy: a function from histories to actions.
pub trait Policy {
    fn act(&self, h: &History) -> Action;
}

impl<F: Fn(&History) -> Action> Policy for F {
    fn act(&self, h: &History) -> Action {
        self(h)
    }
}

#[cfg(test)]
mod tests;
