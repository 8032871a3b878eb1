//! BayesExp with epsilon-optimal sub-policies.
//!
//! At time `t`, outside an exploration phase, the agent computes the optimal
//! information value `V*_I` over the next `H = H_t(eps_t)` steps (lifetime
//! `t + H - 1`). If it exceeds `eps_t` the agent explores for `H` steps,
//! re-planning an `eps_t/2`-optimal information-seeking action each step with
//! the lifetime fixed at the phase start. Otherwise it takes one reward
//! action that is `max(2^-t, floor)`-optimal for the mixture.

mod episode;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::env::{Action, Belief, EnvironmentMixture, PerceptId};
use crate::machine::Caps;
use crate::rational::{self, serde_q, to_f64, Q};
use crate::values::{effective_horizon, eps_optimal_reward_action, DiscountSchedule, Planner, ValueKind};
use crate::{Error, Result};

pub use episode::{exploration_density, run_episode, wao_metric, EpisodeTrace, StepRecord, TRACE_COLUMNS};

/// Resolution of the default schedule: values are multiples of `2^-20`.
const SCHEDULE_BITS: u32 = 20;

/// The exploration threshold `eps_t`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EpsilonSchedule {
    /// `t^(-1/2)` rounded up to a multiple of `2^-20`.
    #[default]
    InverseSqrt,
    /// The same value at every step.
    Constant {
        #[serde(with = "serde_q")]
        value: Q,
    },
}

impl EpsilonSchedule {
    pub fn epsilon(&self, t: u64) -> Q {
        match self {
            EpsilonSchedule::InverseSqrt => inverse_sqrt(t.max(1)),
            EpsilonSchedule::Constant { value } => value.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let EpsilonSchedule::Constant { value } = self {
            if value <= &Q::zero() {
                return Err(Error::InvalidArgument("constant epsilon must be positive".into()));
            }
        }
        Ok(())
    }
}

/// `ceil(2^20 / sqrt(t)) / 2^20`, i.e. the least `n` with `n^2 t >= 2^40`, over `2^20`.
fn inverse_sqrt(t: u64) -> Q {
    let target = 1u128 << (2 * SCHEDULE_BITS);
    let t = t as u128;
    let mut n = ((target as f64 / t as f64).sqrt().ceil() as u128).max(1);
    while n > 1 && (n - 1) * (n - 1) * t >= target {
        n -= 1;
    }
    while n * n * t < target {
        n += 1;
    }
    rational::dyadic(&BigUint::from(n), SCHEDULE_BITS)
}

/// `H_t(eps_t) / (t eps_t)`, which must tend to zero for the schedule to be admissible.
pub fn schedule_ratio(schedule: &EpsilonSchedule, discount: &DiscountSchedule, t: u64) -> Result<f64> {
    let eps = schedule.epsilon(t);
    let h = effective_horizon(discount, t, &eps)?;
    Ok(h as f64 / (t as f64 * to_f64(&eps)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub discount: DiscountSchedule,
    pub epsilon: EpsilonSchedule,
    /// Lower bound on the exploitation slack `2^-t`.
    pub exploit_floor: f64,
    /// Explore at every step regardless of the information value.
    pub force_explore: bool,
    /// Truncation accuracy for the harness's `V*_mu` and `V^pi_mu`.
    #[serde(with = "serde_q")]
    pub eps_trunc: Q,
    pub caps: Caps,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            discount: DiscountSchedule::default(),
            epsilon: EpsilonSchedule::default(),
            exploit_floor: 1e-12,
            force_explore: false,
            eps_trunc: rational::q(1, 100),
            caps: Caps::default(),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        self.discount.validate()?;
        self.epsilon.validate()?;
        if !(self.exploit_floor > 0.0 && self.exploit_floor < 1.0) {
            return Err(Error::InvalidArgument("exploit_floor must lie in (0, 1)".into()));
        }
        if self.eps_trunc <= Q::zero() || self.eps_trunc >= Q::one() {
            return Err(Error::InvalidArgument("eps_trunc must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Mode {
    Exploring {
        /// Exploration steps still owed after the current one.
        steps_left: u64,
        /// Lifetime of the information-seeking policy, fixed at phase start.
        lifetime: u64,
        /// `eps_t` at phase start.
        epsilon: Q,
    },
    Exploiting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeTag {
    Explore,
    Exploit,
}

impl ModeTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ModeTag::Explore => "explore",
            ModeTag::Exploit => "exploit",
        }
    }
}

/// What the agent knows before acting at time `t`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AgentState {
    pub t: u64,
    pub mode: Mode,
    pub belief: Belief,
}

#[derive(Debug, Clone)]
pub struct Decision {
    pub action: Action,
    pub tag: ModeTag,
    /// State after acting, before the percept arrives.
    pub next: AgentState,
    /// `V*_I` when the exploration trigger was evaluated at this step.
    pub v_info: Option<f64>,
}

/// The agent: a class, its configuration, and a planner whose caches are
/// reused across steps.
#[derive(Debug)]
pub struct BayesExp {
    mix: EnvironmentMixture,
    config: AgentConfig,
    planner: Planner,
}

impl BayesExp {
    pub fn new(mix: EnvironmentMixture, config: AgentConfig) -> Result<Self> {
        config.validate()?;
        let planner = Planner::new(mix.clone(), config.caps);
        Ok(BayesExp { mix, config, planner })
    }

    pub fn mixture(&self) -> &EnvironmentMixture {
        &self.mix
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn initial_state(&self) -> AgentState {
        AgentState {
            t: 1,
            mode: Mode::Exploiting,
            belief: Belief::prior(&self.mix),
        }
    }

    /// `H_t(eps_t)`; zero when the discount has no mass left.
    pub fn phase_length(&self, t: u64) -> Result<u64> {
        match effective_horizon(&self.config.discount, t, &self.config.epsilon.epsilon(t)) {
            Err(Error::UndefinedHorizon(_)) => Ok(0),
            other => other,
        }
    }

    /// Chooses the action at `state.t`.
    pub fn step(&mut self, state: &AgentState) -> Result<Decision> {
        let t = state.t;
        if let Mode::Exploring {
            steps_left,
            lifetime,
            epsilon,
        } = &state.mode
        {
            if *steps_left > 0 {
                let action = self.explore_action(state, *lifetime, epsilon)?;
                let mode = if *steps_left > 1 {
                    Mode::Exploring {
                        steps_left: steps_left - 1,
                        lifetime: *lifetime,
                        epsilon: epsilon.clone(),
                    }
                } else {
                    Mode::Exploiting
                };
                return Ok(self.decided(state, action, ModeTag::Explore, mode, None));
            }
        }

        let epsilon = self.config.epsilon.epsilon(t);
        let horizon = self.phase_length(t)?;
        let lifetime = t + horizon - 1;
        let v_info = self
            .planner
            .optimal(&state.belief, t, &ValueKind::Information, horizon as usize)?
            .value;
        let explore = horizon > 0 && (self.config.force_explore || v_info > to_f64(&epsilon));
        if explore {
            let action = self.explore_action(state, lifetime, &epsilon)?;
            let mode = if horizon > 1 {
                Mode::Exploring {
                    steps_left: horizon - 1,
                    lifetime,
                    epsilon,
                }
            } else {
                Mode::Exploiting
            };
            return Ok(self.decided(state, action, ModeTag::Explore, mode, Some(v_info)));
        }
        let action = self.exploit_action(state)?;
        Ok(self.decided(state, action, ModeTag::Exploit, Mode::Exploiting, Some(v_info)))
    }

    /// Advances the state past the percept answering `action`.
    pub fn observe(&self, next: &AgentState, action: Action, percept: PerceptId) -> Result<AgentState> {
        Ok(AgentState {
            t: next.t + 1,
            mode: next.mode.clone(),
            belief: next.belief.update(&self.mix, action, percept)?,
        })
    }

    fn decided(&self, state: &AgentState, action: Action, tag: ModeTag, mode: Mode, v_info: Option<f64>) -> Decision {
        Decision {
            action,
            tag,
            next: AgentState {
                t: state.t,
                mode,
                belief: state.belief.clone(),
            },
            v_info,
        }
    }

    fn explore_action(&mut self, state: &AgentState, lifetime: u64, epsilon: &Q) -> Result<Action> {
        let depth = (lifetime + 1).saturating_sub(state.t) as usize;
        let plan = self.planner.optimal(&state.belief, state.t, &ValueKind::Information, depth)?;
        Ok(plan.least_within(to_f64(epsilon) / 2.0))
    }

    fn exploit_action(&mut self, state: &AgentState) -> Result<Action> {
        let slack = if state.t >= 1000 {
            0.0
        } else {
            (-(state.t as f64)).exp2()
        };
        let slack = rational::from_f64(slack.max(self.config.exploit_floor))?;
        let (action, _) =
            eps_optimal_reward_action(&mut self.planner, &state.belief, state.t, &self.config.discount, &slack)?;
        Ok(action)
    }
}

#[cfg(test)]
mod tests;
