use std::collections::HashMap;
use std::io::{self, Write};

use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{AgentState, BayesExp, ModeTag};
use crate::env::{sample_from_state, Action, Belief, EnvironmentMixture, PerceptId};
use crate::rational::{q, to_f64, Q};
use crate::values::{effective_horizon, Planner, ValueKind};
use crate::{Error, Result};

/// Columns of the CSV trace, before one `posterior_<name>` column per member.
pub const TRACE_COLUMNS: [&str; 10] =
    ["t", "mode", "action", "obs", "reward", "v_star", "v_pi", "regret", "v_info", "explore_steps_left"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: u64,
    pub mode: ModeTag,
    pub action: Action,
    pub percept: PerceptId,
    pub v_star: f64,
    pub v_pi: f64,
    pub v_info: Option<f64>,
    pub steps_left: u64,
    /// Posterior weights after the percept of this step.
    pub posterior: Vec<f64>,
}

impl StepRecord {
    pub fn regret(&self) -> f64 {
        self.v_star - self.v_pi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeTrace {
    pub members: Vec<String>,
    pub true_env: usize,
    pub records: Vec<StepRecord>,
    /// Time step at which the true environment stopped emitting percepts.
    pub halted_at: Option<u64>,
    /// Exact posterior of the true environment after the last step.
    #[serde(with = "crate::rational::serde_q")]
    pub final_true_posterior: Q,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Writes the trace as CSV. Floats use 12 decimals.
    pub fn write_csv<W: Write>(&self, mix: &EnvironmentMixture, mut out: W) -> io::Result<()> {
        let mut header: Vec<String> = TRACE_COLUMNS.iter().map(|c| c.to_string()).collect();
        header.extend(self.members.iter().map(|m| format!("posterior_{}", csv_safe(m))));
        writeln!(out, "{}", header.join(","))?;
        let space = mix.space();
        for r in &self.records {
            let percept = &space.percepts[r.percept];
            let v_info = r.v_info.map(|v| format!("{v:.12}")).unwrap_or_default();
            write!(
                out,
                "{},{},{},{},{},{:.12},{:.12},{:.12},{},{}",
                r.t,
                r.mode.as_str(),
                csv_safe(&space.actions[r.action]),
                percept.obs,
                crate::rational::to_string(&percept.reward),
                r.v_star,
                r.v_pi,
                r.regret(),
                v_info,
                r.steps_left,
            )?;
            for w in &r.posterior {
                write!(out, ",{w:.12}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn csv_safe(text: &str) -> String {
    text.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.:".contains(c) { c } else { '_' })
        .collect()
}

/// Runs the agent against member `true_env` of its own class for up to
/// `steps` steps, recording `V*_mu` and the agent's own value `V^pi_mu`
/// (both truncated at `H_t(eps_trunc)`) before every action.
pub fn run_episode(agent: &mut BayesExp, true_env: usize, steps: u64, seed: u64) -> Result<EpisodeTrace> {
    let mix = agent.mixture().clone();
    if true_env >= mix.len() {
        return Err(Error::InvalidArgument(format!("no member with index {true_env}")));
    }
    if steps > agent.config().caps.max_steps {
        return Err(Error::limit("episode_steps", steps, agent.config().caps.max_steps));
    }
    let mu = mix.members()[true_env].clone();
    let mu_mix = EnvironmentMixture::singleton(mix.space().clone(), mu.clone());
    let mut mu_planner = Planner::new(mu_mix.clone(), agent.config().caps);
    let mut mu_belief = Belief::prior(&mu_mix);
    let mut mu_state = mu.initial_state();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let discount = agent.config().discount.clone();
    let eps_trunc = agent.config().eps_trunc.clone();
    let reward_kind = ValueKind::Reward {
        discount: discount.clone(),
    };

    let mut state = agent.initial_state();
    let mut records = Vec::with_capacity(steps.min(1 << 20) as usize);
    let mut halted_at = None;
    for _ in 0..steps {
        let t = state.t;
        let depth = match effective_horizon(&discount, t, &eps_trunc) {
            Ok(d) => d as usize,
            Err(Error::UndefinedHorizon(_)) => 0,
            Err(e) => return Err(e),
        };
        let v_star = mu_planner.optimal(&mu_belief, t, &reward_kind, depth)?.value;
        let v_pi = on_policy_value(agent, &mu_mix, &state, &mu_belief, t, depth)?;

        let decision = agent.step(&state)?;
        let Some(edge) = sample_from_state(mu.as_ref(), mu_state, decision.action, &mut rng) else {
            halted_at = Some(t);
            break;
        };
        let percept = edge.percept;
        mu_state = edge.next;
        mu_belief = mu_belief.update(&mu_mix, decision.action, percept)?;
        state = agent.observe(&decision.next, decision.action, percept)?;
        let steps_left = match &state.mode {
            super::Mode::Exploring { steps_left, .. } => *steps_left,
            super::Mode::Exploiting => 0,
        };
        records.push(StepRecord {
            t,
            mode: decision.tag,
            action: decision.action,
            percept,
            v_star,
            v_pi,
            v_info: decision.v_info,
            steps_left,
            posterior: state.belief.posterior.iter().map(to_f64).collect(),
        });
    }
    Ok(EpisodeTrace {
        members: mix.members().iter().map(|m| m.name().to_string()).collect(),
        true_env,
        records,
        halted_at,
        final_true_posterior: state.belief.posterior[true_env].clone(),
    })
}

/// `V^pi_mu` of the agent's own (history-dependent) policy from `state`,
/// truncated after `depth` steps, by expanding the true environment's
/// percepts and replaying the agent's decision at every node.
fn on_policy_value(
    agent: &mut BayesExp,
    mu_mix: &EnvironmentMixture,
    state: &AgentState,
    mu_belief: &Belief,
    t: u64,
    depth: usize,
) -> Result<f64> {
    let discount = agent.config().discount.clone();
    if discount.weight(t, t).is_none() {
        return Ok(0.0);
    }
    let weights: Vec<f64> = (0..depth as u64)
        .map(|k| discount.weight(t, t + k).map(|w| to_f64(&w)).unwrap_or(0.0))
        .collect();
    let mut memo = HashMap::new();
    expand(agent, mu_mix, state, mu_belief, &weights, 0, &mut memo)
}

/// Values already expanded during one evaluation. The agent's decision is a
/// function of its state, so equal (agent state, true belief) pairs at the
/// same depth have equal values.
type ExpandMemo = HashMap<(AgentState, Belief), f64>;

fn expand(
    agent: &mut BayesExp,
    mu_mix: &EnvironmentMixture,
    state: &AgentState,
    mu_belief: &Belief,
    weights: &[f64],
    k: usize,
    memo: &mut ExpandMemo,
) -> Result<f64> {
    if k == weights.len() {
        return Ok(0.0);
    }
    let key = (state.clone(), mu_belief.clone());
    if let Some(&v) = memo.get(&key) {
        return Ok(v);
    }
    let decision = agent.step(state)?;
    let step = mu_belief.step_map(mu_mix, decision.action);
    let mut value = 0.0;
    for (&e, p) in &step {
        if p.is_zero() {
            continue;
        }
        let r = to_f64(&mu_mix.space().percepts[e].reward);
        let next = agent.observe(&decision.next, decision.action, e)?;
        let mu_next = mu_belief.update(mu_mix, decision.action, e)?;
        value += to_f64(p) * (weights[k] * r + expand(agent, mu_mix, &next, &mu_next, weights, k + 1, memo)?);
    }
    memo.insert(key, value);
    Ok(value)
}

/// Mean regret `(1/t) sum_{k <= t} (V*_mu - V^pi_mu)`.
pub fn wao_metric(trace: &EpisodeTrace, up_to: usize) -> Result<f64> {
    if up_to == 0 || up_to > trace.len() {
        return Err(Error::InvalidArgument(format!("t = {up_to} is outside the trace (length {})", trace.len())));
    }
    let total: f64 = trace.records[..up_to].iter().map(StepRecord::regret).sum();
    Ok(total / up_to as f64)
}

/// Fraction of the first `t` steps spent exploring.
pub fn exploration_density(trace: &EpisodeTrace, up_to: usize) -> Result<Q> {
    if up_to == 0 || up_to > trace.len() {
        return Err(Error::InvalidArgument(format!("t = {up_to} is outside the trace (length {})", trace.len())));
    }
    let explored = trace.records[..up_to].iter().filter(|r| r.mode == ModeTag::Explore).count();
    Ok(q(explored as i64, up_to as i64))
}
