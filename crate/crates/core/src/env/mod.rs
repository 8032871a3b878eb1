//! Chronological conditional semimeasures and finite Bayesian mixtures.
//!
//! An environment maps the actions taken so far to a semimeasure over
//! percept sequences. Every environment here is a finite-state table: in
//! each state, an action yields a sub-probability distribution over
//! percepts, each percept leading to a successor state. Mass missing from a
//! row is the probability that the environment stops producing percepts.
//! Because the state depends only on the past, percept probabilities never
//! depend on future actions.

mod classes;
mod table;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};
use rand::RngCore;
use serde::Serialize;

use crate::rational::{serde_q, Q};
use crate::{Error, Result};

pub use classes::{example1_class, machine_class, random_class, reveal_benchmark_class, MachineClassSpec, RandomClassSpec};
pub use table::{load_class, parse_class, ClassFile, EnvironmentDecl, PerceptDecl, TableEnvironment, TransitionDecl};

pub type Action = usize;
pub type PerceptId = usize;

/// A percept `(observation, reward)` with reward in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Percept {
    pub obs: u32,
    #[serde(with = "serde_q")]
    pub reward: Q,
}

/// The action and percept alphabets shared by every member of a class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PerceptSpace {
    pub actions: Vec<String>,
    pub percepts: Vec<Percept>,
}

impl PerceptSpace {
    pub fn action_by_name(&self, name: &str) -> Option<Action> {
        self.actions.iter().position(|a| a == name)
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn num_percepts(&self) -> usize {
        self.percepts.len()
    }
}

/// Alternating actions and percepts, possibly ending after an action.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct History {
    cycles: Vec<(Action, PerceptId)>,
    pending: Option<Action>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_cycles(cycles: Vec<(Action, PerceptId)>) -> Self {
        History { cycles, pending: None }
    }

    /// Number of completed action/percept cycles.
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty() && self.pending.is_none()
    }

    /// The current time step: one more than the number of completed cycles.
    pub fn time(&self) -> u64 {
        self.cycles.len() as u64 + 1
    }

    pub fn cycles(&self) -> &[(Action, PerceptId)] {
        &self.cycles
    }

    pub fn pending(&self) -> Option<Action> {
        self.pending
    }

    pub fn is_complete(&self) -> bool {
        self.pending.is_none()
    }

    pub fn act(&mut self, action: Action) -> Result<()> {
        if self.pending.is_some() {
            return Err(Error::InvalidHistory("two actions in a row".into()));
        }
        self.pending = Some(action);
        Ok(())
    }

    pub fn perceive(&mut self, percept: PerceptId) -> Result<()> {
        let action = self
            .pending
            .take()
            .ok_or_else(|| Error::InvalidHistory("percept without a preceding action".into()))?;
        self.cycles.push((action, percept));
        Ok(())
    }

    /// Appends a full cycle.
    pub fn push(&mut self, action: Action, percept: PerceptId) {
        debug_assert!(self.pending.is_none());
        self.cycles.push((action, percept));
    }

    pub fn pop(&mut self) -> Option<(Action, PerceptId)> {
        self.cycles.pop()
    }

    pub fn truncate(&mut self, len: usize) {
        self.cycles.truncate(len);
        self.pending = None;
    }

    pub fn extended(&self, action: Action, percept: PerceptId) -> History {
        let mut h = self.clone();
        h.push(action, percept);
        h
    }

    pub fn validate(&self, space: &PerceptSpace) -> Result<()> {
        let bad_action = |a: Action| a >= space.num_actions();
        for &(a, e) in &self.cycles {
            if bad_action(a) || e >= space.num_percepts() {
                return Err(Error::InvalidHistory(format!("cycle ({a}, {e}) is outside the class alphabets")));
            }
        }
        if self.pending.is_some_and(bad_action) {
            return Err(Error::InvalidHistory("pending action is outside the class alphabet".into()));
        }
        Ok(())
    }

    /// Parses `ACTION/PERCEPT` pairs separated by commas, e.g. `alpha/0,beta/1`.
    /// Actions are names or indices; percepts are indices. A trailing bare
    /// action leaves the history pending on that action.
    pub fn parse(text: &str, space: &PerceptSpace) -> Result<History> {
        let mut h = History::new();
        let text = text.trim();
        if text.is_empty() {
            return Ok(h);
        }
        let items: Vec<&str> = text.split(',').map(str::trim).collect();
        for (i, item) in items.iter().enumerate() {
            let (action, percept) = match item.split_once('/') {
                Some((a, e)) => (a.trim(), Some(e.trim())),
                None if i + 1 == items.len() => (*item, None),
                None => return Err(Error::Parse(format!("expected ACTION/PERCEPT, got `{item}`"))),
            };
            let a = space
                .action_by_name(action)
                .or_else(|| action.parse().ok().filter(|&a: &usize| a < space.num_actions()))
                .ok_or_else(|| Error::Parse(format!("unknown action `{action}`")))?;
            h.act(a)?;
            if let Some(e) = percept {
                let e: usize = e
                    .parse()
                    .ok()
                    .filter(|&e| e < space.num_percepts())
                    .ok_or_else(|| Error::Parse(format!("unknown percept `{e}`")))?;
                h.perceive(e)?;
            }
        }
        Ok(h)
    }

    pub fn render(&self, space: &PerceptSpace) -> String {
        let mut parts: Vec<String> = self
            .cycles
            .iter()
            .map(|&(a, e)| format!("{}/{}", space.actions[a], e))
            .collect();
        if let Some(a) = self.pending {
            parts.push(space.actions[a].clone());
        }
        parts.join(",")
    }
}

/// One outgoing edge of a finite-state environment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub percept: PerceptId,
    pub prob: Q,
    pub next: usize,
}

/// A chronological conditional semimeasure given as a finite-state table.
pub trait Environment: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    fn initial_state(&self) -> usize;

    fn num_states(&self) -> usize;

    fn state_name(&self, state: usize) -> String {
        format!("s{state}")
    }

    /// Outgoing edges of `state` under `action`, at most one per percept,
    /// with total probability at most one.
    fn transitions(&self, state: usize, action: Action) -> &[Transition];

    /// Whether every row sums to exactly one.
    fn is_measure(&self) -> bool;
}

/// Percept masses of a single step, omitting zero entries.
pub type StepMap = BTreeMap<PerceptId, Q>;

pub fn step_total(map: &StepMap) -> Q {
    map.values().fold(Q::zero(), |acc, m| acc + m)
}

fn edge(env: &dyn Environment, state: usize, action: Action, percept: PerceptId) -> Option<&Transition> {
    env.transitions(state, action).iter().find(|t| t.percept == percept)
}

/// The state reached after `h`, or `None` if `h` has zero mass under `env`.
pub fn state_after(env: &dyn Environment, h: &History) -> Option<usize> {
    let mut state = env.initial_state();
    for &(a, e) in h.cycles() {
        let t = edge(env, state, a, e).filter(|t| !t.prob.is_zero())?;
        state = t.next;
    }
    Some(state)
}

/// `nu(e_1:t || a_1:t)`: the joint mass of the history's percepts given its actions.
pub fn sequence_mass(env: &dyn Environment, h: &History) -> Q {
    let mut state = env.initial_state();
    let mut mass = Q::one();
    for &(a, e) in h.cycles() {
        match edge(env, state, a, e) {
            Some(t) if !t.prob.is_zero() => {
                mass *= &t.prob;
                state = t.next;
            }
            _ => return Q::zero(),
        }
    }
    mass
}

/// `nu(. | h, a)`; empty when `h` itself has zero mass.
pub fn conditional(env: &dyn Environment, h: &History, action: Action) -> StepMap {
    match state_after(env, h) {
        Some(state) => env
            .transitions(state, action)
            .iter()
            .filter(|t| !t.prob.is_zero())
            .map(|t| (t.percept, t.prob.clone()))
            .collect(),
        None => StepMap::new(),
    }
}

/// A finite class of environments with positive prior weights summing to at most one.
#[derive(Debug, Clone)]
pub struct EnvironmentMixture {
    space: Arc<PerceptSpace>,
    members: Vec<Arc<dyn Environment>>,
    weights: Vec<Q>,
}

impl EnvironmentMixture {
    pub fn new(space: Arc<PerceptSpace>, members: Vec<Arc<dyn Environment>>, weights: Vec<Q>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidClass("a mixture needs at least one member".into()));
        }
        if members.len() != weights.len() {
            return Err(Error::InvalidClass("one weight per member is required".into()));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_positive()) {
            return Err(Error::InvalidClass(format!("weight of `{}` must be positive", members[i].name())));
        }
        let total = weights.iter().fold(Q::zero(), |acc, w| acc + w);
        if total > Q::one() {
            return Err(Error::InvalidClass(format!("weights sum to {total} > 1")));
        }
        Ok(EnvironmentMixture { space, members, weights })
    }

    /// Uniform weights `1/n`.
    pub fn uniform(space: Arc<PerceptSpace>, members: Vec<Arc<dyn Environment>>) -> Result<Self> {
        let n = members.len().max(1);
        let weights = vec![Q::new(BigInt::one(), BigInt::from(n)); members.len()];
        Self::new(space, members, weights)
    }

    /// The one-member mixture `{env}` with weight one.
    pub fn singleton(space: Arc<PerceptSpace>, env: Arc<dyn Environment>) -> Self {
        EnvironmentMixture {
            space,
            members: vec![env],
            weights: vec![Q::one()],
        }
    }

    pub fn space(&self) -> &Arc<PerceptSpace> {
        &self.space
    }

    pub fn members(&self) -> &[Arc<dyn Environment>] {
        &self.members
    }

    pub fn weights(&self) -> &[Q] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member_index(&self, name: &str) -> Option<usize> {
        self.members.iter().position(|m| m.name() == name)
    }

    pub fn all_measures(&self) -> bool {
        self.members.iter().all(|m| m.is_measure())
    }

    /// The same class with every reward multiplied by `factor` (in `(0, 1]`).
    pub fn with_scaled_rewards(&self, factor: &Q) -> Result<Self> {
        if !factor.is_positive() || factor > &Q::one() {
            return Err(Error::InvalidArgument("reward scale must lie in (0, 1]".into()));
        }
        let mut space = (*self.space).clone();
        for p in &mut space.percepts {
            p.reward = &p.reward * factor;
        }
        Ok(EnvironmentMixture {
            space: Arc::new(space),
            members: self.members.clone(),
            weights: self.weights.clone(),
        })
    }

    /// `xi(h) = sum_nu w_nu nu(h)`.
    pub fn sequence_mass(&self, h: &History) -> Q {
        self.members
            .iter()
            .zip(&self.weights)
            .fold(Q::zero(), |acc, (m, w)| acc + w * sequence_mass(m.as_ref(), h))
    }

    /// `xi_norm(h)`: the product of per-step Solomonoff-normalized conditionals.
    pub fn normalized_sequence_mass(&self, h: &History) -> Result<Q> {
        let mut prefix = History::new();
        let mut mass = Q::one();
        for &(a, e) in h.cycles() {
            let step = mixture_step(self, &prefix, a)?;
            let total = step_total(&step);
            if total.is_zero() {
                return Err(Error::DeadEnd);
            }
            match step.get(&e) {
                Some(m) => mass *= m / &total,
                None => return Ok(Q::zero()),
            }
            prefix.push(a, e);
        }
        Ok(mass)
    }
}

/// `xi(e | h, a)` for every percept, from joint sequence masses:
/// `sum_nu w_nu nu(h a e) / sum_nu w_nu nu(h)`. Not normalized.
pub fn mixture_step(mix: &EnvironmentMixture, h: &History, action: Action) -> Result<StepMap> {
    let evidence = mix.sequence_mass(h);
    if evidence.is_zero() {
        return Err(Error::ZeroEvidence);
    }
    let mut out = StepMap::new();
    for (m, w) in mix.members.iter().zip(&mix.weights) {
        let prior_mass = sequence_mass(m.as_ref(), h);
        if prior_mass.is_zero() {
            continue;
        }
        for (e, p) in conditional(m.as_ref(), h, action) {
            *out.entry(e).or_insert_with(Q::zero) += w * &prior_mass * p;
        }
    }
    for v in out.values_mut() {
        *v = &*v / &evidence;
    }
    Ok(out)
}

/// Divides a step map by its total so it sums to exactly one.
pub fn normalize_step(map: &StepMap) -> Result<StepMap> {
    let total = step_total(map);
    if total.is_zero() {
        return Err(Error::DeadEnd);
    }
    Ok(map.iter().map(|(&e, m)| (e, m / &total)).collect())
}

/// Posterior weights `w_nu nu(h) / xi(h)`, computed from joint masses.
pub fn posterior_weights(mix: &EnvironmentMixture, h: &History) -> Result<Vec<Q>> {
    let evidence = mix.sequence_mass(h);
    if evidence.is_zero() {
        return Err(Error::ZeroEvidence);
    }
    Ok(mix
        .members
        .iter()
        .zip(&mix.weights)
        .map(|(m, w)| w * sequence_mass(m.as_ref(), h) / &evidence)
        .collect())
}

/// Draws a percept from `nu(. | h, a)`; `None` means the environment halted,
/// which happens with the row's missing mass.
pub fn sample_percept(env: &dyn Environment, h: &History, action: Action, rng: &mut dyn RngCore) -> Option<PerceptId> {
    let state = state_after(env, h)?;
    sample_from_state(env, state, action, rng).map(|t| t.percept)
}

/// Draws an edge out of `state`, or `None` for the halting mass.
pub fn sample_from_state<'e>(
    env: &'e dyn Environment,
    state: usize,
    action: Action,
    rng: &mut dyn RngCore,
) -> Option<&'e Transition> {
    let draw = BigInt::from(rng.next_u64());
    let scale = BigInt::from(BigUint::one() << 64);
    let mut cumulative = Q::zero();
    for t in env.transitions(state, action) {
        cumulative += &t.prob;
        // draw / 2^64 < cumulative
        if &draw * cumulative.denom() < cumulative.numer() * &scale {
            return Some(t);
        }
    }
    None
}

/// Posterior state of a mixture after some history: normalized weights,
/// each member's current state (`None` once a member is ruled out), and the
/// ratio `xi(h) / xi_norm(h)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Belief {
    pub posterior: Vec<Q>,
    pub states: Vec<Option<usize>>,
    pub evidence_ratio: Q,
    pub len: usize,
}

impl Belief {
    pub fn prior(mix: &EnvironmentMixture) -> Self {
        let total = mix.weights.iter().fold(Q::zero(), |acc, w| acc + w);
        Belief {
            posterior: mix.weights.iter().map(|w| w / &total).collect(),
            states: mix.members.iter().map(|m| Some(m.initial_state())).collect(),
            evidence_ratio: total,
            len: 0,
        }
    }

    pub fn from_history(mix: &EnvironmentMixture, h: &History) -> Result<Self> {
        if !h.is_complete() {
            return Err(Error::InvalidHistory("history ends with an action".into()));
        }
        h.validate(mix.space())?;
        let mut b = Belief::prior(mix);
        for &(a, e) in h.cycles() {
            b = b.update(mix, a, e)?;
        }
        Ok(b)
    }

    /// `nu(e | state_nu, a)` for a live member.
    pub fn member_step<'a>(&self, mix: &'a EnvironmentMixture, member: usize, action: Action) -> &'a [Transition] {
        match self.states[member] {
            Some(s) if !self.posterior[member].is_zero() => mix.members[member].transitions(s, action),
            _ => &[],
        }
    }

    /// `xi(. | h, a)` as a posterior-weighted sum of member conditionals.
    pub fn step_map(&self, mix: &EnvironmentMixture, action: Action) -> StepMap {
        let mut out = StepMap::new();
        for (i, w) in self.posterior.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            for t in self.member_step(mix, i, action) {
                if !t.prob.is_zero() {
                    *out.entry(t.percept).or_insert_with(Q::zero) += w * &t.prob;
                }
            }
        }
        out
    }

    pub fn update(&self, mix: &EnvironmentMixture, action: Action, percept: PerceptId) -> Result<Self> {
        let step = self.step_map(mix, action);
        let evidence = step.get(&percept).cloned().ok_or(Error::ZeroEvidence)?;
        let total = step_total(&step);
        let mut posterior = Vec::with_capacity(self.posterior.len());
        let mut states = Vec::with_capacity(self.states.len());
        for (i, w) in self.posterior.iter().enumerate() {
            let hit = self.member_step(mix, i, action).iter().find(|t| t.percept == percept && !t.prob.is_zero());
            match hit {
                Some(t) => {
                    posterior.push(w * &t.prob / &evidence);
                    states.push(Some(t.next));
                }
                None => {
                    posterior.push(Q::zero());
                    states.push(None);
                }
            }
        }
        Ok(Belief {
            posterior,
            states,
            evidence_ratio: &self.evidence_ratio * total,
            len: self.len + 1,
        })
    }

    /// Indices of members with positive posterior weight.
    pub fn live(&self) -> impl Iterator<Item = usize> + '_ {
        self.posterior.iter().enumerate().filter(|(_, w)| !w.is_zero()).map(|(i, _)| i)
    }
}
