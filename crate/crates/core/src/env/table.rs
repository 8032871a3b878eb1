use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::{Action, Environment, EnvironmentMixture, Percept, PerceptId, PerceptSpace, Transition};
use crate::rational::{serde_q, serde_q_opt, Q};
use crate::{Error, Result};

/// A finite-state environment stored as `rows[state][action]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableEnvironment {
    name: String,
    states: Vec<String>,
    initial: usize,
    rows: Vec<Vec<Vec<Transition>>>,
    measure: bool,
}

impl TableEnvironment {
    /// Builds a table from `(state, action, transition)` edges. Rows must
    /// list each percept at most once, with probabilities in `[0, 1]`
    /// summing to at most one.
    pub fn new(
        name: impl Into<String>,
        states: Vec<String>,
        initial: usize,
        num_actions: usize,
        num_percepts: usize,
        edges: impl IntoIterator<Item = (usize, Action, Transition)>,
    ) -> Result<Self> {
        let name = name.into();
        let bad = |msg: String| Error::InvalidClass(format!("environment `{name}`: {msg}"));
        if states.is_empty() || initial >= states.len() {
            return Err(bad("initial state is out of range".into()));
        }
        let mut rows = vec![vec![Vec::<Transition>::new(); num_actions]; states.len()];
        for (state, action, t) in edges {
            if state >= states.len() || t.next >= states.len() {
                return Err(bad(format!("state index out of range in edge from {state}")));
            }
            if action >= num_actions {
                return Err(bad(format!("action index {action} out of range")));
            }
            if t.percept >= num_percepts {
                return Err(bad(format!("percept index {} out of range", t.percept)));
            }
            if t.prob < Q::zero() || t.prob > Q::one() {
                return Err(bad(format!("probability {} is outside [0, 1]", t.prob)));
            }
            let row = &mut rows[state][action];
            if row.iter().any(|u| u.percept == t.percept) {
                return Err(bad(format!(
                    "percept {} listed twice for state `{}`, action {action}",
                    t.percept, states[state]
                )));
            }
            row.push(t);
        }
        let mut measure = true;
        for (s, per_action) in rows.iter_mut().enumerate() {
            for (a, row) in per_action.iter_mut().enumerate() {
                row.sort_by_key(|t| t.percept);
                let total = row.iter().fold(Q::zero(), |acc, t| acc + &t.prob);
                if total > Q::one() {
                    return Err(bad(format!("row (`{}`, {a}) sums to {total} > 1", states[s])));
                }
                measure &= total.is_one();
            }
        }
        Ok(TableEnvironment {
            name,
            states,
            initial,
            rows,
            measure,
        })
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }
}

impl Environment for TableEnvironment {
    fn name(&self) -> &str {
        &self.name
    }

    fn initial_state(&self) -> usize {
        self.initial
    }

    fn num_states(&self) -> usize {
        self.states.len()
    }

    fn state_name(&self, state: usize) -> String {
        self.states[state].clone()
    }

    fn transitions(&self, state: usize, action: Action) -> &[Transition] {
        &self.rows[state][action]
    }

    fn is_measure(&self) -> bool {
        self.measure
    }
}

/// On-disk description of an environment class.
///
/// ```json
/// {
///   "actions": ["alpha", "beta"],
///   "percepts": [{"obs": 0, "reward": "0/1"}, {"obs": 1, "reward": "0/1"}],
///   "environments": [
///     {"name": "nu1", "weight": "1/2", "initial": "s",
///      "transitions": [{"state": "s", "action": "alpha", "percept": 0, "prob": "1/10"}]}
///   ]
/// }
/// ```
///
/// Percepts are referenced by index. `next` defaults to the source state,
/// `initial` to the first state mentioned, and omitted weights to an equal
/// share of whatever mass the explicit weights leave (all equal when none
/// are given).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassFile {
    pub actions: Vec<String>,
    pub percepts: Vec<PerceptDecl>,
    pub environments: Vec<EnvironmentDecl>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptDecl {
    pub obs: u32,
    #[serde(with = "serde_q")]
    pub reward: Q,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentDecl {
    pub name: String,
    #[serde(default, with = "serde_q_opt", skip_serializing_if = "Option::is_none")]
    pub weight: Option<Q>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<String>,
    pub transitions: Vec<TransitionDecl>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionDecl {
    pub state: String,
    pub action: String,
    pub percept: PerceptId,
    #[serde(with = "serde_q")]
    pub prob: Q,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next: Option<String>,
}

impl ClassFile {
    /// The declarative form of an existing mixture, with explicit weights.
    pub fn describe(mix: &EnvironmentMixture) -> ClassFile {
        let space = mix.space();
        let environments = mix
            .members()
            .iter()
            .zip(mix.weights())
            .map(|(env, w)| {
                let mut transitions = Vec::new();
                for s in 0..env.num_states() {
                    for (a, action) in space.actions.iter().enumerate() {
                        for t in env.transitions(s, a) {
                            transitions.push(TransitionDecl {
                                state: env.state_name(s),
                                action: action.clone(),
                                percept: t.percept,
                                prob: t.prob.clone(),
                                next: (t.next != s).then(|| env.state_name(t.next)),
                            });
                        }
                    }
                }
                EnvironmentDecl {
                    name: env.name().to_string(),
                    weight: Some(w.clone()),
                    initial: Some(env.state_name(env.initial_state())),
                    transitions,
                }
            })
            .collect();
        ClassFile {
            actions: space.actions.clone(),
            percepts: space
                .percepts
                .iter()
                .map(|p| PerceptDecl {
                    obs: p.obs,
                    reward: p.reward.clone(),
                })
                .collect(),
            environments,
        }
    }

    pub fn build(&self) -> Result<EnvironmentMixture> {
        if self.actions.is_empty() {
            return Err(Error::InvalidClass("at least one action is required".into()));
        }
        if self.percepts.is_empty() {
            return Err(Error::InvalidClass("at least one percept is required".into()));
        }
        let unique: BTreeSet<&String> = self.actions.iter().collect();
        if unique.len() != self.actions.len() {
            return Err(Error::InvalidClass("action names must be distinct".into()));
        }
        let mut percepts = Vec::with_capacity(self.percepts.len());
        for (i, p) in self.percepts.iter().enumerate() {
            if p.reward < Q::zero() || p.reward > Q::one() {
                return Err(Error::InvalidClass(format!("percepts[{i}]: reward {} is outside [0, 1]", p.reward)));
            }
            percepts.push(Percept {
                obs: p.obs,
                reward: p.reward.clone(),
            });
        }
        let distinct: BTreeSet<&Percept> = percepts.iter().collect();
        if distinct.len() != percepts.len() {
            return Err(Error::InvalidClass("percepts must be distinct".into()));
        }
        let space = Arc::new(PerceptSpace {
            actions: self.actions.clone(),
            percepts,
        });
        let names: BTreeSet<&String> = self.environments.iter().map(|e| &e.name).collect();
        if names.len() != self.environments.len() {
            return Err(Error::InvalidClass("environment names must be distinct".into()));
        }

        let mut members: Vec<Arc<dyn Environment>> = Vec::new();
        for decl in &self.environments {
            members.push(Arc::new(decl.build(&space)?));
        }
        let weights = self.weights()?;
        EnvironmentMixture::new(space, members, weights)
    }

    fn weights(&self) -> Result<Vec<Q>> {
        let explicit = self
            .environments
            .iter()
            .filter_map(|e| e.weight.as_ref())
            .fold(Q::zero(), |acc, w| acc + w);
        let missing = self.environments.iter().filter(|e| e.weight.is_none()).count();
        let share = if missing == 0 {
            Q::zero()
        } else {
            (Q::one() - &explicit) / Q::from_integer(missing.into())
        };
        Ok(self
            .environments
            .iter()
            .map(|e| e.weight.clone().unwrap_or_else(|| share.clone()))
            .collect())
    }
}

impl EnvironmentDecl {
    fn build(&self, space: &PerceptSpace) -> Result<TableEnvironment> {
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let mut states: Vec<String> = Vec::new();
        let mut intern = |name: &str, states: &mut Vec<String>| -> usize {
            *index.entry(name.to_string()).or_insert_with(|| {
                states.push(name.to_string());
                states.len() - 1
            })
        };
        let mut initial = self.initial.as_deref().map(|s| intern(s, &mut states));
        let mut edges = Vec::with_capacity(self.transitions.len());
        for (i, t) in self.transitions.iter().enumerate() {
            let from = intern(&t.state, &mut states);
            initial.get_or_insert(from);
            let next = match &t.next {
                Some(n) => intern(n, &mut states),
                None => from,
            };
            let action = space.action_by_name(&t.action).ok_or_else(|| {
                Error::InvalidClass(format!(
                    "environment `{}`: transitions[{i}].action `{}` is not declared",
                    self.name, t.action
                ))
            })?;
            edges.push((
                from,
                action,
                Transition {
                    percept: t.percept,
                    prob: t.prob.clone(),
                    next,
                },
            ));
        }
        if states.is_empty() {
            states.push("s".into());
        }
        TableEnvironment::new(
            self.name.clone(),
            states,
            initial.unwrap_or(0),
            space.num_actions(),
            space.num_percepts(),
            edges,
        )
    }
}

/// Parses a class from JSON text.
pub fn parse_class(text: &str) -> Result<EnvironmentMixture> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ClassFile = serde_path_to_error::deserialize(de)
        .map_err(|e| Error::InvalidClass(format!("{}: {}", e.path(), e.inner())))?;
    file.build()
}

/// Reads and parses a class file.
pub fn load_class(path: &Path) -> Result<EnvironmentMixture> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidClass(format!("cannot read {}: {e}", path.display())))?;
    parse_class(&text)
}
