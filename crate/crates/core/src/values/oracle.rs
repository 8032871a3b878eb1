//! Brute-force evaluation over every deterministic policy tree.
//!
//! Every percept sequence of length below the horizon is a decision node;
//! a policy assigns one action to each. Path terms are computed literally
//! from joint sequence masses of the full history, once per (action
//! sequence, percept sequence), and each policy's value is the sum of the
//! terms along its own action choices. Reward terms are exact rationals and
//! policy values are compared exactly; entropy and information terms go
//! through `log2` in double precision.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use super::{PlanResult, ValueKind};
use crate::env::{sequence_mass, EnvironmentMixture, History};
use crate::machine::Caps;
use crate::rational::{to_f64, Q};
use crate::values::planner::neg_p_log_p;
use crate::{Error, Result};

enum Terms {
    Float(Vec<Vec<f64>>),
    /// Numerators over a common denominator.
    Exact { nums: Vec<Vec<BigInt>>, den: BigInt },
}

/// Exact optimal value of `kind` over the next `depth` steps after `h`,
/// found by enumerating all `|A|^(number of decision nodes)` policies.
pub fn brute_force_oracle(
    mix: &EnvironmentMixture,
    h: &History,
    kind: &ValueKind,
    depth: usize,
    caps: &Caps,
) -> Result<PlanResult> {
    if !h.is_complete() {
        return Err(Error::InvalidHistory("history ends with an action".into()));
    }
    h.validate(mix.space())?;
    let na = mix.space().num_actions();
    let ne = mix.space().num_percepts();
    if depth == 0 {
        return Ok(PlanResult::from_values(vec![0.0; na]));
    }

    let decision_nodes: usize = (0..depth as u32).map(|k| ne.pow(k)).sum();
    let policies = (decision_nodes as f64) * (na as f64).log2();
    let log_cap = (caps.max_oracle_policies as f64).log2();
    if policies > log_cap + 1e-9 {
        let requested = (na as u128).checked_pow(decision_nodes as u32).unwrap_or(u128::MAX);
        return Err(Error::limit("oracle_policies", requested, caps.max_oracle_policies as u128));
    }
    let count = na.pow(decision_nodes as u32);

    if mix.sequence_mass(h).is_zero() {
        return Err(Error::ZeroEvidence);
    }
    let terms = path_terms(mix, h, kind, depth)?;

    let mut best = vec![None::<Score>; na];
    let mut policy = vec![0usize; decision_nodes];
    for _ in 0..count {
        let score = evaluate(&terms, &policy, na, ne, depth);
        let slot = &mut best[policy[0]];
        if slot.as_ref().is_none_or(|s| score.greater(s)) {
            *slot = Some(score);
        }
        // Odometer increment.
        for digit in policy.iter_mut() {
            *digit += 1;
            if *digit < na {
                break;
            }
            *digit = 0;
        }
    }
    let values = best
        .into_iter()
        .map(|s| match (s, &terms) {
            (Some(Score::Float(v)), _) => v,
            (Some(Score::Exact(n)), Terms::Exact { den, .. }) => to_f64(&Q::new(n, den.clone())),
            _ => f64::NEG_INFINITY,
        })
        .collect();
    Ok(PlanResult::from_values(values))
}

#[derive(Debug, Clone)]
enum Score {
    Float(f64),
    Exact(BigInt),
}

impl Score {
    fn greater(&self, other: &Score) -> bool {
        match (self, other) {
            (Score::Float(a), Score::Float(b)) => a > b,
            (Score::Exact(a), Score::Exact(b)) => a > b,
            _ => unreachable!("scores of one run share a representation"),
        }
    }
}

/// Sums the policy's terms over every percept sequence of length `1..=depth`.
fn evaluate(terms: &Terms, policy: &[usize], na: usize, ne: usize, depth: usize) -> Score {
    // Frontier entries: (decision node id, action-sequence index, percept-sequence index).
    let mut frontier = vec![(0usize, 0usize, 0usize)];
    let mut level_start = 0usize;
    let mut float = 0.0;
    let mut exact = BigInt::zero();
    for k in 1..=depth {
        let level_size = ne.pow((k - 1) as u32);
        let next_start = level_start + level_size;
        let mut next = Vec::with_capacity(frontier.len() * ne);
        for &(node, a_idx, e_idx) in &frontier {
            let a = policy[node];
            let a_seq = a_idx * na + a;
            for e in 0..ne {
                let e_seq = e_idx * ne + e;
                let cell = a_seq * ne.pow(k as u32) + e_seq;
                match terms {
                    Terms::Float(t) => float += t[k - 1][cell],
                    Terms::Exact { nums, .. } => exact += &nums[k - 1][cell],
                }
                if k < depth {
                    let child = next_start + (node - level_start) * ne + e;
                    next.push((child, a_seq, e_seq));
                }
            }
        }
        frontier = next;
        level_start = next_start;
    }
    match terms {
        Terms::Float(_) => Score::Float(float),
        Terms::Exact { .. } => Score::Exact(exact),
    }
}

/// Literal path terms for every (action sequence, percept sequence) of each
/// length `k = 1..=depth`, indexed by `a_seq * |E|^k + e_seq`.
fn path_terms(mix: &EnvironmentMixture, h: &History, kind: &ValueKind, depth: usize) -> Result<Terms> {
    let na = mix.space().num_actions();
    let ne = mix.space().num_percepts();
    let t = h.time();
    let xi_h = mix.sequence_mass(h);
    let xin_h = mix.normalized_sequence_mass(h)?;
    let member_h: Vec<Q> = mix.members().iter().map(|m| sequence_mass(m.as_ref(), h)).collect();

    let mut exact: Vec<Vec<Q>> = Vec::with_capacity(depth);
    let mut float: Vec<Vec<f64>> = Vec::with_capacity(depth);
    for k in 1..=depth {
        let cells = na.pow(k as u32) * ne.pow(k as u32);
        let mut ex = vec![Q::zero(); if matches!(kind, ValueKind::Reward { .. }) { cells } else { 0 }];
        let mut fl = vec![0.0; if matches!(kind, ValueKind::Reward { .. }) { 0 } else { cells }];
        let last = k == depth;
        for a_seq in 0..na.pow(k as u32) {
            let actions = digits(a_seq, na, k);
            for e_seq in 0..ne.pow(k as u32) {
                let percepts = digits(e_seq, ne, k);
                let mut full = h.clone();
                for (&a, &e) in actions.iter().zip(&percepts) {
                    full.push(a, e);
                }
                let cell = a_seq * ne.pow(k as u32) + e_seq;
                match kind {
                    ValueKind::Reward { discount } => {
                        let Some(w) = discount.weight(t, t + k as u64 - 1) else {
                            continue;
                        };
                        let r = &mix.space().percepts[percepts[k - 1]].reward;
                        ex[cell] = w * r * mix.sequence_mass(&full) / &xi_h;
                    }
                    ValueKind::Entropy { normalized } if last => {
                        let p = if *normalized {
                            dead_end_as_zero(mix.normalized_sequence_mass(&full))? / &xin_h
                        } else {
                            mix.sequence_mass(&full) / &xi_h
                        };
                        fl[cell] = neg_p_log_p(&p);
                    }
                    ValueKind::Information if last => {
                        let xin = dead_end_as_zero(mix.normalized_sequence_mass(&full))?;
                        let mut total = 0.0;
                        for (i, m) in mix.members().iter().enumerate() {
                            let nu = sequence_mass(m.as_ref(), &full);
                            if nu.is_zero() {
                                continue;
                            }
                            let coefficient = &mix.weights()[i] * &nu / &xin_h;
                            let ratio = (&nu / &member_h[i]) / (&xin / &xin_h);
                            total += to_f64(&coefficient) * to_f64(&ratio).log2();
                        }
                        fl[cell] = total;
                    }
                    _ => {}
                }
            }
        }
        exact.push(ex);
        float.push(fl);
    }

    if !matches!(kind, ValueKind::Reward { .. }) {
        return Ok(Terms::Float(float));
    }
    let den = exact
        .iter()
        .flatten()
        .fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
    let nums = exact
        .into_iter()
        .map(|level| level.into_iter().map(|q| q.numer() * (&den / q.denom())).collect())
        .collect();
    Ok(Terms::Exact { nums, den })
}

/// A zero-mass continuation has no normalized mass either; only a
/// positive-mass prefix that cannot continue is a genuine dead end, and it
/// contributes nothing to the literal sums.
fn dead_end_as_zero(mass: Result<Q>) -> Result<Q> {
    match mass {
        Err(Error::DeadEnd) => Ok(Q::zero()),
        other => other,
    }
}

fn digits(mut index: usize, base: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = index % base;
        index /= base;
    }
    out
}
