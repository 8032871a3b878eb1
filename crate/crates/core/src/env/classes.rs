use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::Zero;
use rand::Rng;

use super::{Environment, EnvironmentMixture, Percept, PerceptSpace, TableEnvironment, Transition};
use crate::machine::{confirmed_prefixes, run_program, Caps, Machine, Target};
use crate::rational::{one, pow2_neg, q, Q};
use crate::{Error, Result};

fn single_state(
    name: &str,
    space: &PerceptSpace,
    rows: &[(usize, usize, Q)],
) -> Arc<dyn Environment> {
    let edges = rows.iter().map(|(a, e, p)| {
        (
            0,
            *a,
            Transition {
                percept: *e,
                prob: p.clone(),
                next: 0,
            },
        )
    });
    let env = TableEnvironment::new(name, vec!["s".into()], 0, space.num_actions(), space.num_percepts(), edges)
        .expect("built-in table is well formed");
    Arc::new(env)
}

/// Two semimeasures over actions `{alpha, beta}` and percepts `{0, 1}` (reward 0).
///
/// `nu1` answers `alpha` with percept 0 and `nu2` with percept 1, each with
/// probability 1/10; both answer `beta` with percept 0 with probability 1/2.
/// The remaining mass halts the percept stream. Weights are 1/2 each.
pub fn example1_class() -> EnvironmentMixture {
    let space = PerceptSpace {
        actions: vec!["alpha".into(), "beta".into()],
        percepts: vec![
            Percept { obs: 0, reward: Q::zero() },
            Percept { obs: 1, reward: Q::zero() },
        ],
    };
    let nu1 = single_state("nu1", &space, &[(0, 0, q(1, 10)), (1, 0, q(1, 2))]);
    let nu2 = single_state("nu2", &space, &[(0, 1, q(1, 10)), (1, 0, q(1, 2))]);
    EnvironmentMixture::new(Arc::new(space), vec![nu1, nu2], vec![q(1, 2), q(1, 2)]).expect("valid class")
}

/// A two-environment reward class where one action reveals which
/// environment is active.
///
/// `safe` always yields reward 3/4. `reveal` yields observation 1 in
/// `alpha-rich` (reward 1 with probability 7/8) and observation 0 in
/// `alpha-poor` (reward 1 with probability 1/8). Revealing is optimal only in
/// `alpha-rich`. Weights are 1/2 each.
pub fn reveal_benchmark_class() -> EnvironmentMixture {
    let space = PerceptSpace {
        actions: vec!["safe".into(), "reveal".into()],
        percepts: vec![
            Percept { obs: 0, reward: q(0, 1) },
            Percept { obs: 0, reward: q(1, 1) },
            Percept { obs: 1, reward: q(0, 1) },
            Percept { obs: 1, reward: q(1, 1) },
            Percept { obs: 0, reward: q(3, 4) },
        ],
    };
    let rich = single_state("alpha-rich", &space, &[(0, 4, one()), (1, 3, q(7, 8)), (1, 2, q(1, 8))]);
    let poor = single_state("alpha-poor", &space, &[(0, 4, one()), (1, 1, q(1, 8)), (1, 0, q(7, 8))]);
    EnvironmentMixture::new(Arc::new(space), vec![rich, poor], vec![q(1, 2), q(1, 2)]).expect("valid class")
}

/// Parameters for deriving deterministic environments from machine programs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MachineClassSpec {
    pub actions: usize,
    pub obs_bits: u32,
    pub max_len: u32,
    pub steps: u64,
}

/// Deterministic, stateless environments read off program outputs.
///
/// A program whose output reaches `actions * obs_bits` bits within the
/// budget defines the table "action `a` yields observation `o_a`", where
/// `o_a` is the `a`-th block of `obs_bits` output bits. Rewards are
/// `o / (2^obs_bits - 1)`. Programs defining the same table are merged and
/// the table is weighted by the total mass `sum 2^-|p|` of its programs;
/// weights sum to at most one because confirmed prefixes are prefix-free.
pub fn machine_class(machine: &dyn Machine, spec: MachineClassSpec, caps: &Caps) -> Result<EnvironmentMixture> {
    if spec.actions == 0 || spec.obs_bits == 0 || spec.obs_bits > 8 {
        return Err(Error::InvalidArgument("need at least one action and 1..=8 observation bits".into()));
    }
    let block = spec.obs_bits as usize;
    let needed = spec.actions * block;
    let target = Target {
        prefix: Default::default(),
        extra: needed,
    };
    let programs = confirmed_prefixes(machine, &target, spec.max_len, spec.steps, caps)?;
    if programs.is_empty() {
        return Err(Error::InsufficientBudget("no program produced a full table".into()));
    }

    let levels = 1u32 << spec.obs_bits;
    let space = PerceptSpace {
        actions: (0..spec.actions).map(|a| format!("a{a}")).collect(),
        percepts: (0..levels)
            .map(|o| Percept {
                obs: o,
                reward: q(o as i64, (levels - 1) as i64),
            })
            .collect(),
    };

    // table -> (weight, shortest program)
    let mut tables: BTreeMap<Vec<usize>, (Q, String)> = BTreeMap::new();
    for p in programs {
        let out = run_program(machine, &p, spec.steps).output;
        let table: Vec<usize> = out.bits()[..needed]
            .chunks(block)
            .map(|c| c.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize))
            .collect();
        let mass = pow2_neg(p.len() as u32);
        let entry = tables.entry(table).or_insert_with(|| (Q::zero(), p.to_string()));
        entry.0 += mass;
        if p.len() < entry.1.len() {
            entry.1 = p.to_string();
        }
    }

    let mut members = Vec::with_capacity(tables.len());
    let mut weights = Vec::with_capacity(tables.len());
    for (table, (weight, program)) in tables {
        let rows: Vec<(usize, usize, Q)> = table.iter().enumerate().map(|(a, &o)| (a, o, one())).collect();
        let name = if program.is_empty() { "p:e".to_string() } else { format!("p:{program}") };
        members.push(single_state(&name, &space, &rows));
        weights.push(weight);
    }
    EnvironmentMixture::new(Arc::new(space), members, weights)
}

/// Shape of a randomly generated class of finite-state environments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomClassSpec {
    pub members: usize,
    pub actions: usize,
    pub percepts: usize,
    pub states: usize,
    /// Whether every row must sum to one; otherwise rows keep a random deficit.
    pub measures: bool,
    /// Probabilities and rewards are multiples of `1 / resolution`.
    pub resolution: u32,
}

/// A random class with rational transition probabilities, rewards and
/// positive weights summing to one. Deterministic for a given generator state.
pub fn random_class<R: Rng + ?Sized>(rng: &mut R, spec: RandomClassSpec) -> EnvironmentMixture {
    assert!(spec.members > 0 && spec.actions > 0 && spec.percepts > 0 && spec.states > 0 && spec.resolution > 0);
    let res = spec.resolution as i64;
    let mut percepts: Vec<Percept> = Vec::with_capacity(spec.percepts);
    for obs in 0..spec.percepts as u32 {
        percepts.push(Percept {
            obs,
            reward: q(rng.gen_range(0..=res), res),
        });
    }
    let space = PerceptSpace {
        actions: (0..spec.actions).map(|a| format!("a{a}")).collect(),
        percepts,
    };
    let mut members: Vec<Arc<dyn Environment>> = Vec::with_capacity(spec.members);
    for i in 0..spec.members {
        let mut edges = Vec::new();
        for s in 0..spec.states {
            for a in 0..spec.actions {
                let total = if spec.measures { res } else { rng.gen_range(0..=res) };
                // Split `total` units among the percepts.
                let mut cuts: Vec<i64> = (0..spec.percepts - 1).map(|_| rng.gen_range(0..=total)).collect();
                cuts.sort_unstable();
                cuts.push(total);
                let mut prev = 0;
                for (e, cut) in cuts.into_iter().enumerate() {
                    let units = cut - prev;
                    prev = cut;
                    if units > 0 {
                        let next = rng.gen_range(0..spec.states);
                        edges.push((s, a, Transition { percept: e, prob: q(units, res), next }));
                    }
                }
            }
        }
        let states = (0..spec.states).map(|s| format!("s{s}")).collect();
        let env = TableEnvironment::new(format!("r{i}"), states, 0, spec.actions, spec.percepts, edges)
            .expect("generated table is well formed");
        members.push(Arc::new(env));
    }
    let raw: Vec<i64> = (0..spec.members).map(|_| rng.gen_range(1..=res)).collect();
    let sum: i64 = raw.iter().sum();
    let weights = raw.into_iter().map(|w| q(w, sum)).collect();
    EnvironmentMixture::new(Arc::new(space), members, weights).expect("generated class is valid")
}
