use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::env::{
    example1_class, random_class, reveal_benchmark_class, Environment, EnvironmentMixture, Percept, PerceptSpace,
    RandomClassSpec, TableEnvironment, Transition,
};
use crate::machine::Caps;
use crate::rational::{half, one, q, Q};
use crate::Error;
use num_traits::Zero;

fn caps() -> Caps {
    Caps::default()
}

fn deterministic(name: &str, space: &PerceptSpace, percept_for_action: &[usize]) -> Arc<dyn Environment> {
    let edges = percept_for_action.iter().enumerate().map(|(a, &e)| {
        (0, a, Transition { percept: e, prob: one(), next: 0 })
    });
    Arc::new(TableEnvironment::new(name, vec!["s".into()], 0, space.num_actions(), space.num_percepts(), edges).unwrap())
}

fn binary_space(actions: usize) -> PerceptSpace {
    PerceptSpace {
        actions: (0..actions).map(|a| format!("a{a}")).collect(),
        percepts: vec![
            Percept { obs: 0, reward: q(0, 1) },
            Percept { obs: 1, reward: q(1, 1) },
        ],
    }
}

/// `{always 0, always 1}` with weights 1/2.
fn two_deterministic() -> EnvironmentMixture {
    let space = binary_space(2);
    let zero = deterministic("zero", &space, &[0, 0]);
    let unit = deterministic("one", &space, &[1, 1]);
    EnvironmentMixture::uniform(Arc::new(space), vec![zero, unit]).unwrap()
}

/// A two-armed deterministic bandit: arm 0 pays 1, arm 1 pays 0.
fn bandit() -> EnvironmentMixture {
    let space = binary_space(2);
    let env = deterministic("bandit", &space, &[1, 0]);
    EnvironmentMixture::singleton(Arc::new(space), env)
}

fn geometric_half() -> DiscountSchedule {
    DiscountSchedule::geometric(half()).unwrap()
}

#[test]
fn effective_horizon_examples() {
    let d = geometric_half();
    for t in [1, 2, 17, 1000] {
        assert_eq!(effective_horizon(&d, t, &q(1, 4)).unwrap(), 2);
        assert_eq!(effective_horizon(&d, t, &half()).unwrap(), 1);
    }
    let table = DiscountSchedule::table(vec![one(), one(), one(), one()]).unwrap();
    assert_eq!(effective_horizon(&table, 1, &half()).unwrap(), 2);
    assert_eq!(effective_horizon(&table, 5, &half()), Err(Error::UndefinedHorizon(5)));
    assert!(effective_horizon(&d, 1, &Q::zero()).is_err());
}

#[test]
fn geometric_horizon_matches_scan() {
    for (num, den) in [(1, 2), (9, 10), (1, 3), (99, 100)] {
        let ratio = q(num, den);
        let d = DiscountSchedule::geometric(ratio.clone()).unwrap();
        for (en, ed) in [(1, 2), (1, 100), (3, 7), (1, 1 << 20)] {
            let eps = q(en, ed);
            let mut k = 0u64;
            let mut tail = one();
            while tail > eps {
                tail *= &ratio;
                k += 1;
            }
            assert_eq!(effective_horizon(&d, 3, &eps).unwrap(), k, "ratio {ratio} eps {eps}");
        }
    }
}

#[test]
fn discount_round_trips_as_text_and_json() {
    for text in ["geometric:1/2", "table:1/1,1/2,0/1"] {
        let d: DiscountSchedule = text.parse().unwrap();
        assert_eq!(d.to_string(), text);
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<DiscountSchedule>(&json).unwrap(), d);
    }
    assert!("geometric:1".parse::<DiscountSchedule>().is_err());
    assert!("table:1,-1".parse::<DiscountSchedule>().is_err());
    assert!("harmonic:1".parse::<DiscountSchedule>().is_err());
}

#[test]
fn tails_and_weights() {
    let d = geometric_half();
    assert_eq!(d.gamma(3), q(1, 8));
    assert_eq!(d.tail(3), q(1, 4));
    assert_eq!(d.weight(3, 4).unwrap(), q(1, 4));
    let table = DiscountSchedule::table(vec![one(), one(), q(2, 1)]).unwrap();
    assert_eq!(table.tail(2), q(3, 1));
    assert_eq!(table.weight(2, 3).unwrap(), q(2, 3));
    assert!(table.weight(4, 4).is_none());
}

#[test]
fn example1_entropy_values() {
    let mix = example1_class();
    let h = History::new();
    let raw = optimal_value(&mix, &h, &ValueKind::Entropy { normalized: false }, 1, &caps()).unwrap();
    let alpha = 0.1 * 20f64.log2();
    assert!((raw.per_action_values[0] - alpha).abs() < 1e-12);
    assert!((raw.per_action_values[1] - 0.5).abs() < 1e-12);
    assert_eq!(raw.best_action, 1);

    let norm = optimal_value(&mix, &h, &ValueKind::Entropy { normalized: true }, 1, &caps()).unwrap();
    assert!((norm.per_action_values[0] - 1.0).abs() < 1e-12);
    assert!(norm.per_action_values[1].abs() < 1e-12);
    assert_eq!(norm.best_action, 0);

    let kind = ValueKind::Entropy { normalized: false };
    assert_eq!(eps_optimal_action(&mix, &h, &kind, 1, 0.01, &caps()).unwrap(), 1);
    assert_eq!(eps_optimal_action(&mix, &h, &kind, 1, 10.0, &caps()).unwrap(), 0);
    assert_eq!(entropy_value(&mix, &h, false, None, 1, &caps()).unwrap(), raw.value);
}

#[test]
fn deterministic_measures_have_no_entropy() {
    let mix = bandit();
    for normalized in [false, true] {
        let v = optimal_value(&mix, &History::new(), &ValueKind::Entropy { normalized }, 3, &caps()).unwrap();
        assert_eq!(v.value, 0.0);
    }
}

#[test]
fn information_value_examples() {
    let two = two_deterministic();
    let v = optimal_value(&two, &History::new(), &ValueKind::Information, 1, &caps()).unwrap();
    // 2 * 1/2 * 1 * log2(1 / (1/2))
    for x in &v.per_action_values {
        assert!((x - 1.0).abs() < 1e-12);
    }
    // After one step the identity is known.
    let h = History::from_cycles(vec![(0, 1)]);
    assert_eq!(info_value(&two, &h, None, 3, &caps()).unwrap(), 0.0);

    let single = bandit();
    let v = optimal_value(&single, &History::new(), &ValueKind::Information, 3, &caps()).unwrap();
    assert_eq!(v.per_action_values, vec![0.0, 0.0]);
}

#[test]
fn example1_information_regression() {
    // alpha: 2 * 1/2 * 1/10 * log2((1/10) / (1/2)); beta: 2 * 1/2 * 1/2 * log2(1/2).
    let mix = example1_class();
    let v = optimal_value(&mix, &History::new(), &ValueKind::Information, 1, &caps()).unwrap();
    assert!((v.per_action_values[0] - 0.1 * 0.2f64.log2()).abs() < 1e-12);
    assert!((v.per_action_values[1] + 0.5).abs() < 1e-12);
    assert_eq!(v.best_action, 0);
}

#[test]
fn reward_value_examples() {
    let mix = bandit();
    let h = History::new();
    let d = geometric_half();
    let eps = q(1, 100);
    let best = reward_value(&mix, &h, &d, None, &eps, &caps()).unwrap();
    assert!(best <= 1.0 && best >= 1.0 - 0.01);
    let inferior = |_: &History| 1;
    assert_eq!(reward_value(&mix, &h, &d, Some(&inferior), &eps, &caps()).unwrap(), 0.0);

    let finished = DiscountSchedule::table(vec![one(), one()]).unwrap();
    let late = History::from_cycles(vec![(0, 1), (0, 1)]);
    assert_eq!(reward_value(&mix, &late, &finished, None, &eps, &caps()).unwrap(), 0.0);
    let kind = ValueKind::Reward { discount: finished };
    assert_eq!(optimal_value(&mix, &late, &kind, 3, &caps()).unwrap().value, 0.0);
}

#[test]
fn truncation_error_is_bounded_on_tables() {
    let d = DiscountSchedule::table(vec![one(), q(1, 2), q(1, 4), q(1, 8), q(1, 16), q(1, 32)]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = RandomClassSpec { members: 2, actions: 2, percepts: 2, states: 2, measures: true, resolution: 4 };
    for _ in 0..5 {
        let mix = random_class(&mut rng, spec);
        let h = History::new();
        let kind = ValueKind::Reward { discount: d.clone() };
        let full = optimal_value(&mix, &h, &kind, 6, &caps()).unwrap().value;
        for eps in [q(1, 2), q(1, 10), q(1, 50)] {
            let truncated = reward_value(&mix, &h, &d, None, &eps, &caps()).unwrap();
            let gap = full - truncated;
            assert!(gap >= -1e-12 && gap <= crate::rational::to_f64(&eps) + 1e-12, "gap {gap}");
        }
    }
}

#[test]
fn scaling_rewards_scales_values() {
    let mix = reveal_benchmark_class();
    let scaled = mix.with_scaled_rewards(&q(1, 3)).unwrap();
    let kind = ValueKind::Reward { discount: geometric_half() };
    let h = History::new();
    let a = optimal_value(&mix, &h, &kind, 5, &caps()).unwrap();
    let b = optimal_value(&scaled, &h, &kind, 5, &caps()).unwrap();
    assert_eq!(a.best_action, b.best_action);
    for (x, y) in a.per_action_values.iter().zip(&b.per_action_values) {
        assert!((x / 3.0 - y).abs() < 1e-12);
    }
}

#[test]
fn example1_oracle() {
    let mix = example1_class();
    let kind = ValueKind::Entropy { normalized: false };
    let v = brute_force_oracle(&mix, &History::new(), &kind, 1, &caps()).unwrap();
    assert_eq!(v.best_action, 1);
    assert!((v.value - 0.5).abs() < 1e-12);
    let reward = ValueKind::Reward { discount: geometric_half() };
    assert_eq!(brute_force_oracle(&mix, &History::new(), &reward, 0, &caps()).unwrap().value, 0.0);
}

#[test]
fn planner_node_cap() {
    let mix = reveal_benchmark_class();
    let tight = Caps { max_planner_nodes: 10, ..Caps::default() };
    let kind = ValueKind::Entropy { normalized: false };
    let err = optimal_value(&mix, &History::new(), &kind, 6, &tight).unwrap_err();
    assert!(matches!(err, Error::ResourceLimit { what: "planner_nodes", .. }));
    let oracle_cap = Caps { max_oracle_policies: 1 << 10, ..Caps::default() };
    assert!(brute_force_oracle(&mix, &History::new(), &kind, 3, &oracle_cap).is_err());
}

fn instance(seed: u64, measures: bool) -> EnvironmentMixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = RandomClassSpec { members: 2, actions: 2, percepts: 2, states: 2, measures, resolution: 8 };
    random_class(&mut rng, spec)
}

fn kinds() -> Vec<ValueKind> {
    vec![
        ValueKind::Entropy { normalized: false },
        ValueKind::Entropy { normalized: true },
        ValueKind::Information,
        ValueKind::Reward { discount: geometric_half() },
        ValueKind::Reward { discount: DiscountSchedule::table(vec![one(), q(3, 4), q(1, 4)]).unwrap() },
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn planner_matches_oracle(seed in any::<u64>(), measures in any::<bool>(), depth in 1usize..=3) {
        let mix = instance(seed, measures);
        for kind in kinds() {
            let planned = optimal_value(&mix, &History::new(), &kind, depth, &caps());
            let oracle = brute_force_oracle(&mix, &History::new(), &kind, depth, &caps());
            match (planned, oracle) {
                (Ok(p), Ok(o)) => {
                    for (x, y) in p.per_action_values.iter().zip(&o.per_action_values) {
                        prop_assert!((x - y).abs() < 1e-9, "{:?}: {} vs {}", kind, x, y);
                    }
                }
                (Err(Error::DeadEnd), _) => prop_assert!(!measures),
                (p, o) => prop_assert!(false, "{:?}: {:?} vs {:?}", kind, p, o),
            }
        }
    }

    #[test]
    fn optimum_dominates_policies(seed in any::<u64>(), bits in any::<u32>()) {
        let mix = instance(seed, true);
        let policy = move |h: &History| -> usize {
            let code = h.cycles().iter().fold(h.len(), |acc, &(a, e)| acc * 4 + a * 2 + e);
            ((bits >> (code % 32)) & 1) as usize
        };
        for kind in kinds() {
            let best = optimal_value(&mix, &History::new(), &kind, 3, &caps()).unwrap().value;
            let v = policy_value(&mix, &History::new(), &kind, 3, &policy, &caps()).unwrap();
            prop_assert!(best >= v - 1e-12);
            if let ValueKind::Reward { .. } = kind {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
            }
            if let ValueKind::Entropy { normalized: true } = kind {
                prop_assert!(v >= -1e-12 && v <= 3.0 + 1e-12);
            }
            if let ValueKind::Information = kind {
                prop_assert!(v >= -1e-12);
            }
        }
    }

    #[test]
    fn eps_optimal_actions_are_within_eps(seed in any::<u64>(), eps in 0.001f64..0.5) {
        let mix = instance(seed, true);
        for kind in kinds() {
            let oracle = brute_force_oracle(&mix, &History::new(), &kind, 2, &caps()).unwrap();
            let a = eps_optimal_action(&mix, &History::new(), &kind, 2, eps, &caps()).unwrap();
            prop_assert!(oracle.per_action_values[a] >= oracle.value - eps);
        }
    }
}
