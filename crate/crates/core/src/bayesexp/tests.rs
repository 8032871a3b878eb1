use std::sync::Arc;

use super::*;
use crate::env::{reveal_benchmark_class, Environment, Percept, PerceptSpace, TableEnvironment, Transition};
use crate::rational::{half, one, q};

fn constant_env(name: &str, space: &PerceptSpace, percept: usize) -> Arc<dyn Environment> {
    let edges = (0..space.num_actions()).map(|a| (0, a, Transition { percept, prob: one(), next: 0 }));
    Arc::new(TableEnvironment::new(name, vec!["s".into()], 0, space.num_actions(), space.num_percepts(), edges).unwrap())
}

fn space() -> Arc<PerceptSpace> {
    Arc::new(PerceptSpace {
        actions: vec!["a".into(), "b".into()],
        percepts: vec![
            Percept { obs: 0, reward: q(0, 1) },
            Percept { obs: 1, reward: q(1, 1) },
        ],
    })
}

fn distinguishable() -> EnvironmentMixture {
    let s = space();
    let members = vec![constant_env("zero", &s, 0), constant_env("one", &s, 1)];
    EnvironmentMixture::uniform(s, members).unwrap()
}

fn singleton() -> EnvironmentMixture {
    let s = space();
    let env = constant_env("one", &s, 1);
    EnvironmentMixture::singleton(s, env)
}

#[test]
fn default_schedule_values() {
    let s = EpsilonSchedule::InverseSqrt;
    assert_eq!(s.epsilon(1), one());
    assert_eq!(s.epsilon(4), half());
    assert_eq!(s.epsilon(16), q(1, 4));
    // Rounded up: 1/sqrt(2) < eps_2 <= 1/sqrt(2) + 2^-20.
    let e2 = to_f64(&s.epsilon(2));
    assert!(e2 >= 0.5f64.sqrt() && e2 <= 0.5f64.sqrt() + 1e-6);
}

#[test]
fn default_schedule_is_nonincreasing() {
    let s = EpsilonSchedule::InverseSqrt;
    let mut prev = s.epsilon(1);
    for t in 2..=1_000_000u64 {
        if t % 997 != 0 && t > 5000 {
            continue;
        }
        let e = s.epsilon(t);
        assert!(e <= prev && e > Q::zero(), "t = {t}");
        prev = e;
    }
}

#[test]
fn singleton_class_always_exploits() {
    let mut agent = BayesExp::new(singleton(), AgentConfig::default()).unwrap();
    let trace = run_episode(&mut agent, 0, 100, 3).unwrap();
    assert_eq!(trace.len(), 100);
    for r in &trace.records {
        assert_eq!(r.mode, ModeTag::Exploit);
        assert!(r.regret().abs() <= 1e-12);
        assert_eq!(r.v_info, Some(0.0));
    }
    assert_eq!(exploration_density(&trace, 100).unwrap(), Q::zero());
    assert!(wao_metric(&trace, 100).unwrap().abs() <= 2.0 * 0.01);
}

#[test]
fn boundary_case_at_first_step() {
    // eps_1 = 1 gives H_1 = 0: nothing can be learned within the lifetime.
    let mut agent = BayesExp::new(distinguishable(), AgentConfig::default()).unwrap();
    let d = agent.step(&agent.initial_state()).unwrap();
    assert_eq!(d.tag, ModeTag::Exploit);

    let config = AgentConfig {
        epsilon: EpsilonSchedule::Constant { value: half() },
        ..AgentConfig::default()
    };
    let mut agent = BayesExp::new(distinguishable(), config).unwrap();
    assert_eq!(agent.phase_length(1).unwrap(), 1);
    let d = agent.step(&agent.initial_state()).unwrap();
    assert_eq!(d.tag, ModeTag::Explore);
    assert!((d.v_info.unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(d.next.mode, Mode::Exploiting);
}

#[test]
fn exploration_phase_counts_down() {
    let mut agent = BayesExp::new(singleton(), AgentConfig::default()).unwrap();
    let mut state = agent.initial_state();
    state.mode = Mode::Exploring {
        steps_left: 2,
        lifetime: 3,
        epsilon: half(),
    };
    let d = agent.step(&state).unwrap();
    assert_eq!(d.tag, ModeTag::Explore);
    assert_eq!(d.v_info, None);
    assert!(matches!(d.next.mode, Mode::Exploring { steps_left: 1, .. }));
}

#[test]
fn phases_run_for_the_effective_horizon() {
    let config = AgentConfig {
        epsilon: EpsilonSchedule::Constant { value: q(1, 8) },
        ..AgentConfig::default()
    };
    let mut agent = BayesExp::new(distinguishable(), config).unwrap();
    let h = agent.phase_length(1).unwrap();
    assert_eq!(h, 3);
    let trace = run_episode(&mut agent, 1, 10, 0).unwrap();
    let modes: Vec<ModeTag> = trace.records.iter().map(|r| r.mode).collect();
    assert_eq!(&modes[..3], &[ModeTag::Explore; 3]);
    assert!(modes[3..].iter().all(|&m| m == ModeTag::Exploit));
    assert_eq!(trace.final_true_posterior, one());
}

#[test]
fn forced_exploration_has_full_density() {
    let config = AgentConfig {
        force_explore: true,
        epsilon: EpsilonSchedule::Constant { value: half() },
        ..AgentConfig::default()
    };
    let mut agent = BayesExp::new(reveal_benchmark_class(), config).unwrap();
    let trace = run_episode(&mut agent, 1, 40, 1).unwrap();
    assert_eq!(exploration_density(&trace, 40).unwrap(), one());
}

#[test]
fn benchmark_identifies_the_true_environment() {
    let mix = reveal_benchmark_class();
    let poor = mix.member_index("alpha-poor").unwrap();
    let mut agent = BayesExp::new(mix, AgentConfig::default()).unwrap();
    let trace = run_episode(&mut agent, poor, 300, 11).unwrap();
    assert!(to_f64(&trace.final_true_posterior) > 0.99);
    assert!(wao_metric(&trace, 300).unwrap() < wao_metric(&trace, 30).unwrap());
    assert!(exploration_density(&trace, 300).unwrap() < exploration_density(&trace, 30).unwrap());
    let first = trace.records[0].regret();
    assert_eq!(wao_metric(&trace, 1).unwrap(), first);
}

#[test]
fn episodes_are_deterministic_per_seed() {
    let run = |seed| {
        let mix = reveal_benchmark_class();
        let mut agent = BayesExp::new(mix.clone(), AgentConfig::default()).unwrap();
        let trace = run_episode(&mut agent, 0, 60, seed).unwrap();
        let mut csv = Vec::new();
        trace.write_csv(&mix, &mut csv).unwrap();
        csv
    };
    assert_eq!(run(5), run(5));
    let text = String::from_utf8(run(5)).unwrap();
    assert!(text.starts_with("t,mode,action,obs,reward,v_star,v_pi,regret,v_info,explore_steps_left,posterior_alpha-rich,posterior_alpha-poor\n"));
}

#[test]
fn halting_environments_end_the_trace() {
    let mix = crate::env::example1_class();
    let mut agent = BayesExp::new(mix, AgentConfig::default()).unwrap();
    let trace = run_episode(&mut agent, 0, 50, 2).unwrap();
    assert!(trace.halted_at.is_some());
    assert!(trace.len() < 50);
}

#[test]
fn schedule_ratio_vanishes() {
    let s = EpsilonSchedule::InverseSqrt;
    let d = DiscountSchedule::default();
    assert!(schedule_ratio(&s, &d, 1_000_000).unwrap() < 0.01);
}

#[test]
fn config_rejects_unknown_keys() {
    let err = serde_json::from_str::<AgentConfig>(r#"{"foo": 1}"#).unwrap_err();
    assert!(err.to_string().contains("foo"));
    let cfg: AgentConfig = serde_json::from_str(r#"{"epsilon": {"kind": "constant", "value": "1/4"}}"#).unwrap();
    assert_eq!(cfg.epsilon.epsilon(7), q(1, 4));
}
