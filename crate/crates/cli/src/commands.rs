use std::path::Path;

use serde_json::{json, Value};

use uailab_core::bayesexp::{exploration_density, run_episode, wao_metric, BayesExp};
use uailab_core::bits::BitString;
use uailab_core::env::{
    example1_class, load_class, machine_class, reveal_benchmark_class, ClassFile, EnvironmentMixture, History,
    MachineClassSpec,
};
use uailab_core::machine::{machine_by_id, Caps, Machine};
use uailab_core::prior::{
    adversarial_sequence, approx_mm, bracket_conditional_m, bracket_m, bracket_mnorm, Budget, BudgetSchedule,
    ProbabilityBracket,
};
use uailab_core::rational::{self, to_f64, Q};
use uailab_core::values::{brute_force_oracle, optimal_value, DiscountSchedule, PlanResult, ValueKind};

use crate::report::{Report, Table};
use crate::{AgentCommand, CliError, Command, EnvCommand, KindArg, MachineArgs, PriorCommand, ReproCommand, RunConfig, ValueCommand};

const DEFAULT_BUDGET_INDEX: u32 = 10;

pub(crate) fn execute(command: &Command, config: &RunConfig) -> Result<String, CliError> {
    let caps = config.caps()?;
    match command {
        Command::Prior(cmd) => prior(cmd, config, &caps),
        Command::Env(cmd) => env(cmd, config, &caps),
        Command::Value(cmd) => value(cmd, config, &caps),
        Command::Agent(cmd) => agent(cmd, config, &caps),
        Command::Repro(ReproCommand::Example1) => repro_example1(config, &caps),
        Command::Repro(ReproCommand::Adversarial { length, budget }) => {
            repro_adversarial(config, &caps, *length, *budget)
        }
    }
}

fn bits(text: &str) -> Result<BitString, CliError> {
    text.parse().map_err(|e: uailab_core::Error| CliError::Usage(e.to_string()))
}

fn q_text(value: &Q) -> String {
    rational::to_string(value)
}

fn bracket_json(b: &ProbabilityBracket) -> Value {
    json!({
        "lo": q_text(&b.lo),
        "hi": q_text(&b.hi),
        "width": q_text(&b.width()),
        "lo_f64": to_f64(&b.lo),
        "hi_f64": to_f64(&b.hi),
    })
}

fn budget_json(budget: Budget) -> Value {
    match budget {
        Budget::Empty => json!("empty"),
        Budget::Phase { max_len, steps } => json!({"max_len": max_len, "steps": steps}),
    }
}

fn resolve_machine(args: &MachineArgs, config: &RunConfig) -> Result<(String, std::sync::Arc<dyn Machine>, Budget), CliError> {
    let id = args.machine.clone().unwrap_or_else(|| config.machine.clone());
    let machine = machine_by_id(&id).map_err(|e| CliError::Usage(e.to_string()))?;
    let budget = match (args.max_len, args.steps) {
        (Some(max_len), Some(steps)) => Budget::phase(max_len, steps),
        _ => BudgetSchedule::Dovetail.budget(args.budget.unwrap_or(DEFAULT_BUDGET_INDEX)),
    };
    Ok((id, machine, budget))
}

/// Writes `value` as pretty JSON to `<out>/<name>` and returns the same text.
fn emit_json(config: &RunConfig, name: &str, value: &Value) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("json value serializes");
    text.push('\n');
    std::fs::create_dir_all(&config.output_dir)?;
    std::fs::write(config.output_dir.join(name), &text)?;
    Ok(text)
}

fn prior(cmd: &PriorCommand, config: &RunConfig, caps: &Caps) -> Result<String, CliError> {
    match cmd {
        PriorCommand::M { machine, x } => {
            let (id, m, budget) = resolve_machine(machine, config)?;
            let b = bracket_m(m.as_ref(), &bits(x)?, budget, caps)?;
            let out = json!({"quantity": "M", "machine": id, "x": x, "budget": budget_json(budget), "bracket": bracket_json(&b)});
            emit_json(config, "prior-m.json", &out)
        }
        PriorCommand::Cond { machine, x, y } => {
            let (id, m, budget) = resolve_machine(machine, config)?;
            let b = bracket_conditional_m(m.as_ref(), &bits(x)?, &bits(y)?, budget, caps)?;
            let out = json!({"quantity": "M(xy|x)", "machine": id, "x": x, "y": y, "budget": budget_json(budget), "bracket": bracket_json(&b)});
            emit_json(config, "prior-cond.json", &out)
        }
        PriorCommand::Mnorm { machine, x } => {
            let (id, m, budget) = resolve_machine(machine, config)?;
            let b = bracket_mnorm(m.as_ref(), &bits(x)?, budget, caps)?;
            let out = json!({"quantity": "M_norm", "machine": id, "x": x, "budget": budget_json(budget), "bracket": bracket_json(&b)});
            emit_json(config, "prior-mnorm.json", &out)
        }
        PriorCommand::Mm { machine, x, depth } => {
            let (id, m, budget) = resolve_machine(machine, config)?;
            let v = approx_mm(m.as_ref(), &bits(x)?, *depth, budget, caps)?;
            let out = json!({
                "quantity": "MM_depth",
                "machine": id,
                "x": x,
                "depth": depth,
                "budget": budget_json(budget),
                "value": q_text(&v),
                "value_f64": to_f64(&v),
                "note": "finite-depth sum at a fixed budget; no convergence guarantee in the depth",
            });
            emit_json(config, "prior-mm.json", &out)
        }
        PriorCommand::Adversarial { machine, length } => {
            let (id, m, budget) = resolve_machine(machine, config)?;
            let z = adversarial_sequence(m.as_ref(), *length, budget, caps)?;
            let prefix_mass = bracket_m(m.as_ref(), &z.bits, budget, caps)?;
            let out = json!({
                "quantity": "adversarial",
                "machine": id,
                "budget": budget_json(budget),
                "bits": z.bits.to_string(),
                "decided": z.decided,
                "all_decided": z.all_decided(),
                "conditionals": z.conditionals.iter().map(bracket_json).collect::<Vec<_>>(),
                "prefix_bracket": bracket_json(&prefix_mass),
            });
            emit_json(config, "prior-adversarial.json", &out)
        }
    }
}

fn resolve_class(arg: Option<&str>, config: &RunConfig) -> Result<(String, EnvironmentMixture), CliError> {
    let spec = arg
        .map(str::to_string)
        .or_else(|| config.class.clone())
        .ok_or_else(|| CliError::Usage("no environment class given (use --class or the config's class)".into()))?;
    let mix = match spec.as_str() {
        "builtin:example1" => example1_class(),
        "builtin:reveal-benchmark" => reveal_benchmark_class(),
        other if other.starts_with("builtin:") => {
            return Err(CliError::Usage(format!(
                "unknown builtin class `{other}` (known: builtin:example1, builtin:reveal-benchmark)"
            )))
        }
        path => load_class(Path::new(path))?,
    };
    Ok((spec, mix))
}

fn class_summary(name: &str, mix: &EnvironmentMixture) -> String {
    let weights: Vec<String> = mix
        .members()
        .iter()
        .zip(mix.weights())
        .map(|(m, w)| format!("{}={}", m.name(), q_text(w)))
        .collect();
    format!(
        "{name}: {} members ({}), {} actions, {} percepts, {}\n",
        mix.len(),
        weights.join(" "),
        mix.space().num_actions(),
        mix.space().num_percepts(),
        if mix.all_measures() { "all measures" } else { "semimeasures" },
    )
}

fn env(cmd: &EnvCommand, config: &RunConfig, caps: &Caps) -> Result<String, CliError> {
    match cmd {
        EnvCommand::Validate { class } => {
            let (name, mix) = resolve_class(Some(class), config)?;
            Ok(format!("ok {}", class_summary(&name, &mix)))
        }
        EnvCommand::Show { class } => {
            let (_, mix) = resolve_class(Some(class), config)?;
            let mut text = serde_json::to_string_pretty(&ClassFile::describe(&mix)).expect("class serializes");
            text.push('\n');
            Ok(text)
        }
        EnvCommand::Derive {
            machine,
            actions,
            obs_bits,
            max_len,
            steps,
        } => {
            let id = machine.clone().unwrap_or_else(|| config.machine.clone());
            let m = machine_by_id(&id).map_err(|e| CliError::Usage(e.to_string()))?;
            let spec = MachineClassSpec {
                actions: *actions,
                obs_bits: *obs_bits,
                max_len: *max_len,
                steps: *steps,
            };
            let mix = machine_class(m.as_ref(), spec, caps)?;
            let value = serde_json::to_value(ClassFile::describe(&mix)).expect("class serializes");
            emit_json(config, "derived-class.json", &value)
        }
    }
}

fn plan_json(mix: &EnvironmentMixture, plan: &PlanResult) -> Value {
    let actions = &mix.space().actions;
    json!({
        "value": plan.value,
        "best_action": actions[plan.best_action],
        "per_action_values": plan
            .per_action_values
            .iter()
            .enumerate()
            .map(|(a, v)| json!({"action": actions[a], "value": v}))
            .collect::<Vec<_>>(),
    })
}

fn value(cmd: &ValueCommand, config: &RunConfig, caps: &Caps) -> Result<String, CliError> {
    let ValueCommand::Eval {
        kind,
        class,
        history,
        horizon,
        normalized,
        discount,
        eps,
        oracle,
    } = cmd;
    let (name, mix) = resolve_class(Some(class), config)?;
    let h = History::parse(history, mix.space()).map_err(|e| CliError::Usage(e.to_string()))?;
    if !h.is_complete() {
        return Err(CliError::Usage("the history must end with a percept".into()));
    }
    let value_kind = match kind {
        KindArg::Entropy => ValueKind::Entropy { normalized: *normalized },
        KindArg::Info => ValueKind::Information,
        KindArg::Reward => {
            let discount: DiscountSchedule = match discount {
                Some(text) => text.parse().map_err(|e: uailab_core::Error| CliError::Usage(e.to_string()))?,
                None => config.discount.clone(),
            };
            ValueKind::Reward { discount }
        }
    };
    if *normalized && *kind != KindArg::Entropy {
        return Err(CliError::Usage("--normalized applies to --kind entropy only".into()));
    }
    let plan = optimal_value(&mix, &h, &value_kind, *horizon, caps)?;
    let mut out = json!({
        "kind": value_kind.name(),
        "class": name,
        "history": h.render(mix.space()),
        "t": h.time(),
        "horizon": horizon,
        "plan": plan_json(&mix, &plan),
    });
    if let ValueKind::Entropy { normalized } = value_kind {
        out["normalized"] = json!(normalized);
    }
    if !matches!(value_kind, ValueKind::Reward { .. }) && *horizon > 0 {
        out["lifetime"] = json!(h.time() + *horizon as u64 - 1);
    }
    if let ValueKind::Reward { discount } = &value_kind {
        out["discount"] = json!(discount.to_string());
    }
    if let Some(eps) = eps {
        if eps.is_nan() || *eps <= 0.0 {
            return Err(CliError::Usage("--eps must be positive".into()));
        }
        out["eps"] = json!(eps);
        out["eps_optimal_action"] = json!(mix.space().actions[plan.least_within(*eps)]);
    }
    if *oracle {
        let o = brute_force_oracle(&mix, &h, &value_kind, *horizon, caps)?;
        let gap = plan
            .per_action_values
            .iter()
            .zip(&o.per_action_values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        out["oracle"] = plan_json(&mix, &o);
        out["oracle_max_abs_diff"] = json!(gap);
    }
    emit_json(config, "value.json", &out)
}

fn checkpoints(len: usize) -> Vec<usize> {
    let mut points = Vec::new();
    let mut t = 1;
    while t <= len {
        points.push(t);
        t *= 10;
    }
    if points.last() != Some(&len) && len > 0 {
        points.push(len);
    }
    points
}

fn agent(cmd: &AgentCommand, config: &RunConfig, caps: &Caps) -> Result<String, CliError> {
    let AgentCommand::Run {
        class,
        true_env,
        steps,
        seed,
    } = cmd;
    let (class_name, mix) = resolve_class(class.as_deref(), config)?;
    let index = mix
        .member_index(true_env)
        .ok_or_else(|| CliError::Usage(format!("class has no environment named `{true_env}`")))?;
    let seed = seed.unwrap_or(config.seed);
    let mut agent_config = config.agent_config();
    agent_config.caps = *caps;
    let mut agent = BayesExp::new(mix.clone(), agent_config)?;
    let trace = run_episode(&mut agent, index, *steps, seed)?;

    std::fs::create_dir_all(&config.output_dir)?;
    let mut csv = Vec::new();
    trace.write_csv(&mix, &mut csv)?;
    std::fs::write(config.output_dir.join("trace.csv"), csv)?;

    let mut points = Vec::new();
    for t in checkpoints(trace.len()) {
        let density = exploration_density(&trace, t)?;
        points.push(json!({
            "t": t,
            "wao_metric": wao_metric(&trace, t)?,
            "exploration_density": q_text(&density),
            "exploration_density_f64": to_f64(&density),
        }));
    }
    let summary = json!({
        "command": "agent run",
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": config.hash(),
        "class": class_name,
        "true_env": true_env,
        "seed": seed,
        "steps_requested": steps,
        "steps_run": trace.len(),
        "halted_at": trace.halted_at,
        "final_true_posterior": q_text(&trace.final_true_posterior),
        "final_true_posterior_f64": to_f64(&trace.final_true_posterior),
        "checkpoints": points,
    });
    emit_json(config, "summary.json", &summary)
}

fn greek(action: &str) -> &str {
    match action {
        "alpha" => "α",
        "beta" => "β",
        other => other,
    }
}

fn repro_example1(config: &RunConfig, caps: &Caps) -> Result<String, CliError> {
    let mix = example1_class();
    let h = History::new();
    let actions = &mix.space().actions;
    let mut report = Report::new("repro example1", &config.hash());

    let mut table = Table::new("entropy-seeking values, lifetime m = 1", &["mixture", "action", "value"]);
    let mut preferred = Vec::new();
    for (label, normalized) in [("xi", false), ("xi_norm", true)] {
        let plan = optimal_value(&mix, &h, &ValueKind::Entropy { normalized }, 1, caps)?;
        for (a, v) in plan.per_action_values.iter().enumerate() {
            table.row(vec![label.into(), greek(&actions[a]).into(), format!("{v:.12}")]);
            report
                .series
                .entry(format!("entropy_{label}_{}", actions[a]))
                .or_default()
                .push((1, *v));
        }
        preferred.push(greek(&actions[plan.best_action]).to_string());
    }
    report.tables.push(table);

    let info = optimal_value(&mix, &h, &ValueKind::Information, 1, caps)?;
    let mut table = Table::new("information-seeking values, lifetime m = 1", &["action", "value"]);
    for (a, v) in info.per_action_values.iter().enumerate() {
        table.row(vec![greek(&actions[a]).into(), format!("{v:.12}")]);
    }
    report.tables.push(table);

    report.lines.push(format!("preferred: {}", preferred[0]));
    report.lines.push(format!("preferred (normalized): {}", preferred[1]));
    report.write(&config.output_dir, "example1")?;
    Ok(report.render_text())
}

fn repro_adversarial(config: &RunConfig, caps: &Caps, length: usize, index: u32) -> Result<String, CliError> {
    let machine = machine_by_id(&config.machine).map_err(|e| CliError::Usage(e.to_string()))?;
    let budget = BudgetSchedule::Dovetail.budget(index);
    let z = adversarial_sequence(machine.as_ref(), length, budget, caps)?;
    let mut report = Report::new("repro adversarial", &config.hash());
    let mut table = Table::new(
        format!("adversarial sequence on `{}`, budget {:?}", config.machine, budget),
        &["t", "bit", "decided", "M(1|z<t) lo", "M(1|z<t) hi", "M(z1:t) lo", "M(z1:t) hi", "2^-t", "hi<=2^-t"],
    );
    let mut within = true;
    for t in 1..=length {
        let prefix = BitString::from_bits(z.bits.bits()[..t].to_vec());
        let mass = bracket_m(machine.as_ref(), &prefix, budget, caps)?;
        let bound = rational::pow2_neg(t as u32);
        let ok = mass.hi <= bound;
        within &= ok;
        let cond = &z.conditionals[t - 1];
        table.row(vec![
            t.to_string(),
            if z.bits.bits()[t - 1] { "1" } else { "0" }.into(),
            if z.decided[t - 1] { "yes" } else { "no" }.into(),
            q_text(&cond.lo),
            q_text(&cond.hi),
            q_text(&mass.lo),
            q_text(&mass.hi),
            q_text(&bound),
            if ok { "yes" } else { "no" }.into(),
        ]);
        report.series.entry("prefix_mass_hi".into()).or_default().push((t as u64, to_f64(&mass.hi)));
    }
    report.tables.push(table);
    report.lines.push(format!("sequence: {}", z.bits));
    report.lines.push(format!("all decided: {}", if z.all_decided() { "yes" } else { "no" }));
    report.lines.push(format!("prefix masses within 2^-t: {}", if within { "yes" } else { "no" }));
    report.write(&config.output_dir, "adversarial")?;
    Ok(report.render_text())
}
