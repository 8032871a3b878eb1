use std::collections::HashMap;

use num_traits::{One, Zero};

use super::{DiscountSchedule, PlanResult, Policy, ValueKind};
use crate::env::{normalize_step, step_total, Action, Belief, EnvironmentMixture, History, StepMap};
use crate::machine::Caps;
use crate::rational::{to_f64, Q};
use crate::values::effective_horizon;
use crate::{Error, Result};

const MEMO_LIMIT: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct MemoKey {
    depth: usize,
    time: u64,
    posterior: Vec<Q>,
    states: Vec<Option<usize>>,
}

impl MemoKey {
    fn new(belief: &Belief, depth: usize, time: u64) -> Self {
        MemoKey {
            depth,
            time,
            posterior: belief.posterior.clone(),
            states: belief.states.clone(),
        }
    }
}

/// Node of the literal (unmemoized) evaluation: the belief and history
/// reached so far plus the path products needed at the leaves.
#[derive(Debug, Clone)]
struct PathNode {
    belief: Belief,
    history: History,
    offset: u64,
    /// Conditional mass of the path under the evaluated distribution.
    mass: Q,
    /// Per-member conditional path masses (information value only).
    member_mass: Vec<Q>,
    /// Conditional path mass under the normalized mixture (information value only).
    norm_mass: Q,
}

enum Choice<'p> {
    Max,
    Follow(&'p dyn Policy),
}

/// Expectimax over a fixed mixture.
///
/// Values whose recursion depends only on the posterior (normalized
/// entropy, information over classes of measures, reward) are memoized on
/// `(depth, posterior, member states)` and the cache survives between calls,
/// so a planner reused along an episode stays cheap. The remaining cases are
/// evaluated literally along every path.
#[derive(Debug)]
pub struct Planner {
    mix: EnvironmentMixture,
    caps: Caps,
    nodes: u64,
    entropy_memo: HashMap<MemoKey, f64>,
    info_memo: HashMap<MemoKey, f64>,
    reward_memo: HashMap<MemoKey, f64>,
    reward_discount: Option<DiscountSchedule>,
}

impl Planner {
    pub fn new(mix: EnvironmentMixture, caps: Caps) -> Self {
        Planner {
            mix,
            caps,
            nodes: 0,
            entropy_memo: HashMap::new(),
            info_memo: HashMap::new(),
            reward_memo: HashMap::new(),
            reward_discount: None,
        }
    }

    pub fn mixture(&self) -> &EnvironmentMixture {
        &self.mix
    }

    /// Optimal value over the next `depth` steps after a history of `t - 1`
    /// cycles whose posterior is `belief`.
    pub fn optimal(&mut self, belief: &Belief, t: u64, kind: &ValueKind, depth: usize) -> Result<PlanResult> {
        self.nodes = 0;
        let actions = self.mix.space().num_actions();
        if depth == 0 {
            return Ok(PlanResult::from_values(vec![0.0; actions]));
        }
        let mut values = Vec::with_capacity(actions);
        match kind {
            ValueKind::Entropy { normalized: true } => {
                for a in 0..actions {
                    values.push(self.entropy_q(belief, a, depth)?);
                }
            }
            ValueKind::Information if self.mix.all_measures() => {
                let scale = to_f64(&belief.evidence_ratio);
                for a in 0..actions {
                    values.push(scale * self.info_q(belief, a, depth)?);
                }
            }
            ValueKind::Reward { discount } => {
                self.prepare_reward(discount);
                let Some(norm) = reward_normalizer(discount, t) else {
                    return Ok(PlanResult::from_values(vec![0.0; actions]));
                };
                for a in 0..actions {
                    values.push(self.reward_q(belief, discount, t, a, depth)? / norm);
                }
            }
            _ => {
                let root = self.root(belief, &History::new(), kind);
                let ctx = PathContext::new(&self.mix, belief, t, kind, depth);
                for a in 0..actions {
                    values.push(self.path_q(&ctx, &root, a, depth, &mut Choice::Max)?);
                }
            }
        }
        Ok(PlanResult::from_values(values))
    }

    /// Value of `policy` over the next `depth` steps, evaluated literally.
    /// `h` must be the history that produced `belief`; the policy sees the
    /// full history at every node.
    pub fn policy_value(
        &mut self,
        belief: &Belief,
        h: &History,
        kind: &ValueKind,
        depth: usize,
        policy: &dyn Policy,
    ) -> Result<f64> {
        self.nodes = 0;
        let t = h.time();
        if let ValueKind::Reward { discount } = kind {
            if reward_normalizer(discount, t).is_none() {
                return Ok(0.0);
            }
        }
        let root = self.root(belief, h, kind);
        let ctx = PathContext::new(&self.mix, belief, t, kind, depth);
        self.path_v(&ctx, &root, depth, &mut Choice::Follow(policy))
    }

    fn tick(&mut self) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.caps.max_planner_nodes {
            return Err(Error::limit(
                "planner_nodes",
                self.nodes as u128,
                self.caps.max_planner_nodes as u128,
            ));
        }
        Ok(())
    }

    fn entropy_q(&mut self, b: &Belief, a: Action, depth: usize) -> Result<f64> {
        let step = normalize_step(&b.step_map(&self.mix, a))?;
        let mut q = 0.0;
        for (&e, p) in &step {
            let pf = to_f64(p);
            let child = b.update(&self.mix, a, e)?;
            q += pf * (-pf.log2() + self.entropy_v(&child, depth - 1)?);
        }
        Ok(q)
    }

    fn entropy_v(&mut self, b: &Belief, depth: usize) -> Result<f64> {
        if depth == 0 {
            return Ok(0.0);
        }
        let key = MemoKey::new(b, depth, 0);
        if let Some(&v) = self.entropy_memo.get(&key) {
            return Ok(v);
        }
        self.tick()?;
        let mut best = f64::NEG_INFINITY;
        for a in 0..self.mix.space().num_actions() {
            best = best.max(self.entropy_q(b, a, depth)?);
        }
        bounded_insert(&mut self.entropy_memo, key, best);
        Ok(best)
    }

    /// Information value per unit of `xi(h) / xi_norm(h)` for classes of
    /// measures, where the double sum factorizes step by step.
    fn info_q(&mut self, b: &Belief, a: Action, depth: usize) -> Result<f64> {
        let raw = b.step_map(&self.mix, a);
        if step_total(&raw).is_zero() {
            return Ok(0.0);
        }
        let norm = normalize_step(&raw)?;
        let mut q = 0.0;
        for (&e, xi_e) in &raw {
            let ell = &norm[&e];
            let mut gain = 0.0;
            for i in b.live() {
                if let Some(t) = b.member_step(&self.mix, i, a).iter().find(|t| t.percept == e) {
                    if !t.prob.is_zero() {
                        gain += to_f64(&(&b.posterior[i] * &t.prob)) * to_f64(&(&t.prob / ell)).log2();
                    }
                }
            }
            let child = b.update(&self.mix, a, e)?;
            q += gain + to_f64(xi_e) * self.info_v(&child, depth - 1)?;
        }
        Ok(q)
    }

    fn info_v(&mut self, b: &Belief, depth: usize) -> Result<f64> {
        if depth == 0 {
            return Ok(0.0);
        }
        let key = MemoKey::new(b, depth, 0);
        if let Some(&v) = self.info_memo.get(&key) {
            return Ok(v);
        }
        self.tick()?;
        let mut best = f64::NEG_INFINITY;
        for a in 0..self.mix.space().num_actions() {
            best = best.max(self.info_q(b, a, depth)?);
        }
        bounded_insert(&mut self.info_memo, key, best);
        Ok(best)
    }

    fn prepare_reward(&mut self, discount: &DiscountSchedule) {
        if self.reward_discount.as_ref() != Some(discount) {
            self.reward_memo.clear();
            self.reward_discount = Some(discount.clone());
        }
    }

    /// Reward recursion. With geometric discounting values are normalized
    /// (`(1 - g) r + g V'`) and independent of absolute time; table
    /// discounts accumulate `gamma(m) r_m` and are divided by `Gamma_t` at
    /// the root.
    fn reward_q(&mut self, b: &Belief, discount: &DiscountSchedule, m: u64, a: Action, depth: usize) -> Result<f64> {
        let (now, later) = match discount {
            DiscountSchedule::Geometric { ratio } => (to_f64(&(Q::one() - ratio)), to_f64(ratio)),
            DiscountSchedule::Table { .. } => (to_f64(&discount.gamma(m)), 1.0),
        };
        let step = b.step_map(&self.mix, a);
        let mut q = 0.0;
        for (&e, p) in &step {
            let r = to_f64(&self.mix.space().percepts[e].reward);
            let child = b.update(&self.mix, a, e)?;
            q += to_f64(p) * (now * r + later * self.reward_v(&child, discount, m + 1, depth - 1)?);
        }
        Ok(q)
    }

    fn reward_v(&mut self, b: &Belief, discount: &DiscountSchedule, m: u64, depth: usize) -> Result<f64> {
        if depth == 0 {
            return Ok(0.0);
        }
        let time = if discount.is_geometric() { 0 } else { m };
        let key = MemoKey::new(b, depth, time);
        if let Some(&v) = self.reward_memo.get(&key) {
            return Ok(v);
        }
        self.tick()?;
        let mut best = f64::NEG_INFINITY;
        for a in 0..self.mix.space().num_actions() {
            best = best.max(self.reward_q(b, discount, m, a, depth)?);
        }
        bounded_insert(&mut self.reward_memo, key, best);
        Ok(best)
    }

    fn root(&self, belief: &Belief, h: &History, kind: &ValueKind) -> PathNode {
        let n = self.mix.len();
        PathNode {
            belief: belief.clone(),
            history: h.clone(),
            offset: 0,
            mass: Q::one(),
            member_mass: if matches!(kind, ValueKind::Information) {
                vec![Q::one(); n]
            } else {
                Vec::new()
            },
            norm_mass: Q::one(),
        }
    }

    fn path_v(&mut self, ctx: &PathContext, node: &PathNode, depth: usize, choice: &mut Choice) -> Result<f64> {
        if depth == 0 {
            return Ok(ctx.leaf(node));
        }
        self.tick()?;
        match choice {
            Choice::Max => {
                let mut best = f64::NEG_INFINITY;
                for a in 0..self.mix.space().num_actions() {
                    best = best.max(self.path_q(ctx, node, a, depth, choice)?);
                }
                Ok(best)
            }
            Choice::Follow(policy) => {
                let a = policy.act(&node.history);
                if a >= self.mix.space().num_actions() {
                    return Err(Error::InvalidArgument(format!("policy chose unknown action {a}")));
                }
                self.path_q(ctx, node, a, depth, choice)
            }
        }
    }

    fn path_q(
        &mut self,
        ctx: &PathContext,
        node: &PathNode,
        a: Action,
        depth: usize,
        choice: &mut Choice,
    ) -> Result<f64> {
        let raw = node.belief.step_map(&self.mix, a);
        let (dist, norm) = match ctx.kind {
            ValueKind::Entropy { normalized: true } => {
                let n = normalize_step(&raw)?;
                (n.clone(), n)
            }
            ValueKind::Information => {
                if step_total(&raw).is_zero() {
                    return Ok(0.0);
                }
                (raw.clone(), normalize_step(&raw)?)
            }
            _ => (raw.clone(), StepMap::new()),
        };
        let mut q = 0.0;
        for (&e, p) in &dist {
            let mut child = PathNode {
                belief: node.belief.update(&self.mix, a, e)?,
                history: node.history.extended(a, e),
                offset: node.offset + 1,
                mass: &node.mass * p,
                member_mass: Vec::new(),
                norm_mass: Q::zero(),
            };
            if matches!(ctx.kind, ValueKind::Information) {
                child.norm_mass = &node.norm_mass * &norm[&e];
                child.member_mass = (0..self.mix.len())
                    .map(|i| {
                        let step = node
                            .belief
                            .member_step(&self.mix, i, a)
                            .iter()
                            .find(|t| t.percept == e)
                            .map(|t| t.prob.clone())
                            .unwrap_or_else(Q::zero);
                        &node.member_mass[i] * step
                    })
                    .collect();
            }
            q += ctx.immediate(&self.mix, &child, e) + self.path_v(ctx, &child, depth - 1, choice)?;
        }
        Ok(q)
    }
}

fn bounded_insert(memo: &mut HashMap<MemoKey, f64>, key: MemoKey, value: f64) {
    if memo.len() >= MEMO_LIMIT {
        memo.clear();
    }
    memo.insert(key, value);
}

/// `1` for geometric discounting (values are already normalized), `Gamma_t`
/// for tables, `None` when `Gamma_t = 0`.
fn reward_normalizer(discount: &DiscountSchedule, t: u64) -> Option<f64> {
    match discount {
        DiscountSchedule::Geometric { .. } => Some(1.0),
        DiscountSchedule::Table { .. } => {
            let tail = discount.tail(t);
            (!tail.is_zero()).then(|| to_f64(&tail))
        }
    }
}

struct PathContext<'k> {
    kind: &'k ValueKind,
    /// `w_nu nu(h) / xi_norm(h)` for each member (information value).
    coefficients: Vec<Q>,
    /// `gamma(t + k) / Gamma_t` for `k < depth` (reward value).
    weights: Vec<f64>,
}

impl<'k> PathContext<'k> {
    fn new(mix: &EnvironmentMixture, belief: &Belief, t: u64, kind: &'k ValueKind, depth: usize) -> Self {
        let coefficients = match kind {
            ValueKind::Information => belief.posterior.iter().map(|w| w * &belief.evidence_ratio).collect(),
            _ => Vec::new(),
        };
        let weights = match kind {
            ValueKind::Reward { discount } => (0..depth as u64)
                .map(|k| discount.weight(t, t + k).map(|w| to_f64(&w)).unwrap_or(0.0))
                .collect(),
            _ => Vec::new(),
        };
        debug_assert!(coefficients.is_empty() || coefficients.len() == mix.len());
        PathContext {
            kind,
            coefficients,
            weights,
        }
    }

    fn immediate(&self, mix: &EnvironmentMixture, child: &PathNode, e: usize) -> f64 {
        match self.kind {
            ValueKind::Reward { .. } => {
                let r = to_f64(&mix.space().percepts[e].reward);
                to_f64(&child.mass) * self.weights[child.offset as usize - 1] * r
            }
            _ => 0.0,
        }
    }

    fn leaf(&self, node: &PathNode) -> f64 {
        match self.kind {
            ValueKind::Entropy { .. } => neg_p_log_p(&node.mass),
            ValueKind::Information => {
                let mut total = 0.0;
                for (c, u) in self.coefficients.iter().zip(&node.member_mass) {
                    if c.is_zero() || u.is_zero() {
                        continue;
                    }
                    total += to_f64(&(c * u)) * to_f64(&(u / &node.norm_mass)).log2();
                }
                total
            }
            ValueKind::Reward { .. } => 0.0,
        }
    }
}

/// `-p log2 p` with `0 log 0 = 0`.
pub(crate) fn neg_p_log_p(p: &Q) -> f64 {
    if p.is_zero() {
        return 0.0;
    }
    let x = to_f64(p);
    -x * x.log2()
}

fn lifetime_depth(h: &History, lifetime: u64) -> Result<usize> {
    let t = h.time();
    if lifetime < t {
        return Err(Error::InvalidArgument(format!("lifetime {lifetime} precedes the current time {t}")));
    }
    Ok((lifetime - t + 1) as usize)
}

fn belief_for(mix: &EnvironmentMixture, h: &History) -> Result<Belief> {
    Belief::from_history(mix, h)
}

/// Optimal value of `kind` over the next `depth` steps after `h`.
pub fn optimal_value(
    mix: &EnvironmentMixture,
    h: &History,
    kind: &ValueKind,
    depth: usize,
    caps: &Caps,
) -> Result<PlanResult> {
    let belief = belief_for(mix, h)?;
    Planner::new(mix.clone(), *caps).optimal(&belief, h.time(), kind, depth)
}

/// Value of an explicit policy over the next `depth` steps after `h`.
pub fn policy_value(
    mix: &EnvironmentMixture,
    h: &History,
    kind: &ValueKind,
    depth: usize,
    policy: &dyn Policy,
    caps: &Caps,
) -> Result<f64> {
    let belief = belief_for(mix, h)?;
    Planner::new(mix.clone(), *caps).policy_value(&belief, h, kind, depth, policy)
}

/// The least action whose value is strictly within `eps` of optimal.
pub fn eps_optimal_action(
    mix: &EnvironmentMixture,
    h: &History,
    kind: &ValueKind,
    depth: usize,
    eps: f64,
    caps: &Caps,
) -> Result<Action> {
    if eps <= 0.0 {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    Ok(optimal_value(mix, h, kind, depth, caps)?.least_within(eps))
}

/// An action that is `eps`-optimal for the untruncated discounted reward.
///
/// Plans `H_t(eps/4)` steps ahead, so each truncated action value
/// underestimates the true one by at most `eps/4`, and returns the least
/// action within `eps/2` of the best truncated value.
pub fn eps_optimal_reward_action(
    planner: &mut Planner,
    belief: &Belief,
    t: u64,
    discount: &DiscountSchedule,
    eps: &Q,
) -> Result<(Action, PlanResult)> {
    let depth = match effective_horizon(discount, t, &(eps / Q::from_integer(4.into()))) {
        Ok(d) => d as usize,
        Err(Error::UndefinedHorizon(_)) => 0,
        Err(e) => return Err(e),
    };
    let kind = ValueKind::Reward {
        discount: discount.clone(),
    };
    let plan = planner.optimal(belief, t, &kind, depth)?;
    let action = plan.least_within(to_f64(eps) / 2.0);
    Ok((action, plan))
}

/// `V_H` for lifetime `m`: the optimum when `policy` is `None`.
pub fn entropy_value(
    mix: &EnvironmentMixture,
    h: &History,
    normalized: bool,
    policy: Option<&dyn Policy>,
    lifetime: u64,
    caps: &Caps,
) -> Result<f64> {
    let depth = lifetime_depth(h, lifetime)?;
    let kind = ValueKind::Entropy { normalized };
    match policy {
        Some(p) => policy_value(mix, h, &kind, depth, p, caps),
        None => Ok(optimal_value(mix, h, &kind, depth, caps)?.value),
    }
}

/// `V_I` for lifetime `m`: the optimum when `policy` is `None`.
pub fn info_value(
    mix: &EnvironmentMixture,
    h: &History,
    policy: Option<&dyn Policy>,
    lifetime: u64,
    caps: &Caps,
) -> Result<f64> {
    let depth = lifetime_depth(h, lifetime)?;
    let kind = ValueKind::Information;
    match policy {
        Some(p) => policy_value(mix, h, &kind, depth, p, caps),
        None => Ok(optimal_value(mix, h, &kind, depth, caps)?.value),
    }
}

/// Discounted reward value truncated after `H_t(eps_trunc)` steps, which
/// misses at most `eps_trunc`. Zero when `Gamma_t = 0`.
pub fn reward_value(
    mix: &EnvironmentMixture,
    h: &History,
    discount: &DiscountSchedule,
    policy: Option<&dyn Policy>,
    eps_trunc: &Q,
    caps: &Caps,
) -> Result<f64> {
    let t = h.time();
    let depth = match effective_horizon(discount, t, eps_trunc) {
        Ok(d) => d as usize,
        Err(Error::UndefinedHorizon(_)) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    let kind = ValueKind::Reward {
        discount: discount.clone(),
    };
    match policy {
        Some(p) => policy_value(mix, h, &kind, depth, p, caps),
        None => Ok(optimal_value(mix, h, &kind, depth, caps)?.value),
    }
}
