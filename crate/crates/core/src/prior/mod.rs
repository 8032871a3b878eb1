//! Anytime two-sided brackets for the universal prior `M` over a chosen machine.
//!
//! `M(x)` is the probability that the machine, fed uniformly random bits,
//! outputs a string starting with `x`. At a finite [`Budget`] the dovetailed
//! prefix scan yields
//!
//! * `lo`: the mass of minimal prefixes already confirmed to output `x`,
//! * `hi`: `lo` plus the mass of prefixes that are still undecided.
//!
//! Both are exact dyadic rationals. As the budget grows, `lo` never decreases
//! and `hi` never increases; the true value always lies in between.
//!
//! Derived quantities (conditional `M`, the Solomonoff-normalized `M_norm`,
//! and finite-depth sums towards the measure mixture) are bracketed by exact
//! interval arithmetic on these primitives.

mod oracle;

use serde::Serialize;

use crate::bits::BitString;
use crate::machine::{scan_prefixes, Caps, Machine, Target};
use crate::rational::{half, one, serde_q, zero, Q};
use crate::{Error, Result};

pub use oracle::exact_m_oracle;

/// Exact bounds `lo <= value <= hi` with `0 <= lo <= hi <= 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProbabilityBracket {
    #[serde(with = "serde_q")]
    pub lo: Q,
    #[serde(with = "serde_q")]
    pub hi: Q,
}

impl ProbabilityBracket {
    pub fn new(lo: Q, hi: Q) -> Self {
        debug_assert!(lo <= hi, "bracket lo > hi");
        ProbabilityBracket { lo, hi }
    }

    pub fn exact(value: Q) -> Self {
        ProbabilityBracket {
            lo: value.clone(),
            hi: value,
        }
    }

    pub fn unknown() -> Self {
        ProbabilityBracket::new(zero(), one())
    }

    pub fn width(&self) -> Q {
        &self.hi - &self.lo
    }

    pub fn midpoint(&self) -> Q {
        (&self.lo + &self.hi) * half()
    }

    pub fn contains(&self, value: &Q) -> bool {
        &self.lo <= value && value <= &self.hi
    }

    /// Whether `other` lies inside `self`.
    pub fn encloses(&self, other: &ProbabilityBracket) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

/// How much dovetailing to do: prefixes up to `max_len` bits, each run for
/// at most `steps` steps. [`Budget::Empty`] runs nothing at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Budget {
    Empty,
    Phase { max_len: u32, steps: u64 },
}

impl Budget {
    pub fn phase(max_len: u32, steps: u64) -> Self {
        Budget::Phase { max_len, steps }
    }
}

/// Maps a single budget index to a [`Budget`].
///
/// The default dovetail rule gives phase `j` prefixes of length at most `j`
/// with `j * 2^j` steps each; index 0 is the empty phase. Both components are
/// nondecreasing in the index and unbounded, so every (program, step) pair is
/// eventually covered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BudgetSchedule {
    #[default]
    Dovetail,
    /// Phase `j` uses length `j` and `steps_per_len * j` steps.
    Linear { steps_per_len: u64 },
}

impl BudgetSchedule {
    pub fn budget(&self, index: u32) -> Budget {
        if index == 0 {
            return Budget::Empty;
        }
        let steps = match *self {
            BudgetSchedule::Dovetail => (index as u64).saturating_mul(1u64.checked_shl(index).unwrap_or(u64::MAX)),
            BudgetSchedule::Linear { steps_per_len } => steps_per_len.saturating_mul(index as u64),
        };
        Budget::phase(index, steps)
    }
}

fn bracket_target(machine: &dyn Machine, target: &Target, budget: Budget, caps: &Caps) -> Result<ProbabilityBracket> {
    match budget {
        Budget::Empty => Ok(ProbabilityBracket::unknown()),
        Budget::Phase { max_len, steps } => {
            let mass = scan_prefixes(machine, target, max_len, steps, caps)?;
            let hi = &mass.confirmed + &mass.unresolved;
            Ok(ProbabilityBracket::new(mass.confirmed, hi))
        }
    }
}

/// Brackets `M(x)`.
pub fn bracket_m(machine: &dyn Machine, x: &BitString, budget: Budget, caps: &Caps) -> Result<ProbabilityBracket> {
    bracket_target(machine, &Target::exactly(x), budget, caps)
}

/// Brackets `M(xy | x) = M(xy) / M(x)` as `[lo(xy)/hi(x), min(1, hi(xy)/lo(x))]`.
///
/// Fails with [`Error::InsufficientBudget`] until the budget has witnessed
/// `lo(x) > 0`.
pub fn bracket_conditional_m(
    machine: &dyn Machine,
    x: &BitString,
    y: &BitString,
    budget: Budget,
    caps: &Caps,
) -> Result<ProbabilityBracket> {
    let bx = bracket_m(machine, x, budget, caps)?;
    let bxy = bracket_m(machine, &x.concat(y), budget, caps)?;
    conditional_from(&bx, &bxy).ok_or_else(|| Error::InsufficientBudget(format!("no program confirmed `{x}` yet")))
}

fn conditional_from(bx: &ProbabilityBracket, bxy: &ProbabilityBracket) -> Option<ProbabilityBracket> {
    use num_traits::Zero;
    if bx.lo.is_zero() {
        return None;
    }
    let lo = &bxy.lo / &bx.hi;
    let hi = (&bxy.hi / &bx.lo).min(one());
    Some(ProbabilityBracket::new(lo.min(hi.clone()), hi))
}

/// Brackets the Solomonoff normalization
/// `M_norm(x_1:n) = prod_i M(x_1:i) / (M(x_<i 0) + M(x_<i 1))`, with `M_norm(empty) = 1`.
///
/// Each factor `a / (a + b)` is increasing in `a` and decreasing in `b`, so
/// its bracket is `[lo_a / (lo_a + hi_b), hi_a / (hi_a + lo_b)]`. Requires
/// every denominator to be witnessed positive at this budget.
pub fn bracket_mnorm(machine: &dyn Machine, x: &BitString, budget: Budget, caps: &Caps) -> Result<ProbabilityBracket> {
    use num_traits::Zero;
    let mut lo = one();
    let mut hi = one();
    let mut prefix = BitString::new();
    for &bit in x.bits() {
        let taken = bracket_m(machine, &prefix.with(bit), budget, caps)?;
        let other = bracket_m(machine, &prefix.with(!bit), budget, caps)?;
        if (&taken.lo + &other.lo).is_zero() {
            return Err(Error::InsufficientBudget(format!(
                "no program confirmed an extension of `{prefix}` yet"
            )));
        }
        let factor_lo = if taken.lo.is_zero() { zero() } else { &taken.lo / (&taken.lo + &other.hi) };
        let factor_hi = if taken.hi.is_zero() { zero() } else { &taken.hi / (&taken.hi + &other.lo) };
        lo *= factor_lo;
        hi *= factor_hi;
        prefix.push(bit);
    }
    Ok(ProbabilityBracket::new(lo, hi.min(one())))
}

/// Lower value `sum over |y| = depth of lo(M(xy))` at a fixed budget.
///
/// This is a finite-budget approximant of the measure mixture
/// `MM(x) = lim_n sum_{|y| = n} M(xy)`. It is nonincreasing in `depth` at a
/// fixed budget and nondecreasing in the budget at a fixed depth, but no
/// joint schedule of the two makes it converge to `MM(x)`: the limit of the
/// two monotone directions is not limit computable in general. No
/// convergence claim is made, and no error estimate is returned.
///
/// There is no limit, tolerance or convergence entry point:
///
/// ```compile_fail
/// use uailab_core::prior::mm_limit;
/// ```
///
/// ```compile_fail
/// use uailab_core::prior::approx_mm_to_tolerance;
/// ```
pub fn approx_mm(machine: &dyn Machine, x: &BitString, depth: u32, budget: Budget, caps: &Caps) -> Result<Q> {
    let terms = 1u128.checked_shl(depth).unwrap_or(u128::MAX);
    if terms > caps.max_mm_terms as u128 {
        return Err(Error::limit("mm_terms", terms, caps.max_mm_terms));
    }
    let mut total = zero();
    for y in BitString::all_of_len(depth as usize) {
        total += bracket_m(machine, &x.concat(&y), budget, caps)?.lo;
    }
    Ok(total)
}

/// A prefix of the adversarial sequence together with per-bit flags telling
/// whether each bit was decided by its bracket or by the midpoint fallback.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdversarialPrefix {
    pub bits: BitString,
    pub decided: Vec<bool>,
    /// Bracket of `M(1 | z_<i)` used to choose bit `i`.
    pub conditionals: Vec<ProbabilityBracket>,
}

impl AdversarialPrefix {
    pub fn all_decided(&self) -> bool {
        self.decided.iter().all(|&d| d)
    }
}

/// The sequence with `z_i = 0` iff `M(1 | z_<i) > 1/2`.
///
/// A bit is decided when the bracket for `M(1 | z_<i)` lies strictly above
/// 1/2 (bit 0) or entirely at or below 1/2 (bit 1). Otherwise the bracket's
/// midpoint stands in for the unknown value and the bit is flagged undecided.
pub fn adversarial_sequence(machine: &dyn Machine, len: usize, budget: Budget, caps: &Caps) -> Result<AdversarialPrefix> {
    if len == 0 {
        return Err(Error::InvalidArgument("adversarial sequence length must be at least 1".into()));
    }
    let one_bit: BitString = BitString::from_bits(vec![true]);
    let mut out = AdversarialPrefix {
        bits: BitString::new(),
        decided: Vec::with_capacity(len),
        conditionals: Vec::with_capacity(len),
    };
    for _ in 0..len {
        let cond = bracket_conditional_m(machine, &out.bits, &one_bit, budget, caps)?;
        let (bit, decided) = if cond.lo > half() {
            (false, true)
        } else if cond.hi <= half() {
            (true, true)
        } else {
            (cond.midpoint() <= half(), false)
        };
        out.bits.push(bit);
        out.decided.push(decided);
        out.conditionals.push(cond);
    }
    Ok(out)
}
