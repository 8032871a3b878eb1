use num_bigint::BigUint;
use num_traits::Zero;

use super::ProbabilityBracket;
use crate::bits::BitString;
use crate::machine::{run_program, Caps, Machine, Status};
use crate::rational::dyadic;
use crate::{Error, Result};

/// Brute-force bracket for `M(x)`: runs every program of exactly `max_len`
/// bits from scratch for `steps` steps, with no sharing between programs.
///
/// A program counts towards `lo` when its output extends `x`. It counts
/// towards the gap `hi - lo` when its output is still a compatible proper
/// prefix of `x` and it has neither crashed nor halted. Each program
/// carries mass `2^-max_len`.
pub fn exact_m_oracle(machine: &dyn Machine, x: &BitString, max_len: u32, steps: u64, caps: &Caps) -> Result<ProbabilityBracket> {
    let cap = caps.max_prefix_len.min(24);
    if max_len > cap {
        return Err(Error::limit("oracle_len", max_len, cap));
    }
    if steps > caps.max_steps {
        return Err(Error::limit("oracle_steps", steps, caps.max_steps));
    }
    let mut confirmed = BigUint::zero();
    let mut open = BigUint::zero();
    for program in BitString::all_of_len(max_len as usize) {
        let run = run_program(machine, &program, steps);
        let out = run.output.bits();
        if x.is_prefix_of(out) {
            confirmed += 1u32;
        } else if out.len() < x.len() && out == &x.bits()[..out.len()] && !run.status.is_final() {
            debug_assert!(matches!(run.status, Status::Running | Status::NeedsMoreInput));
            open += 1u32;
        }
    }
    let lo = dyadic(&confirmed, max_len);
    let hi = dyadic(&(confirmed + open), max_len);
    Ok(ProbabilityBracket::new(lo, hi))
}
