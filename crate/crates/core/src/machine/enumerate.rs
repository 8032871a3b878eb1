//! Dovetailed enumeration of program prefixes.
//!
//! Starting from the empty prefix, each prefix is run (resuming its parent's
//! execution) until it is decided with respect to a target string:
//!
//! * confirmed: its output already extends the target,
//! * refuted: its output contradicts the target, or it crashed or halted
//!   without producing enough,
//! * unresolved: it is still running at the step budget, or it needs more
//!   input at the length cap.
//!
//! A prefix that needs more input and is still compatible is split into its
//! two one-bit extensions. The decided prefixes are therefore minimal and
//! prefix-free, and together with the unresolved ones they partition the
//! whole program space: their masses `2^-|p|` sum to exactly one.

use num_bigint::BigUint;
use num_traits::Zero;
use serde::Serialize;

use super::{Caps, Execution, Machine, Program, Status};
use crate::bits::BitString;
use crate::rational::{dyadic, Q};
use crate::{Error, Result};

/// Outputs count as confirming when they start with `prefix` and have at
/// least `extra` further bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Target {
    pub prefix: BitString,
    pub extra: usize,
}

impl Target {
    pub fn exactly(prefix: &BitString) -> Self {
        Target {
            prefix: prefix.clone(),
            extra: 0,
        }
    }

    fn needed(&self) -> usize {
        self.prefix.len() + self.extra
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Refutation {
    Contradiction,
    Crashed,
    Halted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Confirmed,
    Refuted(Refutation),
    Unresolved,
}

fn classify(output: &[bool], status: Status, target: &Target) -> Option<Class> {
    let prefix = target.prefix.bits();
    let overlap = output.len().min(prefix.len());
    if output[..overlap] != prefix[..overlap] {
        return Some(Class::Refuted(Refutation::Contradiction));
    }
    if output.len() >= target.needed() {
        return Some(Class::Confirmed);
    }
    match status {
        Status::Crashed => Some(Class::Refuted(Refutation::Crashed)),
        Status::Halted => Some(Class::Refuted(Refutation::Halted)),
        Status::Running => Some(Class::Unresolved),
        Status::NeedsMoreInput => None,
    }
}

fn check_caps(max_len: u32, steps: u64, caps: &Caps) -> Result<()> {
    if max_len > caps.max_prefix_len.min(100) {
        return Err(Error::limit("max_prefix_len", max_len, caps.max_prefix_len.min(100)));
    }
    if steps > caps.max_steps {
        return Err(Error::limit("step_budget", steps, caps.max_steps));
    }
    Ok(())
}

fn walk(
    machine: &dyn Machine,
    target: &Target,
    max_len: u32,
    steps: u64,
    visit: &mut dyn FnMut(&[bool], Class),
) {
    let needed = target.needed();
    let mut stack: Vec<(Vec<bool>, Box<dyn Execution<'_> + '_>)> = vec![(Vec::new(), machine.boot())];
    while let Some((prefix, mut exec)) = stack.pop() {
        let status = exec.resume(&prefix, steps, needed);
        match classify(exec.output(), status, target) {
            Some(class) => visit(&prefix, class),
            None if prefix.len() as u32 >= max_len => visit(&prefix, Class::Unresolved),
            None => {
                // Push the 1-branch first so the 0-branch is visited first.
                let mut one = prefix.clone();
                one.push(true);
                stack.push((one, exec.fork()));
                let mut zero = prefix;
                zero.push(false);
                stack.push((zero, exec));
            }
        }
    }
}

/// Minimal decided prefixes of length at most `max_len`, each run for at most
/// `steps` steps, partitioned by their verdict on `x`.
#[derive(Debug, Clone, Serialize)]
pub struct PrefixPartition {
    pub confirmed: Vec<Program>,
    pub refuted: Vec<(Program, Refutation)>,
    pub unresolved: Vec<Program>,
    #[serde(with = "crate::rational::serde_q")]
    pub confirmed_mass: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub refuted_mass: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub unresolved_mass: Q,
}

pub fn enumerate_prefixes(
    machine: &dyn Machine,
    x: &BitString,
    max_len: u32,
    steps: u64,
    caps: &Caps,
) -> Result<PrefixPartition> {
    check_caps(max_len, steps, caps)?;
    let mut confirmed = Vec::new();
    let mut refuted = Vec::new();
    let mut unresolved = Vec::new();
    let mut masses = [0u128; 3];
    walk(machine, &Target::exactly(x), max_len, steps, &mut |prefix, class| {
        let weight = 1u128 << (max_len as usize - prefix.len());
        let program = BitString::from_bits(prefix.to_vec());
        match class {
            Class::Confirmed => {
                masses[0] += weight;
                confirmed.push(program);
            }
            Class::Refuted(why) => {
                masses[1] += weight;
                refuted.push((program, why));
            }
            Class::Unresolved => {
                masses[2] += weight;
                unresolved.push(program);
            }
        }
    });
    let to_q = |count: u128| dyadic(&BigUint::from(count), max_len);
    Ok(PrefixPartition {
        confirmed,
        refuted,
        unresolved,
        confirmed_mass: to_q(masses[0]),
        refuted_mass: to_q(masses[1]),
        unresolved_mass: to_q(masses[2]),
    })
}

/// Mass-only summary of a prefix scan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanMass {
    pub confirmed: Q,
    pub unresolved: Q,
}

/// Like [`enumerate_prefixes`] but for a general [`Target`], keeping only masses.
pub fn scan_prefixes(
    machine: &dyn Machine,
    target: &Target,
    max_len: u32,
    steps: u64,
    caps: &Caps,
) -> Result<ScanMass> {
    check_caps(max_len, steps, caps)?;
    let mut confirmed = 0u128;
    let mut unresolved = 0u128;
    walk(machine, target, max_len, steps, &mut |prefix, class| {
        let weight = 1u128 << (max_len as usize - prefix.len());
        match class {
            Class::Confirmed => confirmed += weight,
            Class::Unresolved => unresolved += weight,
            Class::Refuted(_) => {}
        }
    });
    let to_q = |count: u128| {
        if count.is_zero() {
            Q::zero()
        } else {
            dyadic(&BigUint::from(count), max_len)
        }
    };
    Ok(ScanMass {
        confirmed: to_q(confirmed),
        unresolved: to_q(unresolved),
    })
}

/// Confirmed minimal prefixes for a general [`Target`], in lexicographic order.
pub fn confirmed_prefixes(
    machine: &dyn Machine,
    target: &Target,
    max_len: u32,
    steps: u64,
    caps: &Caps,
) -> Result<Vec<Program>> {
    check_caps(max_len, steps, caps)?;
    let mut out = Vec::new();
    walk(machine, target, max_len, steps, &mut |prefix, class| {
        if class == Class::Confirmed {
            out.push(BitString::from_bits(prefix.to_vec()));
        }
    });
    Ok(out)
}
