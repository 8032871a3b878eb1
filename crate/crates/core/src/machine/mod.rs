//! Monotone machines with budgeted, resumable execution.
//!
//! A machine reads its program bit by bit and only ever appends to its output
//! tape. Executions are resumable: a run that stopped because it wanted more
//! input, or because its step budget ran out, continues where it left off when
//! resumed with a longer program or a larger budget. Prefix enumeration relies
//! on this to share work between a prefix and its extensions.

mod dispatch;
mod enumerate;
mod reference;
mod toy;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

pub use crate::bits::BitString;
pub use dispatch::{build_dispatch_machine, make_probe_program, DispatchMachine, ProbeFamily, ProbeProgram, Relation, Route};
pub use enumerate::{confirmed_prefixes, enumerate_prefixes, scan_prefixes, PrefixPartition, Refutation, ScanMass, Target};
pub use reference::{Instruction, ReferenceMachine};
pub use toy::ToyMachine;

use crate::{Error, Result};

/// Environment variable overriding [`Caps::max_steps`].
pub const MAX_STEPS_ENV: &str = "UAILAB_MAX_STEPS";

/// A program: a finite input bit string for a monotone machine.
pub type Program = BitString;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Status {
    /// Every instruction available so far has executed; the next one needs more input.
    NeedsMoreInput,
    /// The step budget ran out (or the caller's output target was reached).
    Running,
    Halted,
    /// Invalid op-code or work-tape overflow.
    Crashed,
}

impl Status {
    pub fn is_final(self) -> bool {
        matches!(self, Status::Halted | Status::Crashed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExecutionOutcome {
    pub output: BitString,
    pub status: Status,
    pub steps_used: u64,
}

/// A machine variant. Implementations must be deterministic.
pub trait Machine: Send + Sync + fmt::Debug {
    fn id(&self) -> &str;

    fn boot(&self) -> Box<dyn Execution<'_> + '_>;
}

/// An in-progress run of a machine.
pub trait Execution<'m>: Send {
    /// Continues the run on `input`, which must extend every input previously
    /// passed to this execution. Stops when the run needs more input, reaches
    /// a final status, has used `budget` steps in total, or has produced at
    /// least `output_target` bits.
    fn resume(&mut self, input: &[bool], budget: u64, output_target: usize) -> Status;

    fn output(&self) -> &[bool];

    fn steps(&self) -> u64;

    fn fork(&self) -> Box<dyn Execution<'m> + 'm>;
}

/// Runs `program` on `machine` for at most `budget` steps.
pub fn run_program(machine: &dyn Machine, program: &Program, budget: u64) -> ExecutionOutcome {
    let mut exec = machine.boot();
    let status = exec.resume(program.bits(), budget, usize::MAX);
    ExecutionOutcome {
        output: BitString::from_bits(exec.output().to_vec()),
        status,
        steps_used: exec.steps(),
    }
}

/// Hard limits on enumeration and planning work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Caps {
    pub max_prefix_len: u32,
    pub max_steps: u64,
    pub max_mm_terms: u64,
    pub max_planner_nodes: u64,
    pub max_oracle_policies: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_prefix_len: 24,
            max_steps: 1 << 26,
            max_mm_terms: 1 << 12,
            max_planner_nodes: 1 << 22,
            max_oracle_policies: 1 << 20,
        }
    }
}

impl Caps {
    /// Defaults with [`MAX_STEPS_ENV`] applied when set.
    pub fn from_env() -> Result<Self> {
        Caps::default().with_env_override()
    }

    pub fn with_env_override(mut self) -> Result<Self> {
        if let Ok(raw) = std::env::var(MAX_STEPS_ENV) {
            let steps: u64 = raw
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("{MAX_STEPS_ENV} must be a positive integer, got `{raw}`")))?;
            if steps == 0 {
                return Err(Error::Parse(format!("{MAX_STEPS_ENV} must be positive")));
            }
            self.max_steps = self.max_steps.min(steps);
        }
        Ok(self)
    }
}

/// Looks up a machine variant by its configuration identifier.
///
/// Known identifiers: `reference`, `toy`, and `dispatch:<relation>` where the
/// relation is one of `always`, `never`, `diagonal` or `even` (plain
/// `dispatch` means `dispatch:even`).
pub fn machine_by_id(id: &str) -> Result<Arc<dyn Machine>> {
    match id {
        "reference" => Ok(Arc::new(ReferenceMachine::default())),
        "toy" => Ok(Arc::new(ToyMachine)),
        "dispatch" => machine_by_id("dispatch:even"),
        _ => {
            let relation = id
                .strip_prefix("dispatch:")
                .and_then(Relation::by_name)
                .ok_or_else(|| Error::UnknownMachine(id.to_string()))?;
            let base: Arc<dyn Machine> = Arc::new(ReferenceMachine::default());
            Ok(Arc::new(build_dispatch_machine(base, ProbeFamily::new(relation))))
        }
    }
}

pub const MACHINE_IDS: &[&str] = &[
    "reference",
    "toy",
    "dispatch",
    "dispatch:always",
    "dispatch:never",
    "dispatch:diagonal",
    "dispatch:even",
];
