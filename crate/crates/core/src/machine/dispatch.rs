//! A dispatching machine built from a base machine and a family of probe programs.
//!
//! Inputs are routed by their first bits:
//!
//! * `1^(n+1) 0` runs probe `n` (nothing after the header is read),
//! * `00 p` runs the base machine on `p`,
//! * `01 p` runs the base machine on `p` and inverts every output bit.
//!
//! The three header patterns are prefix-free, so every input is routed by at
//! most one of them. Routing itself costs no steps.

use std::fmt;
use std::sync::Arc;

use super::{Execution, Machine, Status};

/// A decidable ternary relation `S(n, k, i)` queried by probe programs.
#[derive(Clone)]
pub struct Relation {
    name: String,
    test: Arc<dyn Fn(u64, u64, u64) -> bool + Send + Sync>,
}

impl Relation {
    pub fn new(name: impl Into<String>, test: impl Fn(u64, u64, u64) -> bool + Send + Sync + 'static) -> Self {
        Relation {
            name: name.into(),
            test: Arc::new(test),
        }
    }

    /// Built-in relations selectable from configuration.
    pub fn by_name(name: &str) -> Option<Self> {
        Some(match name {
            "always" => Relation::new(name, |_, _, _| true),
            "never" => Relation::new(name, |_, _, _| false),
            "diagonal" => Relation::new(name, |_, k, i| i == k),
            // Witnesses exist exactly for even n.
            "even" => Relation::new(name, |n, _, _| n % 2 == 0),
            _ => return None,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn holds(&self, n: u64, k: u64, i: u64) -> bool {
        (self.test)(n, k, i)
    }
}

impl fmt::Debug for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Relation({})", self.name)
    }
}

/// The program `p_n`: output `1^(n+1) 0`, then for k = 0, 1, ... search
/// i = 0, 1, ... for a witness of `S(n, k, i)` and output one `0` per
/// witness found. Each relation query costs one step, as does the header.
#[derive(Debug, Clone)]
pub struct ProbeProgram {
    pub n: u64,
    pub relation: Relation,
}

pub fn make_probe_program(n: u64, relation: Relation) -> ProbeProgram {
    ProbeProgram { n, relation }
}

/// The probe programs for every `n`, sharing one relation.
#[derive(Debug, Clone)]
pub struct ProbeFamily {
    pub relation: Relation,
}

impl ProbeFamily {
    pub fn new(relation: Relation) -> Self {
        ProbeFamily { relation }
    }

    pub fn program(&self, n: u64) -> ProbeProgram {
        make_probe_program(n, self.relation.clone())
    }
}

/// A probe is self-contained: run as a machine, it ignores its input.
impl Machine for ProbeProgram {
    fn id(&self) -> &str {
        "probe"
    }

    fn boot(&self) -> Box<dyn Execution<'_> + '_> {
        Box::new(ProbeExecution::new(self.n, &self.relation))
    }
}

#[derive(Clone)]
struct ProbeExecution<'r> {
    n: u64,
    relation: &'r Relation,
    header_done: bool,
    k: u64,
    i: u64,
    output: Vec<bool>,
    steps: u64,
}

impl<'r> ProbeExecution<'r> {
    fn new(n: u64, relation: &'r Relation) -> Self {
        ProbeExecution {
            n,
            relation,
            header_done: false,
            k: 0,
            i: 0,
            output: Vec::new(),
            steps: 0,
        }
    }
}

impl<'m> Execution<'m> for ProbeExecution<'m> {
    fn resume(&mut self, _input: &[bool], budget: u64, output_target: usize) -> Status {
        loop {
            if self.steps >= budget || self.output.len() >= output_target {
                return Status::Running;
            }
            self.steps += 1;
            if !self.header_done {
                self.output.extend(std::iter::repeat_n(true, self.n as usize + 1));
                self.output.push(false);
                self.header_done = true;
            } else if self.relation.holds(self.n, self.k, self.i) {
                self.output.push(false);
                self.k += 1;
                self.i = 0;
            } else {
                self.i += 1;
            }
        }
    }

    fn output(&self) -> &[bool] {
        &self.output
    }

    fn steps(&self) -> u64 {
        self.steps
    }

    fn fork(&self) -> Box<dyn Execution<'m> + 'm> {
        Box::new(self.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// `1^(n+1) 0`: run probe `n`.
    Probe { n: u64 },
    /// `00 p` (or `01 p` with inverted output): run the base machine on `p`.
    Base { invert: bool },
    /// Not enough input to decide.
    Incomplete,
}

impl Route {
    /// Routes an input by its header. Also returns the header length.
    pub fn of(input: &[bool]) -> (Route, usize) {
        match input.first() {
            None => (Route::Incomplete, 0),
            Some(false) => match input.get(1) {
                None => (Route::Incomplete, 0),
                Some(&invert) => (Route::Base { invert }, 2),
            },
            Some(true) => match input.iter().position(|&b| !b) {
                None => (Route::Incomplete, 0),
                Some(zero_at) => (Route::Probe { n: zero_at as u64 - 1 }, zero_at + 1),
            },
        }
    }
}

#[derive(Debug)]
pub struct DispatchMachine {
    id: String,
    base: Arc<dyn Machine>,
    probes: ProbeFamily,
}

pub fn build_dispatch_machine(base: Arc<dyn Machine>, probes: ProbeFamily) -> DispatchMachine {
    DispatchMachine {
        id: format!("dispatch:{}", probes.relation.name()),
        base,
        probes,
    }
}

impl DispatchMachine {
    pub fn base(&self) -> &dyn Machine {
        self.base.as_ref()
    }

    pub fn probes(&self) -> &ProbeFamily {
        &self.probes
    }
}

impl Machine for DispatchMachine {
    fn id(&self) -> &str {
        &self.id
    }

    fn boot(&self) -> Box<dyn Execution<'_> + '_> {
        Box::new(DispatchExecution::Routing { machine: self })
    }
}

enum DispatchExecution<'m> {
    Routing {
        machine: &'m DispatchMachine,
    },
    Base {
        inner: Box<dyn Execution<'m> + 'm>,
        invert: bool,
        output: Vec<bool>,
    },
    Probe(ProbeExecution<'m>),
}

impl<'m> Execution<'m> for DispatchExecution<'m> {
    fn resume(&mut self, input: &[bool], budget: u64, output_target: usize) -> Status {
        if let DispatchExecution::Routing { machine } = *self {
            let (route, header) = Route::of(input);
            *self = match route {
                Route::Incomplete => return Status::NeedsMoreInput,
                Route::Probe { n } => DispatchExecution::Probe(ProbeExecution::new(n, &machine.probes.relation)),
                Route::Base { invert } => {
                    debug_assert_eq!(header, 2);
                    DispatchExecution::Base {
                        inner: machine.base.boot(),
                        invert,
                        output: Vec::new(),
                    }
                }
            };
        }
        match self {
            DispatchExecution::Routing { .. } => unreachable!("routed above"),
            DispatchExecution::Probe(probe) => probe.resume(input, budget, output_target),
            DispatchExecution::Base { inner, invert, output } => {
                let status = inner.resume(&input[2..], budget, output_target);
                let produced = inner.output();
                output.extend(produced[output.len()..].iter().map(|&b| b ^ *invert));
                status
            }
        }
    }

    fn output(&self) -> &[bool] {
        match self {
            DispatchExecution::Routing { .. } => &[],
            DispatchExecution::Base { output, .. } => output,
            DispatchExecution::Probe(probe) => probe.output(),
        }
    }

    fn steps(&self) -> u64 {
        match self {
            DispatchExecution::Routing { .. } => 0,
            DispatchExecution::Base { inner, .. } => inner.steps(),
            DispatchExecution::Probe(probe) => probe.steps(),
        }
    }

    fn fork(&self) -> Box<dyn Execution<'m> + 'm> {
        Box::new(match self {
            DispatchExecution::Routing { machine } => DispatchExecution::Routing { machine },
            DispatchExecution::Base { inner, invert, output } => DispatchExecution::Base {
                inner: inner.fork(),
                invert: *invert,
                output: output.clone(),
            },
            DispatchExecution::Probe(probe) => DispatchExecution::Probe(probe.clone()),
        })
    }
}
