//! A three-instruction machine small enough for exhaustive enumeration.
//!
//! Op-codes are two bits wide: `00` emits 0, `01` emits 1, `10` jumps back to
//! the first instruction, `11` is invalid and crashes. A jump before anything
//! was emitted also crashes, so every run that does not need input either
//! crashes or keeps producing output.

use super::{Execution, Machine, Status};

#[derive(Debug, Clone, Copy, Default)]
pub struct ToyMachine;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Emit(bool),
    Repeat,
}

impl Machine for ToyMachine {
    fn id(&self) -> &str {
        "toy"
    }

    fn boot(&self) -> Box<dyn Execution<'_> + '_> {
        Box::new(ToyExecution::default())
    }
}

#[derive(Debug, Clone, Default)]
struct ToyExecution {
    code: Vec<Op>,
    pc: usize,
    output: Vec<bool>,
    steps: u64,
    crashed: bool,
}

impl<'m> Execution<'m> for ToyExecution {
    fn resume(&mut self, input: &[bool], budget: u64, output_target: usize) -> Status {
        if self.crashed {
            return Status::Crashed;
        }
        loop {
            if self.steps >= budget || self.output.len() >= output_target {
                return Status::Running;
            }
            let op = if self.pc < self.code.len() {
                self.code[self.pc]
            } else {
                let at = 2 * self.code.len();
                if input.len() < at + 2 {
                    return Status::NeedsMoreInput;
                }
                let op = match (input[at], input[at + 1]) {
                    (false, b) => Op::Emit(b),
                    (true, false) => Op::Repeat,
                    (true, true) => {
                        self.steps += 1;
                        self.crashed = true;
                        return Status::Crashed;
                    }
                };
                self.code.push(op);
                op
            };
            self.steps += 1;
            match op {
                Op::Emit(b) => {
                    self.output.push(b);
                    self.pc += 1;
                }
                Op::Repeat if self.output.is_empty() => {
                    self.crashed = true;
                    return Status::Crashed;
                }
                Op::Repeat => self.pc = 0,
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
