//! The reference machine: a small stack machine with self-delimiting op-codes.
//!
//! | code    | instruction | effect                                                  |
//! |---------|-------------|---------------------------------------------------------|
//! | `00`    | `Out0`      | append 0 to the output                                  |
//! | `01`    | `Out1`      | append 1 to the output                                  |
//! | `100`   | `Push0`     | push 0 on the work stack                                |
//! | `101`   | `Inc`       | increment the top of the stack                          |
//! | `1100`  | `Mark`      | remember the next instruction as the loop target        |
//! | `1101`  | `Loop`      | if top > 0: decrement it and jump to the mark; else pop |
//! | `1110`  | `Jump`      | jump to the mark                                        |
//! | `11110` | `Halt`      | stop                                                    |
//! | `11111` | (invalid)   | crash                                                   |
//!
//! Jumps only target instructions that were already read, so a program is
//! consumed strictly left to right. Using `Inc`, `Loop` or `Jump` without the
//! required stack entry or mark crashes, as does exceeding the stack depth or
//! counter caps.

use super::{Execution, Machine, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Instruction {
    Out0,
    Out1,
    Push0,
    Inc,
    Mark,
    Loop,
    Jump,
    Halt,
}

impl Instruction {
    pub fn code(self) -> &'static str {
        match self {
            Instruction::Out0 => "00",
            Instruction::Out1 => "01",
            Instruction::Push0 => "100",
            Instruction::Inc => "101",
            Instruction::Mark => "1100",
            Instruction::Loop => "1101",
            Instruction::Jump => "1110",
            Instruction::Halt => "11110",
        }
    }
}

enum Decoded {
    Instr(Instruction, usize),
    Invalid(usize),
    Incomplete,
}

fn decode(bits: &[bool]) -> Decoded {
    use Instruction::*;
    let bit = |i: usize| bits.get(i).copied();
    match (bit(0), bit(1)) {
        (None, _) | (Some(_), None) => Decoded::Incomplete,
        (Some(false), Some(b)) => Decoded::Instr(if b { Out1 } else { Out0 }, 2),
        (Some(true), Some(false)) => match bit(2) {
            None => Decoded::Incomplete,
            Some(b) => Decoded::Instr(if b { Inc } else { Push0 }, 3),
        },
        (Some(true), Some(true)) => match (bit(2), bit(3)) {
            (None, _) | (Some(_), None) => Decoded::Incomplete,
            (Some(false), Some(b)) => Decoded::Instr(if b { Loop } else { Mark }, 4),
            (Some(true), Some(false)) => Decoded::Instr(Jump, 4),
            (Some(true), Some(true)) => match bit(4) {
                None => Decoded::Incomplete,
                Some(false) => Decoded::Instr(Halt, 5),
                Some(true) => Decoded::Invalid(5),
            },
        },
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceMachine {
    /// Maximum work-stack depth.
    pub stack_cap: usize,
    /// Maximum value of a stack cell.
    pub counter_cap: u64,
}

impl Default for ReferenceMachine {
    fn default() -> Self {
        ReferenceMachine {
            stack_cap: 32,
            counter_cap: 1 << 16,
        }
    }
}

impl ReferenceMachine {
    /// Assembles a program from instructions.
    pub fn assemble(instructions: &[Instruction]) -> super::Program {
        instructions
            .iter()
            .map(|i| i.code())
            .collect::<String>()
            .parse()
            .expect("op-codes are binary")
    }
}

impl Machine for ReferenceMachine {
    fn id(&self) -> &str {
        "reference"
    }

    fn boot(&self) -> Box<dyn Execution<'_> + '_> {
        Box::new(ReferenceExecution {
            machine: self,
            code: Vec::new(),
            read: 0,
            pc: 0,
            mark: None,
            stack: Vec::new(),
            output: Vec::new(),
            steps: 0,
            status: None,
        })
    }
}

#[derive(Clone)]
struct ReferenceExecution<'m> {
    machine: &'m ReferenceMachine,
    code: Vec<Instruction>,
    read: usize,
    pc: usize,
    mark: Option<usize>,
    stack: Vec<u64>,
    output: Vec<bool>,
    steps: u64,
    status: Option<Status>,
}

impl ReferenceExecution<'_> {
    fn execute(&mut self, instr: Instruction) -> Option<Status> {
        use Instruction::*;
        let mut next = self.pc + 1;
        match instr {
            Out0 => self.output.push(false),
            Out1 => self.output.push(true),
            Push0 => {
                if self.stack.len() >= self.machine.stack_cap {
                    return Some(Status::Crashed);
                }
                self.stack.push(0);
            }
            Inc => match self.stack.last_mut() {
                Some(top) if *top < self.machine.counter_cap => *top += 1,
                _ => return Some(Status::Crashed),
            },
            Mark => self.mark = Some(next),
            Loop => {
                let (Some(top), Some(mark)) = (self.stack.last_mut(), self.mark) else {
                    return Some(Status::Crashed);
                };
                if *top > 0 {
                    *top -= 1;
                    next = mark;
                } else {
                    self.stack.pop();
                }
            }
            Jump => match self.mark {
                Some(mark) => next = mark,
                None => return Some(Status::Crashed),
            },
            Halt => return Some(Status::Halted),
        }
        self.pc = next;
        None
    }
}

impl<'m> Execution<'m> for ReferenceExecution<'m> {
    fn resume(&mut self, input: &[bool], budget: u64, output_target: usize) -> Status {
        if let Some(status) = self.status {
            return status;
        }
        loop {
            if self.steps >= budget || self.output.len() >= output_target {
                return Status::Running;
            }
            let instr = if self.pc < self.code.len() {
                self.code[self.pc]
            } else {
                match decode(&input[self.read.min(input.len())..]) {
                    Decoded::Incomplete => return Status::NeedsMoreInput,
                    Decoded::Invalid(len) => {
                        self.read += len;
                        self.steps += 1;
                        self.status = Some(Status::Crashed);
                        return Status::Crashed;
                    }
                    Decoded::Instr(instr, len) => {
                        self.read += len;
                        self.code.push(instr);
                        instr
                    }
                }
            };
            self.steps += 1;
            if let Some(status) = self.execute(instr) {
                self.status = Some(status);
                return status;
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

#[cfg(test)]
mod tests {
    use super::Instruction::*;
    use super::*;
    use crate::machine::{run_program, BitString, Program};

    fn run(prog: &Program, budget: u64) -> crate::machine::ExecutionOutcome {
        run_program(&ReferenceMachine::default(), prog, budget)
    }

    #[test]
    fn op_codes_are_prefix_free() {
        let all = [Out0, Out1, Push0, Inc, Mark, Loop, Jump, Halt];
        let mut codes: Vec<&str> = all.iter().map(|i| i.code()).collect();
        codes.push("11111");
        for a in &codes {
            for b in &codes {
                if a != b {
                    assert!(!b.starts_with(a), "{a} is a prefix of {b}");
                }
            }
        }
    }

    #[test]
    fn counted_loop_repeats_its_body() {
        // push 0, inc, inc, mark, out1, loop, halt  =>  "111"
        let prog = ReferenceMachine::assemble(&[Push0, Inc, Inc, Mark, Out1, Loop, Halt]);
        let out = run(&prog, 1000);
        assert_eq!(out.output.to_string(), "111");
        assert_eq!(out.status, Status::Halted);
    }

    #[test]
    fn unconditional_jump_runs_forever() {
        let prog = ReferenceMachine::assemble(&[Out0, Mark, Out1, Jump]);
        let out = run(&prog, 101);
        assert_eq!(out.status, Status::Running);
        assert_eq!(out.steps_used, 101);
        assert!(out.output.to_string().starts_with("01111"));
    }

    #[test]
    fn invalid_op_code_and_stack_misuse_crash() {
        assert_eq!(run(&"0111111".parse().unwrap(), 100).status, Status::Crashed);
        assert_eq!(run(&ReferenceMachine::assemble(&[Inc]), 100).status, Status::Crashed);
        assert_eq!(run(&ReferenceMachine::assemble(&[Jump]), 100).status, Status::Crashed);
        let deep: Vec<Instruction> = std::iter::repeat(Push0).take(33).collect();
        assert_eq!(run(&ReferenceMachine::assemble(&deep), 100).status, Status::Crashed);
    }

    #[test]
    fn partial_op_code_needs_input() {
        let out = run(&"0111".parse().unwrap(), 100);
        assert_eq!(out.output.to_string(), "1");
        assert_eq!(out.status, Status::NeedsMoreInput);
    }

    /// Brute force: the shortest program whose output starts with "01".
    #[test]
    fn shortest_program_emitting_01() {
        let target: BitString = "01".parse().unwrap();
        let mut found = None;
        'outer: for len in 0..=16 {
            for prog in BitString::all_of_len(len) {
                if target.is_prefix_of(run(&prog, 1 << 12).output.bits()) {
                    found = Some(prog);
                    break 'outer;
                }
            }
        }
        let prog = found.expect("some program of length <= 16 emits 01");
        assert_eq!(prog.to_string(), "0001");
        let out = run(&prog, 1 << 20);
        assert!(out.output.to_string().starts_with("01"));
    }
}
