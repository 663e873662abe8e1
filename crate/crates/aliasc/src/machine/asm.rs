//! Line-oriented textual assembly: one instruction per line, `#` comments.
//!
//! The printed form mirrors the trace notation: `lw`/`sw` write their
//! displacement around the base register (`lw t0 866593746(t1)`), branches
//! carry a relative skip count, and `jal` an absolute instruction index.

use std::fmt;
use std::str::FromStr;

use super::{Instruction, Reg};

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Instruction::Addi { rd, rs, k } => write!(f, "addi {rd} {rs} {k}"),
            Instruction::Move { rd, rs } => write!(f, "move {rd} {rs}"),
            Instruction::Lw { rd, disp, base } => write!(f, "lw {rd} {disp}({base})"),
            Instruction::Sw { disp, base, rs } => write!(f, "sw {disp}({base}) {rs}"),
            Instruction::B { i } => write!(f, "b {i}"),
            Instruction::Beq { r1, r2, i } => write!(f, "beq {r1} {r2} {i}"),
            Instruction::Bne { r1, r2, i } => write!(f, "bne {r1} {r2} {i}"),
            Instruction::Beqz { r1, i } => write!(f, "beqz {r1} {i}"),
            Instruction::Xor {
                rd,
                r1,
                r2,
                k1,
                k2,
                k0,
            } => write!(f, "xor {rd} {r1} {r2} {k1} {k2} {k0}"),
            Instruction::Jal { target } => write!(f, "jal {target}"),
            Instruction::Jr { rs } => write!(f, "jr {rs}"),
            Instruction::Stop => write!(f, "stop"),
        }
    }
}

impl FromStr for Reg {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Reg::ALL
            .iter()
            .copied()
            .find(|r| r.name() == s)
            .ok_or(())
    }
}

/// A malformed assembly file, reported with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {msg}")]
pub struct AsmError {
    pub line: usize,
    pub msg: String,
}

fn err(line: usize, msg: impl Into<String>) -> AsmError {
    AsmError {
        line,
        msg: msg.into(),
    }
}

fn parse_reg(tok: &str, line: usize) -> Result<Reg, AsmError> {
    tok.parse()
        .map_err(|_| err(line, format!("unknown register `{tok}`")))
}

fn parse_int(tok: &str, line: usize) -> Result<i32, AsmError> {
    tok.parse()
        .map_err(|_| err(line, format!("bad integer `{tok}`")))
}

/// Parse `disp(base)` as used by `lw`/`sw`.
fn parse_mem_operand(tok: &str, line: usize) -> Result<(i32, Reg), AsmError> {
    let open = tok
        .find('(')
        .ok_or_else(|| err(line, format!("expected disp(base), got `{tok}`")))?;
    if !tok.ends_with(')') {
        return Err(err(line, format!("expected disp(base), got `{tok}`")));
    }
    let disp = parse_int(&tok[..open], line)?;
    let base = parse_reg(&tok[open + 1..tok.len() - 1], line)?;
    Ok((disp, base))
}

/// Parse one instruction from its whitespace-separated tokens.
fn parse_instruction(toks: &[&str], line: usize) -> Result<Instruction, AsmError> {
    let need = |n: usize| {
        if toks.len() == n + 1 {
            Ok(())
        } else {
            Err(err(
                line,
                format!("`{}` takes {} operands, got {}", toks[0], n, toks.len() - 1),
            ))
        }
    };
    match toks[0] {
        "addi" => {
            need(3)?;
            Ok(Instruction::Addi {
                rd: parse_reg(toks[1], line)?,
                rs: parse_reg(toks[2], line)?,
                k: parse_int(toks[3], line)?,
            })
        }
        "move" => {
            need(2)?;
            Ok(Instruction::Move {
                rd: parse_reg(toks[1], line)?,
                rs: parse_reg(toks[2], line)?,
            })
        }
        "lw" => {
            need(2)?;
            let (disp, base) = parse_mem_operand(toks[2], line)?;
            Ok(Instruction::Lw {
                rd: parse_reg(toks[1], line)?,
                disp,
                base,
            })
        }
        "sw" => {
            need(2)?;
            let (disp, base) = parse_mem_operand(toks[1], line)?;
            Ok(Instruction::Sw {
                disp,
                base,
                rs: parse_reg(toks[2], line)?,
            })
        }
        "b" => {
            need(1)?;
            Ok(Instruction::B {
                i: parse_int(toks[1], line)?,
            })
        }
        "beq" => {
            need(3)?;
            Ok(Instruction::Beq {
                r1: parse_reg(toks[1], line)?,
                r2: parse_reg(toks[2], line)?,
                i: parse_int(toks[3], line)?,
            })
        }
        "bne" => {
            need(3)?;
            Ok(Instruction::Bne {
                r1: parse_reg(toks[1], line)?,
                r2: parse_reg(toks[2], line)?,
                i: parse_int(toks[3], line)?,
            })
        }
        "beqz" => {
            need(2)?;
            Ok(Instruction::Beqz {
                r1: parse_reg(toks[1], line)?,
                i: parse_int(toks[2], line)?,
            })
        }
        "xor" => {
            need(6)?;
            Ok(Instruction::Xor {
                rd: parse_reg(toks[1], line)?,
                r1: parse_reg(toks[2], line)?,
                r2: parse_reg(toks[3], line)?,
                k1: parse_int(toks[4], line)?,
                k2: parse_int(toks[5], line)?,
                k0: parse_int(toks[6], line)?,
            })
        }
        "jal" => {
            need(1)?;
            let t: u32 = toks[1]
                .parse()
                .map_err(|_| err(line, format!("bad jump target `{}`", toks[1])))?;
            Ok(Instruction::Jal { target: t })
        }
        "jr" => {
            need(1)?;
            Ok(Instruction::Jr {
                rs: parse_reg(toks[1], line)?,
            })
        }
        "stop" => {
            need(0)?;
            Ok(Instruction::Stop)
        }
        other => Err(err(line, format!("unknown opcode `{other}`"))),
    }
}

/// Parse a whole assembly file. Blank lines and `#` comments (whole-line or
/// trailing) are ignored.
pub fn parse_program(text: &str) -> Result<Vec<Instruction>, AsmError> {
    let mut prog = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let code = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let toks: Vec<&str> = code.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        prog.push(parse_instruction(&toks, line)?);
    }
    Ok(prog)
}

/// Print a program with one instruction per line, annotated with pc numbers
/// and optional per-line comments (`comment(pc)` → text after `#`).
pub fn print_program(program: &[Instruction], comment: impl Fn(u32) -> Option<String>) -> String {
    let mut out = String::new();
    for (pc, instr) in program.iter().enumerate() {
        let pc = pc as u32;
        match comment(pc) {
            Some(c) => out.push_str(&format!("{:<40} # {c}\n", instr.to_string())),
            None => out.push_str(&format!("{instr}\n")),
        }
    }
    out
}
