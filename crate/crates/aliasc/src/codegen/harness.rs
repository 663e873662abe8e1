//! Running a compiled program: argument injection under the callee's drawn
//! argument codings, loader-cell preloading, and decoding the halted state
//! back into a language-level outcome.

use crate::machine::{self, MachineError, MemoryMode, Reg, TaggedWord};
use crate::oracle::{Outcome, Trap};

use super::Compiled;

#[derive(Debug, thiserror::Error)]
pub enum ExecError {
    #[error("entry function takes {expected} arguments, got {got}")]
    Arity { expected: usize, got: usize },
    #[error(transparent)]
    Machine(#[from] MachineError),
}

/// A halted run decoded against its compilation metadata.
#[derive(Debug)]
pub struct Finished {
    pub outcome: Outcome,
    pub steps: u64,
    pub trace: Vec<machine::TraceEvent>,
    pub state: machine::MachineState,
}

/// Execute `c` on `inputs`. Arguments enter the argument registers already
/// carrying the entry function's content deltas; the result register is
/// stripped of the return delta on the way out. A nonzero flag register
/// reports a trap instead of a value.
pub fn run_compiled(
    c: &Compiled,
    inputs: &[i32],
    fuel: u64,
    mem: MemoryMode,
) -> Result<Finished, ExecError> {
    let entry = c.meta.entry();
    if inputs.len() != entry.arg_deltas.len() {
        return Err(ExecError::Arity { expected: entry.arg_deltas.len(), got: inputs.len() });
    }
    let regs: Vec<(Reg, TaggedWord)> = inputs
        .iter()
        .zip(&entry.arg_deltas)
        .enumerate()
        .map(|(i, (&v, &d))| (Reg::arg(i), TaggedWord::reset(v.wrapping_add(d))))
        .collect();
    let preload: Vec<(TaggedWord, TaggedWord)> = c
        .meta
        .loader_cells
        .iter()
        .map(|cell| {
            (
                TaggedWord::new(cell.key_value, cell.key_tag),
                TaggedWord::new(cell.value, cell.tag),
            )
        })
        .collect();

    let run = machine::run(&c.program, &regs, &preload, fuel, mem)?;
    let flag = run.state.reg(Reg::V1).value;
    let outcome = if flag != 0 {
        Outcome::Trap(Trap::from_code(flag).unwrap_or(Trap::Internal))
    } else {
        let ret_delta = c.meta.entry().ret_delta;
        Outcome::Value(run.state.reg(Reg::V0).value.wrapping_sub(ret_delta))
    };
    Ok(Finished { outcome, steps: run.state.steps(), trace: run.trace, state: run.state })
}

/// Decode the stores a trace executed at the compilation's recorded
/// assignment sites: each becomes the language-level value written (the
/// stored word minus the site's content delta), in execution order. This is
/// the shadow that must match the reference evaluator's assignment log.
pub fn shadow_assignments(
    c: &Compiled,
    trace: &[machine::TraceEvent],
) -> Vec<crate::oracle::Assignment> {
    let by_pc: std::collections::HashMap<u32, &crate::codegen::meta::AssignSite> =
        c.meta.assign_sites.iter().map(|s| (s.pc, s)).collect();
    trace
        .iter()
        .filter_map(|ev| {
            let site = by_pc.get(&ev.pc)?;
            let mem = ev.mem.as_ref().filter(|m| m.is_write)?;
            Some(crate::oracle::Assignment {
                function: site.function.clone(),
                name: site.name.clone(),
                value: mem.word.value.wrapping_sub(site.delta),
            })
        })
        .collect()
}
