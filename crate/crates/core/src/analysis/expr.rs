use serde::{Deserialize, Serialize};

use super::{check_root, AnalysisError, OracleOptions, OracleResult, TaskId};
use crate::graph::{GraphIndex, ProgramGraph};

/// Opcodes whose operand lists are sorted before comparison. `icmp` only
/// counts for the symmetric predicates `eq` and `ne`.
pub const COMMUTATIVE_OPCODES: [&str; 9] = ["add", "mul", "and", "or", "xor", "fadd", "fmul", "icmp eq", "icmp ne"];

/// An instruction reduced to its operator and operand vertices.
///
/// `opcode` carries the comparison predicate or callee name where one
/// exists, e.g. `icmp slt` or `call @f`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CanonicalExpression {
    pub opcode: String,
    pub operands: Vec<u32>,
}

impl CanonicalExpression {
    pub fn new(opcode: String, mut operands: Vec<u32>) -> Self {
        if COMMUTATIVE_OPCODES.contains(&opcode.as_str()) {
            operands.sort_unstable();
        }
        CanonicalExpression { opcode, operands }
    }
}

pub(crate) fn qualified_opcode(graph: &ProgramGraph, v: u32) -> String {
    let vertex = graph.vertex(v);
    match (&vertex.qualifier, vertex.text_key.as_str()) {
        (Some(q), "call") => format!("call @{q}"),
        (Some(q), key) => format!("{key} {q}"),
        (None, key) => key.to_string(),
    }
}

/// The expression `instr` computes, if it forms one: it needs at least one
/// operand and a result. `phi` is excluded since its value depends on the
/// incoming edge rather than on its operands alone.
pub fn canonical_expression(graph: &ProgramGraph, index: &GraphIndex, instr: u32) -> Option<CanonicalExpression> {
    if !graph.is_defined_instruction(instr)
        || graph.vertex(instr).text_key == "phi"
        || index.operands[instr as usize].is_empty()
        || index.results[instr as usize].is_empty()
    {
        return None;
    }
    let operands = index.operands[instr as usize].iter().map(|&(_, o)| o).collect();
    Some(CanonicalExpression::new(qualified_opcode(graph, instr), operands))
}

/// Every instruction computing the same canonical expression as `root`.
pub fn subexpressions(
    graph: &ProgramGraph,
    index: &GraphIndex,
    root: u32,
    options: OracleOptions,
) -> Result<OracleResult, AnalysisError> {
    check_root(TaskId::Subexpressions, graph, root, true)?;
    let key = canonical_expression(graph, index, root).ok_or_else(|| AnalysisError::InvalidRoot {
        task: TaskId::Subexpressions,
        root,
        reason: "instruction does not form an expression".to_string(),
    })?;
    let mut labels = vec![false; graph.num_vertices()];
    for v in 0..graph.num_vertices() as u32 {
        if canonical_expression(graph, index, v).as_ref() == Some(&key) {
            labels[v as usize] = true;
        }
    }
    labels[root as usize] = options.label_subexpression_root;
    Ok(OracleResult {
        labels,
        step_count: 0,
        root,
    })
}
