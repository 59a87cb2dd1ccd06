//! Path-based reference labels, written against the raw edge list so they
//! share no code with the fixed-point solvers.

use super::{AnalysisError, TaskId};
use crate::graph::{FlowType, ProgramGraph, VertexKind};

pub const BRUTE_FORCE_VERTEX_LIMIT: usize = 200;

const COMMUTATIVE: [&str; 7] = ["add", "mul", "and", "or", "xor", "fadd", "fmul"];

struct Raw<'a> {
    graph: &'a ProgramGraph,
}

impl Raw<'_> {
    fn kind(&self, v: u32) -> VertexKind {
        self.graph.vertices[v as usize].kind
    }

    fn edges(&self, flow: FlowType) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        self.graph
            .edges
            .iter()
            .filter(move |e| e.flow == flow)
            .map(|e| (e.src, e.dst, e.position))
    }

    fn succs(&self, v: u32) -> Vec<u32> {
        self.edges(FlowType::Control)
            .filter(|e| e.0 == v)
            .map(|e| e.1)
            .collect()
    }

    fn operand_edges(&self, v: u32) -> Vec<(u32, u32)> {
        let mut ops: Vec<(u32, u32)> = self
            .edges(FlowType::Data)
            .filter(|e| e.1 == v && self.kind(e.0) != VertexKind::Instruction)
            .map(|e| (e.2, e.0))
            .collect();
        ops.sort();
        ops
    }

    fn defined_by(&self, v: u32) -> Vec<u32> {
        self.edges(FlowType::Data)
            .filter(|e| e.0 == v && self.kind(e.0) == VertexKind::Instruction)
            .map(|e| e.1)
            .collect()
    }

    fn producers(&self, data: u32) -> Vec<u32> {
        self.edges(FlowType::Data)
            .filter(|e| e.1 == data && self.kind(e.0) == VertexKind::Instruction)
            .map(|e| e.0)
            .collect()
    }

    fn uses(&self, instr: u32, var: u32) -> bool {
        self.operand_edges(instr).iter().any(|&(_, o)| o == var)
    }

    /// Everything reachable from `from` along control edges, `from` included,
    /// never entering `blocked`.
    fn reach(&self, from: &[u32], blocked: Option<u32>) -> Vec<bool> {
        let mut seen = vec![false; self.graph.vertices.len()];
        let mut stack: Vec<u32> = from.iter().copied().filter(|&v| Some(v) != blocked).collect();
        while let Some(v) = stack.pop() {
            if std::mem::replace(&mut seen[v as usize], true) {
                continue;
            }
            for s in self.succs(v) {
                if Some(s) != blocked && !seen[s as usize] {
                    stack.push(s);
                }
            }
        }
        seen
    }

    fn same_function(&self, a: u32, b: u32) -> bool {
        let (va, vb) = (&self.graph.vertices[a as usize], &self.graph.vertices[b as usize]);
        va.kind == VertexKind::Instruction && vb.kind == VertexKind::Instruction && va.function == vb.function
    }

    fn entry_of(&self, v: u32) -> u32 {
        (0..self.graph.vertices.len() as u32)
            .filter(|&m| self.same_function(v, m) && self.graph.is_defined_instruction(m))
            .find(|&m| !self.edges(FlowType::Control).any(|e| e.1 == m))
            .expect("function has an entry")
    }

    fn expression(&self, v: u32) -> Option<(String, Vec<u32>)> {
        let vx = &self.graph.vertices[v as usize];
        if !self.graph.is_defined_instruction(v) || vx.text_key == "phi" {
            return None;
        }
        let mut operands: Vec<u32> = self.operand_edges(v).into_iter().map(|(_, o)| o).collect();
        if operands.is_empty() || self.defined_by(v).is_empty() {
            return None;
        }
        let op = match &vx.qualifier {
            Some(q) => format!("{} {}", vx.text_key, q),
            None => vx.text_key.clone(),
        };
        let symmetric = COMMUTATIVE.contains(&op.as_str()) || op == "icmp eq" || op == "icmp ne";
        if symmetric {
            operands.sort();
        }
        Some((op, operands))
    }
}

/// Labels for `task` at `root` computed directly from the path definitions.
pub fn brute_force_oracle(task: TaskId, graph: &ProgramGraph, root: u32) -> Result<Vec<bool>, AnalysisError> {
    let n = graph.vertices.len();
    if n > BRUTE_FORCE_VERTEX_LIMIT {
        return Err(AnalysisError::GraphTooLarge {
            vertices: n,
            limit: BRUTE_FORCE_VERTEX_LIMIT,
        });
    }
    let raw = Raw { graph };
    let invalid = |reason: &str| AnalysisError::InvalidRoot {
        task,
        root,
        reason: reason.to_string(),
    };
    if root as usize >= n || raw.kind(root) != VertexKind::Instruction {
        return Err(invalid("not an instruction vertex"));
    }
    if task != TaskId::DataDep && !graph.is_defined_instruction(root) {
        return Err(invalid("not in a function with a body"));
    }

    let labels = match task {
        TaskId::Reachability => raw.reach(&[root], None),
        TaskId::Dominance => {
            let entry = raw.entry_of(root);
            let avoiding = raw.reach(&[entry], Some(root));
            (0..n as u32)
                .map(|m| {
                    m == root
                        || (raw.same_function(root, m) && raw.graph.is_defined_instruction(m) && !avoiding[m as usize])
                })
                .collect()
        }
        TaskId::DataDep => {
            let mut seen = vec![false; n];
            let mut stack = vec![root];
            let mut first = true;
            while let Some(v) = stack.pop() {
                if !first && std::mem::replace(&mut seen[v as usize], true) {
                    continue;
                }
                first = false;
                for (_, o) in raw.operand_edges(v) {
                    for p in raw.producers(o) {
                        if !seen[p as usize] {
                            stack.push(p);
                        }
                    }
                }
            }
            seen
        }
        TaskId::Liveness => (0..n as u32)
            .map(|var| raw.kind(var) == VertexKind::Variable && live_out(&raw, root, var))
            .collect(),
        TaskId::Subexpressions => {
            let key = raw
                .expression(root)
                .ok_or_else(|| invalid("instruction does not form an expression"))?;
            let mut labels: Vec<bool> = (0..n as u32)
                .map(|m| raw.expression(m).as_ref() == Some(&key))
                .collect();
            labels[root as usize] = true;
            labels
        }
    };
    Ok(labels)
}

/// Is there a control path from a successor of `root` to a use of `var`
/// that passes no earlier redefinition of `var`?
fn live_out(raw: &Raw, root: u32, var: u32) -> bool {
    let mut seen = vec![false; raw.graph.vertices.len()];
    let mut stack = raw.succs(root);
    while let Some(v) = stack.pop() {
        if std::mem::replace(&mut seen[v as usize], true) {
            continue;
        }
        if raw.uses(v, var) {
            return true;
        }
        if raw.defined_by(v).contains(&var) {
            continue;
        }
        stack.extend(raw.succs(v));
    }
    false
}
