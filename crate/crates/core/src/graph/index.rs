use std::collections::BTreeMap;

use super::{FlowType, ProgramGraph, VertexKind};

/// Adjacency views over a [`ProgramGraph`] used by the analyses.
#[derive(Debug, Clone)]
pub struct GraphIndex {
    pub control_succ: Vec<Vec<u32>>,
    pub control_pred: Vec<Vec<u32>>,
    /// Per instruction: operand vertices as `(position, vertex)`, sorted by position.
    pub operands: Vec<Vec<(u32, u32)>>,
    /// Per instruction: data vertices it defines.
    pub results: Vec<Vec<u32>>,
    /// Per data vertex: instructions that define it.
    pub definers: Vec<Vec<u32>>,
    /// Instruction vertices of each function with a body, in vertex order.
    pub function_instrs: BTreeMap<u32, Vec<u32>>,
    /// Entry instruction of each function with a body.
    pub entries: BTreeMap<u32, u32>,
}

impl GraphIndex {
    pub fn new(graph: &ProgramGraph) -> Self {
        let n = graph.num_vertices();
        let mut idx = GraphIndex {
            control_succ: vec![Vec::new(); n],
            control_pred: vec![Vec::new(); n],
            operands: vec![Vec::new(); n],
            results: vec![Vec::new(); n],
            definers: vec![Vec::new(); n],
            function_instrs: BTreeMap::new(),
            entries: BTreeMap::new(),
        };
        for e in &graph.edges {
            let (s, d) = (e.src as usize, e.dst as usize);
            match e.flow {
                FlowType::Control => {
                    idx.control_succ[s].push(e.dst);
                    idx.control_pred[d].push(e.src);
                }
                FlowType::Data => {
                    if graph.vertices[s].kind == VertexKind::Instruction {
                        idx.results[s].push(e.dst);
                        idx.definers[d].push(e.src);
                    } else {
                        idx.operands[d].push((e.position, e.src));
                    }
                }
                FlowType::Call => {}
            }
        }
        for ops in &mut idx.operands {
            ops.sort_unstable();
        }
        for v in &graph.vertices {
            if graph.is_defined_instruction(v.id) {
                if let Some(f) = v.function {
                    idx.function_instrs.entry(f).or_default().push(v.id);
                }
            }
        }
        for (&f, instrs) in &idx.function_instrs {
            if let Some(&entry) = instrs.iter().find(|&&i| idx.control_pred[i as usize].is_empty()) {
                idx.entries.insert(f, entry);
            }
        }
        idx
    }

    /// Instructions of the function owning `instr`.
    pub fn function_of<'a>(&'a self, graph: &ProgramGraph, instr: u32) -> Option<(u32, &'a [u32])> {
        let f = graph.vertex(instr).function?;
        self.function_instrs.get(&f).map(|v| (f, v.as_slice()))
    }
}
