use std::collections::HashMap;

use fixedbitset::FixedBitSet;

use super::{check_root, AnalysisError, OracleResult, TaskId};
use crate::graph::{GraphIndex, ProgramGraph, VertexKind};

/// Variables live out of `root`:
/// `LiveOut(n) = ⋃_{s ∈ succ(n)} uses(s) ∪ (LiveOut(s) − defs(s))`,
/// solved for the whole function from empty sets.
///
/// `uses` counts every variable operand, including all incoming values of a
/// `phi`; `defs` is the instruction's result.
pub fn liveness(graph: &ProgramGraph, index: &GraphIndex, root: u32) -> Result<OracleResult, AnalysisError> {
    check_root(TaskId::Liveness, graph, root, true)?;
    let (_, instrs) = index
        .function_of(graph, root)
        .expect("defined instruction has a function");
    let local: HashMap<u32, usize> = instrs.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let nv = graph.num_vertices();

    let uses: Vec<FixedBitSet> = instrs
        .iter()
        .map(|&v| {
            let mut s = FixedBitSet::with_capacity(nv);
            for &(_, o) in &index.operands[v as usize] {
                if graph.vertex(o).kind == VertexKind::Variable {
                    s.insert(o as usize);
                }
            }
            s
        })
        .collect();
    let defs: Vec<FixedBitSet> = instrs
        .iter()
        .map(|&v| {
            let mut s = FixedBitSet::with_capacity(nv);
            for &r in &index.results[v as usize] {
                s.insert(r as usize);
            }
            s
        })
        .collect();

    let mut live = vec![FixedBitSet::with_capacity(nv); instrs.len()];
    let mut steps = 0;
    loop {
        let mut next = live.clone();
        for (i, &v) in instrs.iter().enumerate() {
            let mut out = FixedBitSet::with_capacity(nv);
            for s in &index.control_succ[v as usize] {
                let j = local[s];
                let mut through = live[j].clone();
                through.difference_with(&defs[j]);
                out.union_with(&uses[j]);
                out.union_with(&through);
            }
            next[i] = out;
        }
        if next == live {
            break;
        }
        live = next;
        steps += 1;
    }

    let mut labels = vec![false; nv];
    for v in live[local[&root]].ones() {
        labels[v] = true;
    }
    Ok(OracleResult {
        labels,
        step_count: steps,
        root,
    })
}
