use std::collections::HashMap;

use fixedbitset::FixedBitSet;

use super::{check_root, AnalysisError, OracleResult, TaskId};
use crate::graph::{GraphIndex, ProgramGraph};

/// Instructions dominated by `root` within its function.
///
/// `Dom(entry) = {entry}`; every other instruction starts at the full set
/// and is refined to `{n} ∪ ⋂ Dom(pred)` until nothing changes.
pub fn dominance(graph: &ProgramGraph, index: &GraphIndex, root: u32) -> Result<OracleResult, AnalysisError> {
    check_root(TaskId::Dominance, graph, root, true)?;
    let (f, instrs) = index
        .function_of(graph, root)
        .expect("defined instruction has a function");
    let entry = index.entries[&f];
    let local: HashMap<u32, usize> = instrs.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let n = instrs.len();

    let mut full = FixedBitSet::with_capacity(n);
    full.insert_range(..);
    let mut dom: Vec<FixedBitSet> = instrs
        .iter()
        .map(|&v| {
            if v == entry {
                let mut s = FixedBitSet::with_capacity(n);
                s.insert(local[&v]);
                s
            } else {
                full.clone()
            }
        })
        .collect();

    let mut steps = 0;
    loop {
        let mut next = dom.clone();
        for (i, &v) in instrs.iter().enumerate() {
            if v == entry {
                continue;
            }
            let mut meet = full.clone();
            for p in &index.control_pred[v as usize] {
                meet.intersect_with(&dom[local[p]]);
            }
            meet.insert(i);
            next[i] = meet;
        }
        if next == dom {
            break;
        }
        dom = next;
        steps += 1;
    }

    let r = local[&root];
    let mut labels = vec![false; graph.num_vertices()];
    for (i, &v) in instrs.iter().enumerate() {
        labels[v as usize] = dom[i].contains(r);
    }
    Ok(OracleResult {
        labels,
        step_count: steps,
        root,
    })
}
