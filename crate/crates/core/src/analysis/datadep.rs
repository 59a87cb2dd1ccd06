use super::{check_root, AnalysisError, OracleResult, TaskId};
use crate::graph::{GraphIndex, ProgramGraph};

/// Instructions producing the operands of `n`.
pub(crate) fn defs(index: &GraphIndex, n: u32) -> impl Iterator<Item = u32> + '_ {
    index.operands[n as usize]
        .iter()
        .flat_map(move |&(_, o)| index.definers[o as usize].iter().copied())
}

/// Transitive producers of `root`'s operands: `defs(n) ∪ ⋃ DataDep(p)`.
///
/// The root is not added for its own sake; it only appears when it lies on a
/// def-use cycle (a loop-carried `phi`).
pub fn data_deps(graph: &ProgramGraph, index: &GraphIndex, root: u32) -> Result<OracleResult, AnalysisError> {
    check_root(TaskId::DataDep, graph, root, false)?;
    let mut set = vec![false; graph.num_vertices()];
    let mut steps = 0;
    loop {
        let mut next = set.clone();
        for d in defs(index, root) {
            next[d as usize] = true;
        }
        for (p, _) in set.iter().enumerate().filter(|(_, &s)| s) {
            for d in defs(index, p as u32) {
                next[d as usize] = true;
            }
        }
        if next == set {
            break;
        }
        set = next;
        steps += 1;
    }
    Ok(OracleResult {
        labels: set,
        step_count: steps,
        root,
    })
}
