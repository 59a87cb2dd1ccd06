use super::{check_root, AnalysisError, OracleResult, TaskId};
use crate::graph::{GraphIndex, ProgramGraph};

/// Instructions reachable from `root` along control edges, root included.
pub fn reachability(graph: &ProgramGraph, index: &GraphIndex, root: u32) -> Result<OracleResult, AnalysisError> {
    check_root(TaskId::Reachability, graph, root, true)?;
    let mut reached = vec![false; graph.num_vertices()];
    reached[root as usize] = true;
    let mut steps = 0;
    loop {
        let mut next = reached.clone();
        for (v, _) in reached.iter().enumerate().filter(|(_, &r)| r) {
            for &s in &index.control_succ[v] {
                next[s as usize] = true;
            }
        }
        if next == reached {
            break;
        }
        reached = next;
        steps += 1;
    }
    Ok(OracleResult {
        labels: reached,
        step_count: steps,
        root,
    })
}
