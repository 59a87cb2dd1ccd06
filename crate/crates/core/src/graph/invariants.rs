use std::collections::{BTreeMap, BTreeSet};

use super::{FlowType, GraphIndex, ProgramGraph, VertexKind};

/// Checks the structural rules every program graph must satisfy and
/// describes each violation. An empty result means the graph is well formed.
pub fn invariant_violations(graph: &ProgramGraph) -> Vec<String> {
    let mut out = Vec::new();
    let n = graph.num_vertices() as u32;
    for (i, v) in graph.vertices.iter().enumerate() {
        if v.id != i as u32 {
            out.push(format!("vertex at index {i} has id {}", v.id));
        }
        if v.text_key.is_empty() {
            out.push(format!("vertex {i} has an empty key"));
        }
        if v.kind == VertexKind::Instruction && v.function.is_none() {
            out.push(format!("instruction vertex {i} has no function"));
        }
    }
    let kind = |id: u32| graph.vertices[id as usize].kind;
    let mut data_degree = vec![0usize; n as usize];
    for e in &graph.edges {
        if e.src >= n || e.dst >= n {
            out.push(format!("edge {e:?} references a missing vertex"));
            continue;
        }
        let (s, d) = (kind(e.src), kind(e.dst));
        match e.flow {
            FlowType::Control => {
                if s != VertexKind::Instruction || d != VertexKind::Instruction {
                    out.push(format!("control edge {e:?} does not join two instructions"));
                }
                if graph.vertex(e.src).function != graph.vertex(e.dst).function {
                    out.push(format!("control edge {e:?} crosses functions"));
                }
                if e.src == e.dst {
                    out.push(format!("control self-loop at {}", e.src));
                }
            }
            FlowType::Data => {
                data_degree[e.src as usize] += 1;
                data_degree[e.dst as usize] += 1;
                match (s, d) {
                    (VertexKind::Variable | VertexKind::Constant, VertexKind::Instruction) => {
                        let sv = graph.vertex(e.src);
                        if sv.function.is_some() && sv.function != graph.vertex(e.dst).function {
                            out.push(format!("data edge {e:?} uses a variable of another function"));
                        }
                    }
                    (VertexKind::Instruction, VertexKind::Variable) => {
                        if e.position != 0 {
                            out.push(format!("definition edge {e:?} has non-zero position"));
                        }
                    }
                    _ => out.push(format!("data edge {e:?} joins {s:?} to {d:?}")),
                }
            }
            FlowType::Call => {
                if s != VertexKind::Instruction || d != VertexKind::Instruction {
                    out.push(format!("call edge {e:?} does not join two instructions"));
                }
                if e.position != 0 {
                    out.push(format!("call edge {e:?} has non-zero position"));
                }
            }
        }
    }
    for v in &graph.vertices {
        if v.kind == VertexKind::Variable && data_degree[v.id as usize] == 0 {
            out.push(format!("variable vertex {} has no data edges", v.id));
        }
    }

    // Control positions out of each instruction form 0..k; operand positions
    // into each instruction form 0..k.
    let mut control_pos: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    let mut operand_pos: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for e in &graph.edges {
        match e.flow {
            FlowType::Control => control_pos.entry(e.src).or_default().push(e.position),
            FlowType::Data if kind(e.dst) == VertexKind::Instruction => {
                operand_pos.entry(e.dst).or_default().push(e.position)
            }
            _ => {}
        }
    }
    let contiguous = |positions: &mut Vec<u32>| {
        positions.sort_unstable();
        positions.iter().enumerate().all(|(i, &p)| p == i as u32)
    };
    let idx = GraphIndex::new(graph);
    for (v, mut positions) in control_pos {
        if !contiguous(&mut positions) {
            out.push(format!("control positions out of {v} are {positions:?}"));
        }
    }
    for (v, mut positions) in operand_pos {
        if !contiguous(&mut positions) {
            out.push(format!("operand positions into {v} are {positions:?}"));
        }
    }

    for (&f, instrs) in &idx.function_instrs {
        let roots: Vec<u32> = instrs
            .iter()
            .copied()
            .filter(|&i| idx.control_pred[i as usize].is_empty())
            .collect();
        if roots.len() != 1 {
            out.push(format!(
                "function {f} has {} instructions without control predecessors",
                roots.len()
            ));
        }
    }

    // One weakly connected control component per function with a body.
    let defined: BTreeSet<u32> = idx.function_instrs.values().flatten().copied().collect();
    let mut parent: Vec<u32> = (0..n).collect();
    fn find(parent: &mut [u32], x: u32) -> u32 {
        let mut r = x;
        while parent[r as usize] != r {
            r = parent[r as usize];
        }
        let mut c = x;
        while parent[c as usize] != r {
            let next = parent[c as usize];
            parent[c as usize] = r;
            c = next;
        }
        r
    }
    for e in graph.edges.iter().filter(|e| e.flow == FlowType::Control) {
        let (a, b) = (find(&mut parent, e.src), find(&mut parent, e.dst));
        parent[a as usize] = b;
    }
    let components: BTreeSet<u32> = defined.iter().map(|&v| find(&mut parent, v)).collect();
    if components.len() != idx.function_instrs.len() {
        out.push(format!(
            "{} control components for {} functions with bodies",
            components.len(),
            idx.function_instrs.len()
        ));
    }
    out
}
