use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{FlowType, ProgramGraph, VertexKind};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GraphStats {
    pub vertex_count: usize,
    pub edge_count: usize,
    pub max_position: u32,
    pub vertices_by_kind: BTreeMap<VertexKind, usize>,
    pub edges_by_flow: BTreeMap<FlowType, usize>,
    pub max_position_by_flow: BTreeMap<FlowType, u32>,
}

pub fn graph_stats(graph: &ProgramGraph) -> GraphStats {
    let mut s = GraphStats {
        vertex_count: graph.vertices.len(),
        edge_count: graph.edges.len(),
        ..GraphStats::default()
    };
    for kind in [VertexKind::Instruction, VertexKind::Variable, VertexKind::Constant] {
        s.vertices_by_kind.insert(kind, 0);
    }
    for flow in FlowType::ALL {
        s.edges_by_flow.insert(flow, 0);
        s.max_position_by_flow.insert(flow, 0);
    }
    for v in &graph.vertices {
        *s.vertices_by_kind.entry(v.kind).or_default() += 1;
    }
    for e in &graph.edges {
        *s.edges_by_flow.entry(e.flow).or_default() += 1;
        let m = s.max_position_by_flow.entry(e.flow).or_default();
        *m = (*m).max(e.position);
        s.max_position = s.max_position.max(e.position);
    }
    s
}
