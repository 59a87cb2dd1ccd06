use std::fmt::Write;

use super::{FlowType, ProgramGraph, VertexKind};

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Renders a graph in Graphviz DOT: instructions as boxes, variables as
/// ellipses, constants as diamonds. Edge labels read `flow:position`.
pub fn to_dot(graph: &ProgramGraph) -> String {
    let mut out = String::from("digraph {\n");
    if !graph.source_id.is_empty() {
        let _ = writeln!(out, "  label=\"{}\";", escape(&graph.source_id));
    }
    for v in &graph.vertices {
        let shape = match v.kind {
            VertexKind::Instruction => "box",
            VertexKind::Variable => "ellipse",
            VertexKind::Constant => "diamond",
        };
        let label = match &v.qualifier {
            Some(q) => format!("{} {}", v.text_key, q),
            None => v.text_key.clone(),
        };
        let _ = writeln!(out, "  n{} [label=\"{}\", shape={shape}];", v.id, escape(&label));
    }
    for e in &graph.edges {
        let color = match e.flow {
            FlowType::Control => "blue",
            FlowType::Data => "red",
            FlowType::Call => "darkgreen",
        };
        let _ = writeln!(
            out,
            "  n{} -> n{} [label=\"{}:{}\", color={color}];",
            e.src,
            e.dst,
            e.flow.as_str(),
            e.position
        );
    }
    out.push_str("}\n");
    out
}
