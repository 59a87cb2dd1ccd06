use std::collections::BTreeSet;

use flowgnn_core::graph::{
    build_graph, build_stage, graph_stats, invariant_violations, to_dot, FlowType, GraphEdge, ProgramGraph, Stage,
    VertexKind,
};
use flowgnn_core::ir::parse_module;

fn fixture(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn build(name: &str) -> ProgramGraph {
    let m = parse_module(&fixture(&format!("{name}.ll")), name).unwrap();
    build_graph(&m).unwrap()
}

/// Renders a graph in the golden-file line format.
fn golden_lines(g: &ProgramGraph) -> Vec<String> {
    let mut out = Vec::new();
    for v in &g.vertices {
        let kind = match v.kind {
            VertexKind::Instruction => "instruction",
            VertexKind::Variable => "variable",
            VertexKind::Constant => "constant",
        };
        let f = v.function.map_or("-".to_string(), |f| f.to_string());
        out.push(format!("v {} {kind} {} {f}", v.id, v.text_key));
    }
    for e in &g.edges {
        out.push(format!("e {} {} {} {}", e.flow.as_str(), e.src, e.dst, e.position));
    }
    out
}

fn read_golden(name: &str) -> Vec<String> {
    fixture(&format!("{name}.golden"))
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.trim().to_string())
        .collect()
}

#[test]
fn golden_fixtures_match_exactly() {
    for name in ["two_instr", "fib", "extern_calls"] {
        assert_eq!(golden_lines(&build(name)), read_golden(name), "fixture {name}");
    }
}

#[test]
fn fixtures_satisfy_edge_invariants() {
    for name in ["two_instr", "fib", "extern_calls", "switch3"] {
        let g = build(name);
        assert_eq!(invariant_violations(&g), Vec::<String>::new(), "fixture {name}");
    }
}

#[test]
fn single_return_function() {
    let g = build_graph(&parse_module("define internal void @f() { ret void }", "t").unwrap()).unwrap();
    assert_eq!(g.vertices.len(), 1);
    assert_eq!(g.vertices[0].text_key, "ret");
    assert!(g.edges.is_empty());

    // Externally visible: only the external call-site wiring is added.
    let g = build_graph(&parse_module("define void @f() { ret void }", "t").unwrap()).unwrap();
    assert_eq!(g.vertices.len(), 2);
    assert_eq!(g.vertices[1].text_key, "<external>");
    assert_eq!(
        g.edges,
        vec![
            GraphEdge {
                src: 1,
                dst: 0,
                flow: FlowType::Call,
                position: 0
            },
            GraphEdge {
                src: 0,
                dst: 1,
                flow: FlowType::Call,
                position: 0
            },
        ]
    );
}

#[test]
fn one_dummy_per_external_callee() {
    let g = build("extern_calls");
    let dummies: Vec<_> = g
        .vertices
        .iter()
        .filter(|v| v.text_key == "<undefined-function>")
        .collect();
    assert_eq!(dummies.len(), 1);
    let d = dummies[0].id;
    let into = g
        .edges
        .iter()
        .filter(|e| e.flow == FlowType::Call && e.dst == d)
        .count();
    let out = g
        .edges
        .iter()
        .filter(|e| e.flow == FlowType::Call && e.src == d)
        .count();
    assert_eq!((into, out), (2, 2));
}

#[test]
fn stages_compose_to_the_full_graph() {
    for name in ["two_instr", "fib", "extern_calls", "switch3"] {
        let m = parse_module(&fixture(&format!("{name}.ll")), name).unwrap();
        let full = build_graph(&m).unwrap();
        let mut union = Vec::new();
        for stage in [Stage::Control, Stage::Data, Stage::Call] {
            let part = build_stage(&m, stage).unwrap();
            assert_eq!(part.vertices, full.vertices);
            union.extend(part.edges);
        }
        assert_eq!(union, full.edges);
    }
}

#[test]
fn stats_of_fixtures() {
    let s = graph_stats(&ProgramGraph::default());
    assert_eq!((s.vertex_count, s.edge_count, s.max_position), (0, 0, 0));
    assert!(s.vertices_by_kind.values().all(|&c| c == 0));

    let s = graph_stats(&build("two_instr"));
    assert_eq!((s.vertex_count, s.edge_count, s.max_position), (5, 5, 1));
    assert_eq!(s.vertices_by_kind[&VertexKind::Instruction], 2);
    assert_eq!(s.vertices_by_kind[&VertexKind::Variable], 2);
    assert_eq!(s.vertices_by_kind[&VertexKind::Constant], 1);

    let s = graph_stats(&build("switch3"));
    assert_eq!(s.max_position_by_flow[&FlowType::Control], 2);
}

#[test]
fn function_count_equals_control_components() {
    let text = "\
define internal i32 @a(i32 %x) {
  %y = call i32 @b(i32 %x)
  ret i32 %y
}
define internal i32 @b(i32 %x) {
  %c = icmp sgt i32 %x, 0
  br i1 %c, label %t, label %e
t:
  ret i32 %x
e:
  ret i32 0
}
";
    let g = build_graph(&parse_module(text, "t").unwrap()).unwrap();
    assert!(invariant_violations(&g).is_empty());
    let functions: BTreeSet<u32> = g
        .vertices
        .iter()
        .filter(|v| v.kind == VertexKind::Instruction)
        .filter_map(|v| v.function)
        .collect();
    assert_eq!(functions.len(), 2);
}

/// Minimal line grammar for the DOT subset we emit.
fn is_valid_dot(text: &str) -> bool {
    let lines: Vec<&str> = text.lines().collect();
    if lines.first() != Some(&"digraph {") || lines.last() != Some(&"}") {
        return false;
    }
    let quoted =
        |s: &str| s.starts_with('"') && s.ends_with('"') && !s[1..s.len() - 1].replace("\\\"", "").contains('"');
    lines[1..lines.len() - 1].iter().all(|l| {
        let l = l.trim();
        if let Some(rest) = l.strip_prefix("label=") {
            return rest.strip_suffix(';').is_some_and(quoted);
        }
        let Some(body) = l.strip_suffix("];") else { return false };
        let Some((head, attrs)) = body.split_once(" [") else {
            return false;
        };
        let node_ok = |n: &str| {
            n.strip_prefix('n')
                .is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
        };
        let head_ok = match head.split_once(" -> ") {
            Some((a, b)) => node_ok(a) && node_ok(b),
            None => node_ok(head),
        };
        head_ok
            && attrs.split(", ").all(|kv| {
                kv.split_once('=')
                    .is_some_and(|(k, v)| !k.is_empty() && (quoted(v) || v.bytes().all(|b| b.is_ascii_alphanumeric())))
            })
    })
}

#[test]
fn dot_export() {
    assert_eq!(to_dot(&ProgramGraph::default()), "digraph {\n}\n");
    let g = build("two_instr");
    let dot = to_dot(&g);
    assert!(is_valid_dot(&dot), "{dot}");
    assert_eq!(dot.matches("shape=").count(), 5);
    assert_eq!(dot.matches(" -> ").count(), 5);
    assert!(dot.contains("shape=diamond"));
    assert!(dot.contains("shape=ellipse"));
    assert!(dot.contains("label=\"data:1\""));
    for name in ["fib", "extern_calls", "switch3"] {
        assert!(is_valid_dot(&to_dot(&build(name))));
    }
}
