use flowgnn_core::analysis::{
    available_expressions, brute_force_oracle, canonical_expression, run_oracle, run_oracle_with, valid_roots,
    AnalysisError, OracleOptions, TaskId, BRUTE_FORCE_VERTEX_LIMIT,
};
use flowgnn_core::graph::{build_graph, GraphIndex, ProgramGraph, VertexKind};
use flowgnn_core::ir::parse_module;

fn graph(src: &str) -> ProgramGraph {
    let module = parse_module(src, "t").expect("fixture parses");
    build_graph(&module).expect("fixture builds")
}

fn positives(g: &ProgramGraph, task: TaskId, root: u32) -> Vec<u32> {
    let fixed = run_oracle(task, g, root).unwrap();
    let brute = brute_force_oracle(task, g, root).unwrap();
    assert_eq!(fixed.labels, brute, "{task} root {root}");
    fixed.positives()
}

fn first_variable(g: &ProgramGraph) -> u32 {
    g.vertices.iter().find(|v| v.kind == VertexKind::Variable).unwrap().id
}

fn result_of(g: &ProgramGraph, instr: u32) -> u32 {
    GraphIndex::new(g).results[instr as usize][0]
}

const CHAIN: &str = "define i32 @f(i32 %x) {
  %a = add i32 %x, 1
  %b = mul i32 %a, 2
  ret i32 %b
}";

const DIAMOND: &str = "define void @f(i1 %c) {
entry:
  br i1 %c, label %l, label %r
l:
  br label %j
r:
  br label %j
j:
  ret void
}";

const DEPS: &str = "define i32 @f(i32 %0) {
  %1 = add i32 %0, 1
  %2 = mul i32 %1, %1
  ret i32 %2
}";

const LOOP: &str = "define i32 @f(i32 %n) {
entry:
  br label %head
head:
  %i = phi i32 [ 0, %entry ], [ %next, %body ]
  %done = icmp sge i32 %i, %n
  br i1 %done, label %exit, label %body
body:
  %sq = mul i32 %i, %i
  %next = add i32 %sq, %i
  br label %head
exit:
  ret i32 %i
}";

#[test]
fn reachability_examples() {
    let g = graph(CHAIN);
    let r = run_oracle(TaskId::Reachability, &g, 0).unwrap();
    assert_eq!(r.positives(), vec![0, 1, 2]);
    assert_eq!(r.step_count, 2);
    let r = run_oracle(TaskId::Reachability, &g, 2).unwrap();
    assert_eq!(r.positives(), vec![2]);
    assert_eq!(r.step_count, 0);
    assert_eq!(positives(&graph(DIAMOND), TaskId::Reachability, 1), vec![1, 3]);
}

#[test]
fn dominance_examples() {
    let g = graph(DIAMOND);
    assert_eq!(positives(&g, TaskId::Dominance, 0), vec![0, 1, 2, 3]);
    assert_eq!(positives(&g, TaskId::Dominance, 1), vec![1]);
    assert_eq!(positives(&graph(CHAIN), TaskId::Dominance, 1), vec![1, 2]);
}

#[test]
fn datadep_examples() {
    let g = graph(DEPS);
    let r = run_oracle(TaskId::DataDep, &g, 2).unwrap();
    assert_eq!(r.positives(), vec![0, 1]);
    assert_eq!(r.step_count, 2);
    assert_eq!(positives(&g, TaskId::DataDep, 1), vec![0]);
    let r = run_oracle(TaskId::DataDep, &g, 0).unwrap();
    assert!(r.positives().is_empty());
    assert_eq!(r.step_count, 0);
}

#[test]
fn liveness_examples() {
    let g = graph("define i32 @f(i32 %0) {\n  %1 = add i32 %0, 1\n  ret i32 %0\n}");
    assert_eq!(positives(&g, TaskId::Liveness, 0), vec![first_variable(&g)]);
    assert!(positives(&g, TaskId::Liveness, 1).is_empty());

    // Instructions: br, phi, icmp, br, mul, add, br, ret.
    let g = graph(LOOP);
    let i = result_of(&g, 1);
    let live = positives(&g, TaskId::Liveness, 4);
    assert!(live.contains(&i), "{live:?}");
    // After the add only the loop bound and the incoming value stay live.
    let live = positives(&g, TaskId::Liveness, 5);
    assert!(!live.contains(&i));
    assert!(live.contains(&result_of(&g, 5)));
    assert!(live.iter().all(|&v| g.vertex(v).kind == VertexKind::Variable));
}

#[test]
fn subexpression_examples() {
    let src = "define i32 @f(i32 %a, i32 %b) {
  %x = add i32 %a, %b
  %y = add i32 %b, %a
  %p = sub i32 %a, %b
  %q = sub i32 %b, %a
  %s = icmp eq i32 %a, %b
  %t = icmp eq i32 %b, %a
  %u = icmp slt i32 %a, %b
  %w = icmp slt i32 %b, %a
  %z = mul i32 %x, %y
  ret i32 %z
}";
    let g = graph(src);
    assert_eq!(positives(&g, TaskId::Subexpressions, 0), vec![0, 1]);
    assert_eq!(positives(&g, TaskId::Subexpressions, 2), vec![2]);
    assert_eq!(positives(&g, TaskId::Subexpressions, 4), vec![4, 5]);
    assert_eq!(positives(&g, TaskId::Subexpressions, 6), vec![6]);
    assert_eq!(positives(&g, TaskId::Subexpressions, 8), vec![8]);
    let r = run_oracle(TaskId::Subexpressions, &g, 0).unwrap();
    assert_eq!(r.step_count, 0);

    let idx = GraphIndex::new(&g);
    let opts = OracleOptions {
        label_subexpression_root: false,
    };
    let r = run_oracle_with(TaskId::Subexpressions, &g, &idx, 0, opts).unwrap();
    assert_eq!(r.positives(), vec![1]);
    let e = canonical_expression(&g, &idx, 1).unwrap();
    assert!(e.operands.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn invalid_roots_are_rejected() {
    let g = graph(CHAIN);
    for task in TaskId::ALL {
        let var = g.vertices.iter().find(|v| v.kind == VertexKind::Variable).unwrap().id;
        assert!(matches!(
            run_oracle(task, &g, var),
            Err(AnalysisError::InvalidRoot { .. })
        ));
        assert!(matches!(
            run_oracle(task, &g, 999),
            Err(AnalysisError::InvalidRoot { .. })
        ));
    }
    assert!(matches!(
        run_oracle(TaskId::Subexpressions, &g, 2),
        Err(AnalysisError::InvalidRoot { .. })
    ));
    let idx = GraphIndex::new(&g);
    assert_eq!(valid_roots(TaskId::Subexpressions, &g, &idx), vec![0, 1]);
    assert_eq!(valid_roots(TaskId::Liveness, &g, &idx), vec![0, 1, 2]);
}

#[test]
fn external_vertices_are_not_roots() {
    let g = graph("declare i32 @g(i32)\ndefine i32 @f(i32 %x) {\n  %a = call i32 @g(i32 %x)\n  ret i32 %a\n}");
    let dummy = g
        .vertices
        .iter()
        .find(|v| v.text_key == "<undefined-function>")
        .unwrap()
        .id;
    assert!(run_oracle(TaskId::Reachability, &g, dummy).is_err());
    assert!(run_oracle(TaskId::Liveness, &g, dummy).is_err());
    let ext = g.vertices.iter().find(|v| v.text_key == "<external>").unwrap().id;
    assert!(run_oracle(TaskId::Dominance, &g, ext).is_err());
}

#[test]
fn single_instruction_function() {
    let g = graph("define internal void @f() {\n  ret void\n}");
    assert_eq!(g.num_vertices(), 1);
    assert_eq!(positives(&g, TaskId::Reachability, 0), vec![0]);
    assert_eq!(positives(&g, TaskId::Dominance, 0), vec![0]);
    assert!(positives(&g, TaskId::DataDep, 0).is_empty());
    assert!(positives(&g, TaskId::Liveness, 0).is_empty());
}

#[test]
fn brute_force_refuses_large_graphs() {
    let mut src = String::from("define i32 @f(i32 %v0) {\n");
    for i in 1..=BRUTE_FORCE_VERTEX_LIMIT {
        src.push_str(&format!("  %v{i} = add i32 %v{}, 1\n", i - 1));
    }
    src.push_str(&format!("  ret i32 %v{BRUTE_FORCE_VERTEX_LIMIT}\n}}"));
    let g = graph(&src);
    assert!(matches!(
        brute_force_oracle(TaskId::Reachability, &g, 0),
        Err(AnalysisError::GraphTooLarge { .. })
    ));
    assert!(run_oracle(TaskId::Reachability, &g, 0).is_ok());
}

#[test]
fn available_expressions_agree_with_grouping() {
    let src = "define i32 @f(i32 %a, i32 %b) {
  %x = add i32 %a, %b
  %m = mul i32 %x, 3
  %y = add i32 %b, %a
  %z = add i32 %m, %y
  ret i32 %z
}";
    let g = graph(src);
    let idx = GraphIndex::new(&g);
    let avail = available_expressions(&g, 0).unwrap();
    let root_expr = canonical_expression(&g, &idx, 0).unwrap();
    let labels = run_oracle(TaskId::Subexpressions, &g, 0).unwrap();
    for m in labels.positives() {
        let preds = &idx.control_pred[m as usize];
        if m != 0 {
            // Recomputation of an expression that is already available.
            assert!(preds.iter().all(|p| avail.avail[p].contains(&root_expr)));
        }
    }
    assert_eq!(labels.positives(), vec![0, 2]);
    assert!(available_expressions(&g, 7).is_none());
}
