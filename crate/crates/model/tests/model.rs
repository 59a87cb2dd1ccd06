use std::collections::HashMap;

use flowgnn_core::analysis::TaskId;
use flowgnn_core::dataset::{generate_examples, AnalysisExample};
use flowgnn_core::graph::{build_graph, FlowType, GraphEdge, GraphVertex, ProgramGraph, VertexKind};
use flowgnn_core::ir::parse_module;
use flowgnn_core::synth::{synth_corpus, SynthConfig};
use flowgnn_core::vocab::{derive_vocab, Vocabulary};
use flowgnn_model::*;
use flowgnn_tensor::{grad_check, Tape, Tensor};

fn small_config() -> ModelConfig {
    ModelConfig {
        d_embed: 6,
        t_train: 2,
        ..ModelConfig::default()
    }
}

fn vertex(id: u32, key: &str) -> GraphVertex {
    GraphVertex {
        id,
        kind: VertexKind::Instruction,
        text_key: key.into(),
        function: Some(0),
        qualifier: None,
    }
}

fn edge(src: u32, dst: u32, flow: FlowType, position: u32) -> GraphEdge {
    GraphEdge {
        src,
        dst,
        flow,
        position,
    }
}

fn example(g: &ProgramGraph, root: u32, labels: Vec<bool>) -> AnalysisExample {
    AnalysisExample {
        source_id: g.source_id.clone(),
        task: TaskId::Reachability,
        root,
        labels,
        step_count: 0,
    }
}

fn run(params: &ModelParams, batch: &EncodedBatch, steps: usize) -> (Tensor, Tensor, Tensor) {
    let mut tape = Tape::new();
    let pv = ParamVars::register(&mut tape, params, false).unwrap();
    let out = forward(&mut tape, &pv, batch, steps).unwrap();
    (
        tape.value(out.h0).clone(),
        tape.value(out.ht).clone(),
        tape.value(out.scores).clone(),
    )
}

fn random_graphs(n: usize, seed: u64) -> Vec<ProgramGraph> {
    let cfg = SynthConfig {
        max_functions: 1,
        max_instructions: 6,
        ..SynthConfig::default()
    };
    synth_corpus(seed, n, &cfg, "r")
        .iter()
        .map(|m| build_graph(m).unwrap())
        .collect()
}

#[test]
fn sinusoid_examples() {
    assert_eq!(sinusoidal_embedding(0, 6).unwrap(), vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    assert!(matches!(sinusoidal_embedding(1, 5), Err(ModelError::OddDimension(5))));
    let a = sinusoidal_embedding(1, 34).unwrap();
    assert_ne!(a, sinusoidal_embedding(0, 34).unwrap());
    for p in [0, 1, 7, 1000, u32::MAX] {
        assert!(sinusoidal_embedding(p, 34)
            .unwrap()
            .iter()
            .all(|x| (-1.0..=1.0).contains(x)));
    }
    assert!((a[0] - 1f64.sin()).abs() < 1e-15);
    assert!((a[3] - (1.0 / 10000f64.powf(2.0 / 34.0)).cos()).abs() < 1e-15);
}

#[test]
fn message_examples() {
    let cfg = small_config();
    let mut p = ModelParams::init(3, &cfg, 1);
    let d = cfg.d();
    let h: Vec<f64> = (0..d).map(|i| 0.1 * i as f64 - 0.3).collect();
    p.b_type = Tensor::matrix(6, d, (0..6 * d).map(|i| i as f64 * 0.01).collect()).unwrap();

    // Generic gate: positions 0 and 1 produce different messages.
    assert_ne!(message(&p, &h, 1, 0).unwrap(), message(&p, &h, 1, 1).unwrap());

    // h = 0 leaves only the bias.
    let m = message(&p, &vec![0.0; d], 2, 5).unwrap();
    assert_eq!(m, p.b_type.row(2).to_vec());

    // W_p = 0, b_p = 0 opens every gate fully: message = h·W_t + b_t.
    p.w_pos = Tensor::zeros(&[d, d]);
    let m = message(&p, &h, 4, 3).unwrap();
    for j in 0..d {
        let expect: f64 = (0..d).map(|i| h[i] * p.w_type[4].row(i)[j]).sum::<f64>() + p.b_type.row(4)[j];
        assert!((m[j] - expect).abs() < 1e-12);
    }
}

fn two_vertex_graph() -> ProgramGraph {
    ProgramGraph {
        source_id: "pair".into(),
        vertices: vec![vertex(0, "a"), vertex(1, "b")],
        edges: vec![edge(0, 1, FlowType::Control, 0)],
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `x · W + b` for a row vector.
fn affine(x: &[f64], w: &Tensor, b: &[f64]) -> Vec<f64> {
    (0..w.cols())
        .map(|j| b[j] + x.iter().enumerate().map(|(i, xi)| xi * w.row(i)[j]).sum::<f64>())
        .collect()
}

#[test]
fn two_vertex_step_matches_manual_arithmetic() {
    let cfg = small_config();
    let d = cfg.d();
    let g = two_vertex_graph();
    let vocab = derive_vocab(std::slice::from_ref(&g));
    let mut p = ModelParams::init(vocab.size(), &cfg, 7);
    p.b_type = Tensor::matrix(6, d, (0..6 * d).map(|i| (i as f64 * 0.37).sin() * 0.1).collect()).unwrap();
    p.gru_bi = Tensor::vector((0..3 * d).map(|i| (i as f64).cos() * 0.05).collect());
    p.b_pos = Tensor::vector((0..d).map(|i| i as f64 * 0.02).collect());
    let ex = example(&g, 0, vec![true, true]);
    let batch = encode_batch(&[(&ex, &g)], &vocab, MaskMode::Kind);
    let (h0, h1, scores) = run(&p, &batch, 1);

    // Initial states: embedding row plus selector.
    let mut init = Vec::new();
    for (v, sel) in [(0usize, [1.0, 0.0]), (1, [0.0, 1.0])] {
        let mut row = p.embedding.row(vocab.lookup(&g.vertices[v].text_key)).to_vec();
        row.extend(sel);
        assert_eq!(h0.row(v), row.as_slice());
        init.push(row);
    }

    let pos = sinusoidal_embedding(0, d).unwrap();
    let gate: Vec<f64> = affine(&pos, &p.w_pos, p.b_pos.data())
        .iter()
        .map(|&z| 2.0 * sigmoid(z))
        .collect();
    let msg = |from: &[f64], t: usize| {
        let gated: Vec<f64> = from.iter().zip(&gate).map(|(a, b)| a * b).collect();
        affine(&gated, &p.w_type[t], p.b_type.row(t))
    };
    // Vertex 1 hears vertex 0 forward (type 0); vertex 0 hears 1 backward (type 3).
    let aggregates = [msg(&init[1], 3), msg(&init[0], 0)];
    for v in 0..2 {
        let x = &aggregates[v];
        let h = &init[v];
        let gi = affine(x, &p.gru_wi, p.gru_bi.data());
        let gh = affine(h, &p.gru_wh, p.gru_bh.data());
        for j in 0..d {
            let r = sigmoid(gi[j] + gh[j]);
            let z = sigmoid(gi[d + j] + gh[d + j]);
            let n = (gi[2 * d + j] + r * gh[2 * d + j]).tanh();
            let expect = (1.0 - z) * n + z * h[j];
            assert!((h1.row(v)[j] - expect).abs() < 1e-12, "vertex {v} slot {j}");
        }
        let mut both = h1.row(v).to_vec();
        both.extend_from_slice(h0.row(v));
        let f = affine(&both, &p.f_w, p.f_b.data());
        let gv = affine(h1.row(v), &p.g_w, p.g_b.data());
        for c in 0..2 {
            assert!((scores.row(v)[c] - sigmoid(f[c]) * gv[c]).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_steps_is_identity_and_isolated_vertices_see_zero_input() {
    let cfg = small_config();
    let g = ProgramGraph {
        source_id: "lone".into(),
        vertices: vec![vertex(0, "ret")],
        edges: vec![],
    };
    let vocab = derive_vocab(std::slice::from_ref(&g));
    let p = ModelParams::init(vocab.size(), &cfg, 3);
    let ex = example(&g, 0, vec![true]);
    let batch = encode_batch(&[(&ex, &g)], &vocab, MaskMode::Kind);
    let (h0, ht, _) = run(&p, &batch, 0);
    assert_eq!(h0, ht);

    // One step with zero input: h' = (1 − z) n + z h with gates from b_i and h.
    let (_, h1, _) = run(&p, &batch, 1);
    let d = cfg.d();
    let h = h0.row(0);
    let gh = affine(h, &p.gru_wh, p.gru_bh.data());
    let gi = p.gru_bi.data();
    for j in 0..d {
        let r = sigmoid(gi[j] + gh[j]);
        let z = sigmoid(gi[d + j] + gh[d + j]);
        let n = (gi[2 * d + j] + r * gh[2 * d + j]).tanh();
        assert!((h1.row(0)[j] - ((1.0 - z) * n + z * h[j])).abs() < 1e-12);
    }
}

#[test]
fn readout_examples() {
    let cfg = small_config();
    let d = cfg.d();
    let mut p = ModelParams::init(2, &cfg, 4);
    let mut tape = Tape::new();
    p.g_w = Tensor::zeros(&[d, 2]);
    let pv = ParamVars::register(&mut tape, &p, false).unwrap();
    let h = tape.constant(Tensor::full(&[3, d], 0.4)).unwrap();
    let r = readout(&mut tape, &pv, h, h).unwrap();
    assert!(tape.value(r).data().iter().all(|&x| x == 0.0));

    let mut p = ModelParams::init(2, &cfg, 4);
    p.f_b = Tensor::vector(vec![-700.0, -700.0]);
    p.g_b = Tensor::vector(vec![3.0, -2.0]);
    let mut tape = Tape::new();
    let pv = ParamVars::register(&mut tape, &p, false).unwrap();
    let h = tape.constant(Tensor::full(&[1, d], 0.1)).unwrap();
    let r = readout(&mut tape, &pv, h, h).unwrap();
    assert!(tape.value(r).max_abs() < 1e-250);
}

#[test]
fn batch_layout() {
    let g1 = two_vertex_graph();
    let mut g2 = two_vertex_graph();
    g2.source_id = "other".into();
    g2.vertices.extend([vertex(2, "a"), vertex(3, "c")]);
    g2.edges.push(edge(2, 3, FlowType::Data, 1));
    let mut g1b = g1.clone();
    g1b.vertices.extend([vertex(2, "b"), vertex(3, "b")]);
    let vocab = derive_vocab(&[g1b.clone(), g2.clone()]);
    let e1 = example(&g1b, 2, vec![false; 4]);
    let e2 = example(&g2, 0, vec![false; 4]);
    let b = encode_batch(&[(&e1, &g1b), (&e2, &g2)], &vocab, MaskMode::Kind);
    assert_eq!(b.num_vertices, 8);
    assert_eq!(b.ranges, vec![0..4, 4..8]);
    for e in &b.edges {
        for (&s, &t) in e.src.iter().zip(e.dst.iter()) {
            assert_eq!(s < 4, t < 4, "edge crosses examples");
        }
    }
    // Every stored edge appears forward and reversed, with its position.
    assert_eq!(b.edges[0].src.to_vec(), vec![0, 4]);
    assert_eq!(b.edges[3].src.to_vec(), vec![1, 5]);
    assert_eq!(b.edges[4].src.to_vec(), vec![7]);
    assert_eq!(b.edges[4].dst.to_vec(), vec![6]);
    assert_eq!(b.edges[4].positions, vec![1]);

    let single = encode_batch(&[(&e1, &g1b)], &vocab, MaskMode::Kind);
    assert_eq!(single.ranges, vec![0..4]);

    // Root and non-root with the same key differ only in the selector.
    let p = ModelParams::init(vocab.size(), &small_config(), 2);
    let (h0, _, _) = run(&p, &single, 0);
    let (root, other) = (h0.row(2), h0.row(3));
    let d = small_config().d();
    assert_eq!(root[..d - 2], other[..d - 2]);
    assert_eq!(&root[d - 2..], &[1.0, 0.0]);
    assert_eq!(&other[d - 2..], &[0.0, 1.0]);
}

fn random_batch(seed: u64) -> (Vec<ProgramGraph>, Vec<AnalysisExample>, Vocabulary) {
    let graphs = random_graphs(2, seed);
    let mut ex = generate_examples(&graphs, TaskId::DataDep, seed);
    ex.truncate(2);
    let vocab = derive_vocab(&graphs);
    (graphs, ex, vocab)
}

#[test]
fn full_model_gradient_check() {
    let cfg = small_config();
    for (seed, steps) in [(1u64, 1usize), (2, 2), (3, 3)] {
        let (graphs, ex, vocab) = random_batch(seed);
        let store: HashMap<_, _> = graphs.iter().map(|g| (g.source_id.clone(), g)).collect();
        let pairs: Vec<_> = ex.iter().map(|e| (e, store[e.source_id.as_str()])).collect();
        let batch = encode_batch(&pairs, &vocab, MaskMode::All);
        let mut p = ModelParams::init(vocab.size(), &cfg, seed);
        // Non-zero biases so their gradients are exercised.
        p.b_type = p.b_type.map(|_| 0.05);
        p.gru_bi = p.gru_bi.map(|_| -0.03);
        p.gru_bh = p.gru_bh.map(|_| 0.02);
        p.b_pos = p.b_pos.map(|_| 0.1);
        let report = grad_check(
            |tape, vars| {
                let pv = ParamVars { vars: vars.to_vec() };
                let out = forward(tape, &pv, &batch, steps).map_err(|e| match e {
                    ModelError::Tensor(t) => t,
                    other => panic!("{other}"),
                })?;
                tape.softmax_cross_entropy(out.scores, batch.labels.clone(), batch.mask.clone())
            },
            &p.to_vec(),
            1e-5,
            Some(12),
        )
        .unwrap();
        assert!(report.max_relative_error < 1e-4, "T={steps}: {report:?}");
    }
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
    #[test]
    fn permutation_equivariance(seed in 0u64..10_000, shuffle in proptest::collection::vec(0usize..1000, 64)) {
        let g = &random_graphs(1, seed)[0];
        let vocab = derive_vocab(std::slice::from_ref(g));
        let p = ModelParams::init(vocab.size(), &small_config(), seed);
        let n = g.num_vertices();
        let mut order: Vec<u32> = (0..n as u32).collect();
        for i in (1..n).rev() {
            order.swap(i, shuffle[i % shuffle.len()] % (i + 1));
        }
        // Vertex v moves to order[v].
        let mut pg = g.clone();
        for v in &mut pg.vertices {
            v.id = order[v.id as usize];
        }
        pg.vertices.sort_by_key(|v| v.id);
        for e in &mut pg.edges {
            e.src = order[e.src as usize];
            e.dst = order[e.dst as usize];
        }
        let root = (seed as usize % n) as u32;
        let ex = example(g, root, vec![false; n]);
        let pex = example(&pg, order[root as usize], vec![false; n]);
        let (_, _, s) = run(&p, &encode_batch(&[(&ex, g)], &vocab, MaskMode::All), 3);
        let (_, _, ps) = run(&p, &encode_batch(&[(&pex, &pg)], &vocab, MaskMode::All), 3);
        for v in 0..n {
            for c in 0..2 {
                proptest::prop_assert!((s.row(v)[c] - ps.row(order[v] as usize)[c]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn swapping_operand_positions_changes_state() {
    // One operand has a producer so the two operand states differ.
    let src = "define i32 @f(i32 %a) {\n  %y = add i32 %a, 1\n  %x = sdiv i32 %y, %a\n  ret i32 %x\n}";
    let g = build_graph(&parse_module(src, "div").unwrap()).unwrap();
    let mut swapped = g.clone();
    let div = g.vertices.iter().position(|v| v.text_key == "sdiv").unwrap() as u32;
    assert_eq!(
        g.edges
            .iter()
            .filter(|e| e.flow == FlowType::Data && e.dst == div)
            .count(),
        2
    );
    for e in &mut swapped.edges {
        if e.flow == FlowType::Data && e.dst == div {
            e.position = 1 - e.position;
        }
    }
    let vocab = derive_vocab(std::slice::from_ref(&g));
    let p = ModelParams::init(vocab.size(), &small_config(), 11);
    let ex = example(&g, 1, vec![false; g.num_vertices()]);
    let (_, a, _) = run(&p, &encode_batch(&[(&ex, &g)], &vocab, MaskMode::All), 2);
    let (_, b, _) = run(&p, &encode_batch(&[(&ex, &swapped)], &vocab, MaskMode::All), 2);
    assert_ne!(a.row(div as usize), b.row(div as usize));
}

#[test]
fn batching_does_not_change_scores() {
    let graphs = random_graphs(4, 21);
    let vocab = derive_vocab(&graphs);
    let p = ModelParams::init(vocab.size(), &small_config(), 1);
    let ex = generate_examples(&graphs, TaskId::Liveness, 1);
    let store: HashMap<_, _> = graphs.iter().map(|g| (g.source_id.clone(), g)).collect();
    let pairs: Vec<_> = ex.iter().map(|e| (e, store[e.source_id.as_str()])).collect();
    let batch = encode_batch(&pairs, &vocab, MaskMode::Kind);
    let (_, _, together) = run(&p, &batch, 3);
    for (k, pair) in pairs.iter().enumerate() {
        let (_, _, alone) = run(&p, &encode_batch(std::slice::from_ref(pair), &vocab, MaskMode::Kind), 3);
        let r = &batch.ranges[k];
        assert_eq!(&together.data()[r.start * 2..r.end * 2], alone.data());
    }
}

#[test]
fn without_backward_edges_successors_are_invisible() {
    // Chain 0 → 1 → 2 of control edges; vary the key of vertex 2.
    let chain = |last: &str| ProgramGraph {
        source_id: "chain".into(),
        vertices: vec![vertex(0, "a"), vertex(1, "b"), vertex(2, last)],
        edges: vec![edge(0, 1, FlowType::Control, 0), edge(1, 2, FlowType::Control, 0)],
    };
    let (g1, g2) = (chain("c"), chain("d"));
    let vocab = derive_vocab(&[g1.clone(), g2.clone()]);
    let p = ModelParams::init(vocab.size(), &small_config(), 5);
    let ex = example(&g1, 0, vec![false; 3]);
    let state_of_first = |g: &ProgramGraph, backward: bool| {
        let mut b = encode_batch(&[(&ex, g)], &vocab, MaskMode::All);
        if !backward {
            b = b.without_backward_edges();
        }
        let (_, h, _) = run(&p, &b, 4);
        h.row(0).to_vec()
    };
    assert_eq!(state_of_first(&g1, false), state_of_first(&g2, false));
    assert_ne!(state_of_first(&g1, true), state_of_first(&g2, true));
}

#[test]
fn checkpoint_round_trip() {
    let p = ModelParams::init(5, &ModelConfig::default(), 1);
    let mut buf = Vec::new();
    p.save(&mut buf).unwrap();
    assert_eq!(ModelParams::load(&buf[..]).unwrap(), p);
    let names = ModelParams::names();
    assert_eq!(names.len(), p.tensors().len());
    assert_eq!(p.d(), 34);
}

#[test]
fn training_is_deterministic_and_zero_steps_returns_init() {
    let graphs = random_graphs(12, 8);
    let vocab = derive_vocab(&graphs);
    let store: GraphStore = graphs.iter().map(|g| (g.source_id.clone(), g.clone())).collect();
    let ex = generate_examples(&graphs, TaskId::Reachability, 4);
    let (tr, va) = ex.split_at(ex.len() * 3 / 4);
    let cfg = ModelConfig {
        d_embed: 8,
        t_train: 2,
        batch_vertices: 60,
        validate_every: 10,
        epochs: 2,
        learning_rate: 1e-3,
        ..ModelConfig::default()
    };
    let a = train(tr, va, &store, &vocab, &cfg).unwrap();
    let b = train(tr, va, &store, &vocab, &cfg).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.params, b.params);
    assert!(a.steps > 0);
    // Best-so-far validation F1 never decreases.
    let mut best = f64::MIN;
    for h in a.history.iter().filter(|h| h.split == "val") {
        best = best.max(h.f1);
    }
    assert_eq!(a.best_f1, Some(best));

    let none = train(
        tr,
        va,
        &store,
        &vocab,
        &ModelConfig {
            max_train_examples: Some(0),
            ..cfg.clone()
        },
    )
    .unwrap();
    assert_eq!(none.steps, 0);
    assert_eq!(
        none.params,
        ModelParams::init(vocab.size(), &cfg, flowgnn_core::rng::derive_seed(cfg.seed, "init"))
    );
}

#[test]
fn perfect_predictions_score_one() {
    let graphs = random_graphs(3, 2);
    let vocab = derive_vocab(&graphs);
    let store: GraphStore = graphs.iter().map(|g| (g.source_id.clone(), g.clone())).collect();
    let ex = generate_examples(&graphs, TaskId::Reachability, 1);
    // A readout that always says "positive" is perfect when every label is positive.
    let all_pos: Vec<AnalysisExample> = ex
        .iter()
        .map(|e| AnalysisExample {
            labels: vec![true; e.labels.len()],
            ..e.clone()
        })
        .collect();
    let cfg = small_config();
    let mut p = ModelParams::init(vocab.size(), &cfg, 1);
    p.g_w = Tensor::zeros(&[cfg.d(), 2]);
    p.g_b = Tensor::vector(vec![-1.0, 1.0]);
    let m = evaluate(&p, &all_pos, &store, &vocab, 2, MaskMode::Kind).unwrap();
    assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
    assert!(matches!(
        evaluate(&p, &all_pos, &GraphStore::new(), &vocab, 2, MaskMode::Kind),
        Err(ModelError::MissingGraph(_))
    ));
}

#[test]
fn packaged_gradient_check_covers_every_task() {
    for seed in 0..5 {
        let r = check_model_gradients(seed, 1 + seed as usize % 3, Some(6)).unwrap();
        assert!(r.max_relative_error < 1e-4, "seed {seed}: {r:?}");
        assert_eq!(r.per_input.len(), ModelParams::names().len());
    }
}

#[test]
fn tape_free_inference_matches_forward_exactly() {
    let graphs = random_graphs(3, 31);
    let vocab = derive_vocab(&graphs);
    let p = ModelParams::init(vocab.size(), &small_config(), 6);
    let ex = generate_examples(&graphs, TaskId::Dominance, 2);
    let store: HashMap<_, _> = graphs.iter().map(|g| (g.source_id.clone(), g)).collect();
    let pairs: Vec<_> = ex.iter().map(|e| (e, store[e.source_id.as_str()])).collect();
    let batch = encode_batch(&pairs, &vocab, MaskMode::Kind);
    for steps in [0, 1, 5] {
        let (h0, ht, scores) = run(&p, &batch, steps);
        let v = forward_values(&p, &batch, steps).unwrap();
        assert_eq!((v.h0, v.ht, v.scores), (h0, ht, scores));
    }
}
