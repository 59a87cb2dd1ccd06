use flowgnn_core::analysis::{brute_force_oracle, run_oracle_with, valid_roots, OracleOptions, TaskId};
use flowgnn_core::graph::{build_graph, GraphIndex, ProgramGraph};
use flowgnn_core::synth::{synth_module, SynthConfig};
use proptest::prelude::*;

fn random_graph(seed: u64) -> ProgramGraph {
    build_graph(&synth_module(seed, &SynthConfig::default(), "p")).unwrap()
}

/// Is `v` on a def-use cycle, i.e. among its own transitive producers?
fn on_def_use_cycle(index: &GraphIndex, v: u32) -> bool {
    let mut seen = vec![false; index.operands.len()];
    let mut stack = vec![v];
    while let Some(n) = stack.pop() {
        for &(_, o) in &index.operands[n as usize] {
            for &p in &index.definers[o as usize] {
                if p == v {
                    return true;
                }
                if !std::mem::replace(&mut seen[p as usize], true) {
                    stack.push(p);
                }
            }
        }
    }
    false
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fixed_point_matches_brute_force(seed in any::<u64>()) {
        let g = random_graph(seed);
        let index = GraphIndex::new(&g);
        for task in TaskId::ALL {
            for root in valid_roots(task, &g, &index) {
                let r = run_oracle_with(task, &g, &index, root, OracleOptions::default()).unwrap();
                prop_assert_eq!(&r.labels, &brute_force_oracle(task, &g, root).unwrap(), "{} {}", task, root);
            }
        }
    }

    #[test]
    fn labels_respect_target_kind_and_inclusion(seed in any::<u64>()) {
        let g = random_graph(seed);
        let index = GraphIndex::new(&g);
        for task in TaskId::ALL {
            for root in valid_roots(task, &g, &index) {
                let r = run_oracle_with(task, &g, &index, root, OracleOptions::default()).unwrap();
                prop_assert_eq!(r.labels.len(), g.num_vertices());
                prop_assert!(r.step_count as usize <= g.num_vertices());
                for v in r.positives() {
                    prop_assert_eq!(g.vertex(v).kind, task.target_kind());
                }
                match task {
                    TaskId::DataDep => prop_assert_eq!(r.labels[root as usize], on_def_use_cycle(&index, root)),
                    TaskId::Liveness => {}
                    _ => prop_assert!(r.labels[root as usize]),
                }
            }
        }
    }

    #[test]
    fn entry_dominates_its_function(seed in any::<u64>()) {
        let g = random_graph(seed);
        let index = GraphIndex::new(&g);
        for (f, &entry) in &index.entries {
            let r = run_oracle_with(TaskId::Dominance, &g, &index, entry, OracleOptions::default()).unwrap();
            for &v in &index.function_instrs[f] {
                prop_assert!(r.labels[v as usize]);
            }
        }
    }
}
