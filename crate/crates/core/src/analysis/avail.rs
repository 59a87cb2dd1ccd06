use std::collections::{BTreeMap, BTreeSet};

use super::expr::canonical_expression;
use super::CanonicalExpression;
use crate::graph::{GraphIndex, ProgramGraph};

/// Per-instruction available expressions of one function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AvailableExpressions {
    pub avail: BTreeMap<u32, BTreeSet<CanonicalExpression>>,
    pub step_count: u32,
}

/// Classical available-expressions analysis over the instructions of
/// `function`:
/// `Avail(n) = uses(n) ∪ (⋂_{p ∈ pred(n)} Avail(p)) − defs(n)`, where
/// `uses(n)` is the expression `n` computes and `defs(n)` the expressions
/// reading a value `n` defines.
///
/// Returns `None` if the function has no body in the graph.
pub fn available_expressions(graph: &ProgramGraph, function: u32) -> Option<AvailableExpressions> {
    let index = GraphIndex::new(graph);
    let instrs = index.function_instrs.get(&function)?;
    let entry = index.entries.get(&function).copied();

    let exprs: BTreeMap<u32, Option<CanonicalExpression>> = instrs
        .iter()
        .map(|&v| (v, canonical_expression(graph, &index, v)))
        .collect();
    let universe: BTreeSet<CanonicalExpression> = exprs.values().flatten().cloned().collect();
    let killed = |n: u32| -> BTreeSet<CanonicalExpression> {
        let defined = &index.results[n as usize];
        universe
            .iter()
            .filter(|e| e.operands.iter().any(|o| defined.contains(o)))
            .cloned()
            .collect()
    };

    let mut avail: BTreeMap<u32, BTreeSet<CanonicalExpression>> = instrs
        .iter()
        .map(|&v| {
            (
                v,
                if Some(v) == entry {
                    BTreeSet::new()
                } else {
                    universe.clone()
                },
            )
        })
        .collect();
    let mut steps = 0;
    loop {
        let mut next = BTreeMap::new();
        for &n in instrs {
            let preds = &index.control_pred[n as usize];
            let mut inter: BTreeSet<CanonicalExpression> = match preds.first() {
                Some(p) => avail[p].clone(),
                None => BTreeSet::new(),
            };
            for p in preds.iter().skip(1) {
                inter = inter.intersection(&avail[p]).cloned().collect();
            }
            let mut out: BTreeSet<CanonicalExpression> = exprs[&n].iter().cloned().collect();
            out.extend(inter);
            for k in killed(n) {
                out.remove(&k);
            }
            next.insert(n, out);
        }
        if next == avail {
            break;
        }
        avail = next;
        steps += 1;
    }
    Some(AvailableExpressions {
        avail,
        step_count: steps,
    })
}
