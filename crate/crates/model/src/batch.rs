use std::collections::HashMap;
use std::sync::Arc;

use flowgnn_core::dataset::AnalysisExample;
use flowgnn_core::graph::{FlowType, ProgramGraph};
use flowgnn_core::vocab::Vocabulary;

use crate::MaskMode;

/// Control, data and call edges, each forward and backward.
pub const EDGE_TYPES: usize = 6;

/// Edge type of a stored edge (`backward = false`) or of its reverse.
pub fn edge_type(flow: FlowType, backward: bool) -> usize {
    let base = match flow {
        FlowType::Control => 0,
        FlowType::Data => 1,
        FlowType::Call => 2,
    };
    base + if backward { 3 } else { 0 }
}

/// Edges of one type, arranged for message passing.
#[derive(Debug, Clone, PartialEq)]
pub struct TypedEdges {
    pub src: Arc<[u32]>,
    pub dst: Arc<[u32]>,
    pub positions: Vec<u32>,
    /// Index of each edge's position in [`EncodedBatch::positions`].
    pub position_index: Arc<[u32]>,
    /// Distinct destination vertices, ascending.
    pub targets: Arc<[u32]>,
    /// Per edge: index of its destination in `targets`.
    pub target_slot: Arc<[u32]>,
}

/// Several examples laid out as one disconnected graph.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedBatch {
    pub num_vertices: usize,
    /// Vocabulary index per vertex.
    pub vocab_index: Arc<[u32]>,
    /// Per vertex: is it the example's root.
    pub is_root: Vec<bool>,
    pub edges: Vec<TypedEdges>,
    /// Distinct edge positions in the batch, ascending.
    pub positions: Vec<u32>,
    /// Row `v`: number of incoming edges of each type, as `f64`.
    pub type_counts: Vec<f64>,
    /// `1 / in-degree`, or 0 for vertices without incoming edges.
    pub inv_degree: Arc<[f64]>,
    /// Per example: its vertex range.
    pub ranges: Vec<std::ops::Range<usize>>,
    pub labels: Arc<[u32]>,
    pub mask: Arc<[bool]>,
}

/// Lays `examples` out side by side. Vertex ids are offset per example;
/// every stored edge `(s, d, flow, pos)` also yields `(d, s, flow', pos)`
/// with the backward type.
pub fn encode_batch(
    examples: &[(&AnalysisExample, &ProgramGraph)],
    vocab: &Vocabulary,
    mask_mode: MaskMode,
) -> EncodedBatch {
    let n: usize = examples.iter().map(|(_, g)| g.num_vertices()).sum();
    let mut vocab_index = Vec::with_capacity(n);
    let mut is_root = vec![false; n];
    let mut labels = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n);
    let mut ranges = Vec::with_capacity(examples.len());
    let mut raw: Vec<Vec<(u32, u32, u32)>> = vec![Vec::new(); EDGE_TYPES];

    let mut offset = 0usize;
    for (ex, g) in examples {
        let kind = ex.task.target_kind();
        for v in &g.vertices {
            vocab_index.push(vocab.lookup(&v.text_key) as u32);
            mask.push(mask_mode == MaskMode::All || v.kind == kind);
        }
        labels.extend(ex.labels.iter().map(|&b| u32::from(b)));
        is_root[offset + ex.root as usize] = true;
        let o = offset as u32;
        for e in &g.edges {
            raw[edge_type(e.flow, false)].push((o + e.src, o + e.dst, e.position));
            raw[edge_type(e.flow, true)].push((o + e.dst, o + e.src, e.position));
        }
        ranges.push(offset..offset + g.num_vertices());
        offset += g.num_vertices();
    }

    let mut positions: Vec<u32> = raw.iter().flatten().map(|e| e.2).collect();
    positions.sort_unstable();
    positions.dedup();
    let pos_slot: HashMap<u32, u32> = positions.iter().enumerate().map(|(i, &p)| (p, i as u32)).collect();

    let mut type_counts = vec![0.0; n * EDGE_TYPES];
    let mut degree = vec![0usize; n];
    let edges = raw
        .into_iter()
        .enumerate()
        .map(|(t, list)| {
            let mut targets: Vec<u32> = list.iter().map(|e| e.1).collect();
            targets.sort_unstable();
            targets.dedup();
            let slot: HashMap<u32, u32> = targets.iter().enumerate().map(|(i, &v)| (v, i as u32)).collect();
            for &(_, d, _) in &list {
                type_counts[d as usize * EDGE_TYPES + t] += 1.0;
                degree[d as usize] += 1;
            }
            TypedEdges {
                src: list.iter().map(|e| e.0).collect(),
                dst: list.iter().map(|e| e.1).collect(),
                positions: list.iter().map(|e| e.2).collect(),
                position_index: list.iter().map(|e| pos_slot[&e.2]).collect(),
                target_slot: list.iter().map(|e| slot[&e.1]).collect(),
                targets: targets.into(),
            }
        })
        .collect();

    EncodedBatch {
        num_vertices: n,
        vocab_index: vocab_index.into(),
        is_root,
        edges,
        positions,
        type_counts,
        inv_degree: degree
            .iter()
            .map(|&d| if d == 0 { 0.0 } else { 1.0 / d as f64 })
            .collect(),
        ranges,
        labels: labels.into(),
        mask: mask.into(),
    }
}

impl EncodedBatch {
    /// The same batch with the three backward edge types emptied, for
    /// ablation.
    pub fn without_backward_edges(mut self) -> Self {
        for t in 3..EDGE_TYPES {
            self.edges[t] = TypedEdges {
                src: Arc::from(Vec::new()),
                dst: Arc::from(Vec::new()),
                positions: Vec::new(),
                position_index: Arc::from(Vec::new()),
                targets: Arc::from(Vec::new()),
                target_slot: Arc::from(Vec::new()),
            };
        }
        for row in self.type_counts.chunks_mut(EDGE_TYPES) {
            row[3..].fill(0.0);
        }
        self.inv_degree = self
            .type_counts
            .chunks(EDGE_TYPES)
            .map(|row| {
                let d: f64 = row.iter().sum();
                if d == 0.0 {
                    0.0
                } else {
                    1.0 / d
                }
            })
            .collect();
        self
    }
}

/// Groups consecutive items into batches whose vertex total stays within
/// `budget`; an item larger than the budget forms a batch of its own.
pub fn pack_batches(sizes: &[usize], budget: usize) -> Vec<std::ops::Range<usize>> {
    let mut batches = Vec::new();
    let mut start = 0;
    let mut total = 0;
    for (i, &s) in sizes.iter().enumerate() {
        if i > start && total + s > budget {
            batches.push(start..i);
            start = i;
            total = 0;
        }
        total += s;
    }
    if start < sizes.len() {
        batches.push(start..sizes.len());
    }
    batches
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packing_respects_budget() {
        assert_eq!(pack_batches(&[4, 4, 4], 8), vec![0..2, 2..3]);
        assert_eq!(pack_batches(&[20, 3, 3], 8), vec![0..1, 1..3]);
        assert_eq!(pack_batches(&[3, 20, 3], 8), vec![0..1, 1..2, 2..3]);
        assert!(pack_batches(&[], 8).is_empty());
    }
}
