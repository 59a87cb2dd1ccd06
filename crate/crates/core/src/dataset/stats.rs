use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AnalysisExample;
use crate::graph::ProgramGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub count: usize,
    /// Labelled vertices counted.
    pub vertices: usize,
    pub positive_fraction: f64,
    /// Accuracy of always predicting the negative class.
    pub negative_baseline_accuracy: f64,
    pub step_histogram: BTreeMap<u32, usize>,
}

fn summarise<'a>(examples: &[AnalysisExample], bits: impl Iterator<Item = &'a bool>) -> DatasetStats {
    let (mut n, mut pos) = (0usize, 0usize);
    for &b in bits {
        n += 1;
        pos += usize::from(b);
    }
    let mut step_histogram = BTreeMap::new();
    for e in examples {
        *step_histogram.entry(e.step_count).or_insert(0) += 1;
    }
    let positive_fraction = if n == 0 { 0.0 } else { pos as f64 / n as f64 };
    DatasetStats {
        count: examples.len(),
        vertices: n,
        positive_fraction,
        negative_baseline_accuracy: if n == 0 { 1.0 } else { 1.0 - positive_fraction },
        step_histogram,
    }
}

/// Label statistics over every vertex of every example.
pub fn dataset_stats(examples: &[AnalysisExample]) -> DatasetStats {
    summarise(examples, examples.iter().flat_map(|e| e.labels.iter()))
}

/// Label statistics restricted to vertices of each task's target kind, the
/// vertices a model is scored on. Examples without a graph are ignored.
pub fn masked_stats(examples: &[AnalysisExample], graphs: &[ProgramGraph]) -> DatasetStats {
    let lookup = super::graph_lookup(graphs);
    let kept: Vec<AnalysisExample> = examples
        .iter()
        .filter(|e| lookup.contains_key(e.source_id.as_str()))
        .cloned()
        .collect();
    let bits = kept.iter().flat_map(|e| {
        let g = lookup[e.source_id.as_str()];
        let kind = e.task.target_kind();
        e.labels
            .iter()
            .zip(&g.vertices)
            .filter(move |(_, v)| v.kind == kind)
            .map(|(b, _)| b)
    });
    summarise(&kept, bits)
}
