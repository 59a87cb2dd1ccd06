//! Labelled examples: root selection, step filtering, grouped splits and
//! line-delimited serialisation.

mod io;
mod serialize;
mod split;
mod stats;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{run_oracle_with, valid_roots, OracleOptions, TaskId};
use crate::graph::{GraphIndex, ProgramGraph};
use crate::rng::{derive_seed, seeded, shuffle};

pub use io::{read_text, write_text};
pub use serialize::{
    decode_labels, deserialize_examples, deserialize_graphs, encode_labels, serialize_examples, serialize_graphs,
    SchemaError,
};
pub use split::{split_dataset, DatasetSplit};
pub use stats::{dataset_stats, masked_stats, DatasetStats};

/// Roots per graph never exceed this.
pub const MAX_ROOTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisExample {
    pub source_id: String,
    pub task: TaskId,
    pub root: u32,
    pub labels: Vec<bool>,
    pub step_count: u32,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("graph `{source_id}` has no valid root for {task}")]
    NoValidRoots { source_id: String, task: TaskId },
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Number of roots for a graph of `num_vertices` vertices:
/// `min(⌈|V| / 10⌉, 10)`.
pub fn root_count(num_vertices: usize) -> usize {
    num_vertices.div_ceil(10).min(MAX_ROOTS)
}

/// Samples `root_count(|V|)` distinct task-valid roots without replacement,
/// returned in ascending order.
pub fn select_roots(graph: &ProgramGraph, task: TaskId, seed: u64) -> Result<Vec<u32>, DatasetError> {
    select_roots_indexed(graph, &GraphIndex::new(graph), task, seed)
}

fn select_roots_indexed(
    graph: &ProgramGraph,
    index: &GraphIndex,
    task: TaskId,
    seed: u64,
) -> Result<Vec<u32>, DatasetError> {
    let mut candidates = valid_roots(task, graph, index);
    if candidates.is_empty() {
        return Err(DatasetError::NoValidRoots {
            source_id: graph.source_id.clone(),
            task,
        });
    }
    let mut rng = seeded(seed);
    shuffle(&mut rng, &mut candidates);
    candidates.truncate(root_count(graph.num_vertices()));
    candidates.sort_unstable();
    Ok(candidates)
}

fn examples_for_graph(graph: &ProgramGraph, task: TaskId, seed: u64) -> Vec<AnalysisExample> {
    let index = GraphIndex::new(graph);
    let graph_seed = derive_seed(seed, &format!("{}/{}", task, graph.source_id));
    let roots = match select_roots_indexed(graph, &index, task, graph_seed) {
        Ok(r) => r,
        Err(e) => {
            log::debug!("{e}");
            return Vec::new();
        }
    };
    roots
        .into_iter()
        .filter_map(
            |root| match run_oracle_with(task, graph, &index, root, OracleOptions::default()) {
                Ok(r) => Some(AnalysisExample {
                    source_id: graph.source_id.clone(),
                    task,
                    root,
                    labels: r.labels,
                    step_count: r.step_count,
                }),
                Err(e) => {
                    log::warn!("skipping {}: {e}", graph.source_id);
                    None
                }
            },
        )
        .collect()
}

/// One example per selected root of every graph. Graphs without a valid
/// root are skipped. Output is sorted by `(source_id, root)`.
pub fn generate_examples(graphs: &[ProgramGraph], task: TaskId, seed: u64) -> Vec<AnalysisExample> {
    generate_examples_parallel(graphs, task, seed, 1)
}

/// [`generate_examples`] spread over `jobs` threads; the output does not
/// depend on `jobs`.
pub fn generate_examples_parallel(
    graphs: &[ProgramGraph],
    task: TaskId,
    seed: u64,
    jobs: usize,
) -> Vec<AnalysisExample> {
    let jobs = jobs.max(1);
    let mut examples: Vec<AnalysisExample> = if jobs == 1 || graphs.len() < 2 {
        graphs.iter().flat_map(|g| examples_for_graph(g, task, seed)).collect()
    } else {
        let chunk = graphs.len().div_ceil(jobs);
        std::thread::scope(|s| {
            let handles: Vec<_> = graphs
                .chunks(chunk)
                .map(|part| {
                    s.spawn(move || {
                        part.iter()
                            .flat_map(|g| examples_for_graph(g, task, seed))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("worker panicked"))
                .collect()
        })
    };
    examples.sort_by(|a, b| (&a.source_id, a.root).cmp(&(&b.source_id, b.root)));
    examples
}

/// Keeps the examples whose analysis converged within `max_steps` rounds.
pub fn filter_by_steps(examples: &[AnalysisExample], max_steps: u32) -> Vec<AnalysisExample> {
    examples.iter().filter(|e| e.step_count <= max_steps).cloned().collect()
}

/// Looks up each example's graph by source id.
pub fn graph_lookup(graphs: &[ProgramGraph]) -> HashMap<&str, &ProgramGraph> {
    graphs.iter().map(|g| (g.source_id.as_str(), g)).collect()
}
