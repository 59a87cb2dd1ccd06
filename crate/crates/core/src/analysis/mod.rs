//! Ground-truth data-flow analyses over program graphs.
//!
//! Each analysis is a round-based fixed-point solver: one step is one
//! synchronous update of every relevant vertex, and a step is counted only
//! if it changed some value set. [`brute_force_oracle`] recomputes the same
//! labels from the path-based definitions for cross-checking.

mod avail;
mod brute;
mod datadep;
mod dominance;
mod expr;
mod liveness;
mod reachability;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphIndex, ProgramGraph, VertexKind};

pub use avail::{available_expressions, AvailableExpressions};
pub use brute::{brute_force_oracle, BRUTE_FORCE_VERTEX_LIMIT};
pub use datadep::data_deps;
pub use dominance::dominance;
pub use expr::{canonical_expression, CanonicalExpression, COMMUTATIVE_OPCODES};
pub use liveness::liveness;
pub use reachability::reachability;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskId {
    Reachability,
    Dominance,
    DataDep,
    Liveness,
    Subexpressions,
}

impl TaskId {
    pub const ALL: [TaskId; 5] = [
        TaskId::Reachability,
        TaskId::Dominance,
        TaskId::DataDep,
        TaskId::Liveness,
        TaskId::Subexpressions,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::Reachability => "reachability",
            TaskId::Dominance => "dominance",
            TaskId::DataDep => "datadep",
            TaskId::Liveness => "liveness",
            TaskId::Subexpressions => "subexpressions",
        }
    }

    /// Kind of vertex whose labels carry the analysis result.
    pub fn target_kind(self) -> VertexKind {
        match self {
            TaskId::Liveness => VertexKind::Variable,
            _ => VertexKind::Instruction,
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskId::ALL
            .into_iter()
            .find(|t| t.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown task `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleResult {
    /// One label per graph vertex.
    pub labels: Vec<bool>,
    pub step_count: u32,
    pub root: u32,
}

impl OracleResult {
    pub fn positives(&self) -> Vec<u32> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l)
            .map(|(i, _)| i as u32)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("invalid root {root} for {task}: {reason}")]
    InvalidRoot { task: TaskId, root: u32, reason: String },
    #[error("graph has {vertices} vertices; brute force is limited to {limit}")]
    GraphTooLarge { vertices: usize, limit: usize },
}

/// Knobs for interpretation choices the analyses leave open.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleOptions {
    /// Whether the root of a Subexpressions query is itself labelled.
    pub label_subexpression_root: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            label_subexpression_root: true,
        }
    }
}

/// Whether `root` is a legal query vertex for `task`.
///
/// All tasks need an instruction of a function with a body; Subexpressions
/// further needs the instruction to form an expression (operands and a
/// result).
pub fn is_valid_root(task: TaskId, graph: &ProgramGraph, index: &GraphIndex, root: u32) -> bool {
    if root as usize >= graph.num_vertices() || !graph.is_defined_instruction(root) {
        return false;
    }
    match task {
        TaskId::Subexpressions => canonical_expression(graph, index, root).is_some(),
        _ => true,
    }
}

/// All legal roots for `task`, ascending.
pub fn valid_roots(task: TaskId, graph: &ProgramGraph, index: &GraphIndex) -> Vec<u32> {
    (0..graph.num_vertices() as u32)
        .filter(|&v| is_valid_root(task, graph, index, v))
        .collect()
}

pub(crate) fn check_root(
    task: TaskId,
    graph: &ProgramGraph,
    root: u32,
    require_body: bool,
) -> Result<(), AnalysisError> {
    let invalid = |reason: &str| AnalysisError::InvalidRoot {
        task,
        root,
        reason: reason.to_string(),
    };
    if root as usize >= graph.num_vertices() {
        return Err(invalid("no such vertex"));
    }
    if graph.vertex(root).kind != VertexKind::Instruction {
        return Err(invalid("not an instruction vertex"));
    }
    if require_body && !graph.is_defined_instruction(root) {
        return Err(invalid("not in a function with a body"));
    }
    Ok(())
}

/// Runs the fixed-point analysis for `task`.
pub fn run_oracle(task: TaskId, graph: &ProgramGraph, root: u32) -> Result<OracleResult, AnalysisError> {
    run_oracle_with(task, graph, &GraphIndex::new(graph), root, OracleOptions::default())
}

/// [`run_oracle`] with a prebuilt index, for many roots on one graph.
pub fn run_oracle_with(
    task: TaskId,
    graph: &ProgramGraph,
    index: &GraphIndex,
    root: u32,
    options: OracleOptions,
) -> Result<OracleResult, AnalysisError> {
    match task {
        TaskId::Reachability => reachability(graph, index, root),
        TaskId::Dominance => dominance(graph, index, root),
        TaskId::DataDep => data_deps(graph, index, root),
        TaskId::Liveness => liveness(graph, index, root),
        TaskId::Subexpressions => expr::subexpressions(graph, index, root, options),
    }
}

pub use expr::subexpressions;
