//! Program graphs: instructions, variables and constants as vertices, joined
//! by typed and positioned control, data and call edges.

mod builder;
mod dot;
mod index;
mod invariants;
mod stats;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::Diagnostic;

pub use builder::{build_graph, build_stage, Stage};
pub use dot::to_dot;
pub use index::GraphIndex;
pub use invariants::invariant_violations;
pub use stats::{graph_stats, GraphStats};

/// Embedding key of the vertex standing in for an externally defined callee.
pub const UNDEFINED_FUNCTION_KEY: &str = "<undefined-function>";
/// Embedding key of the vertex standing in for callers outside the module.
pub const EXTERNAL_KEY: &str = "<external>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexKind {
    Instruction,
    Variable,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphVertex {
    pub id: u32,
    pub kind: VertexKind,
    pub text_key: String,
    /// Owning function. `None` for module-level constants.
    pub function: Option<u32>,
    /// Comparison predicate or callee name; distinguishes expressions that
    /// share an opcode. Not part of the embedding key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qualifier: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowType {
    Control,
    Data,
    Call,
}

impl FlowType {
    pub const ALL: [FlowType; 3] = [FlowType::Control, FlowType::Data, FlowType::Call];

    pub fn as_str(self) -> &'static str {
        match self {
            FlowType::Control => "control",
            FlowType::Data => "data",
            FlowType::Call => "call",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GraphEdge {
    pub src: u32,
    pub dst: u32,
    pub flow: FlowType,
    pub position: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ProgramGraph {
    pub source_id: String,
    pub vertices: Vec<GraphVertex>,
    pub edges: Vec<GraphEdge>,
}

impl ProgramGraph {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex(&self, id: u32) -> &GraphVertex {
        &self.vertices[id as usize]
    }

    /// True for instruction vertices that belong to a function with a body,
    /// i.e. not a dummy callee or the external call site.
    pub fn is_defined_instruction(&self, id: u32) -> bool {
        let v = self.vertex(id);
        v.kind == VertexKind::Instruction && v.text_key != UNDEFINED_FUNCTION_KEY && v.text_key != EXTERNAL_KEY
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("module failed validation with {} diagnostic(s); first: {}", .0.len(), .0[0])]
    InvalidModule(Vec<Diagnostic>),
}
