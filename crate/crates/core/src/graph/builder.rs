use std::collections::HashMap;

use super::{
    FlowType, GraphEdge, GraphError, GraphVertex, ProgramGraph, VertexKind, EXTERNAL_KEY, UNDEFINED_FUNCTION_KEY,
};
use crate::ir::{validate, FuncId, InstrId, IrModule, Opcode, Scope, ValueId, ValueKind};

/// One of the three construction stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Control,
    Data,
    Call,
}

/// Vertex numbering shared by all stages.
///
/// Order: instructions of defined functions (module order, then block and
/// instruction order); data values in value-id order; one dummy vertex per
/// called external function; the external call-site vertex last.
struct Layout {
    vertices: Vec<GraphVertex>,
    instr: HashMap<InstrId, u32>,
    value: HashMap<ValueId, u32>,
    dummy: HashMap<FuncId, u32>,
    external: Option<u32>,
}

fn layout(module: &IrModule) -> Layout {
    let mut vertices = Vec::new();
    let mut instr = HashMap::new();
    let push = |vertices: &mut Vec<GraphVertex>, kind, key: String, function, qualifier| {
        let id = vertices.len() as u32;
        vertices.push(GraphVertex {
            id,
            kind,
            text_key: key,
            function,
            qualifier,
        });
        id
    };

    for f in module.functions.iter().filter(|f| !f.external) {
        for i in f.instructions() {
            let qualifier = match i.opcode {
                Opcode::ICmp | Opcode::FCmp => i.predicate.clone(),
                Opcode::Call => i.callee.map(|c| module.function(c).name.clone()),
                _ => None,
            };
            let id = push(
                &mut vertices,
                VertexKind::Instruction,
                i.opcode.as_str().to_string(),
                Some(f.id.0),
                qualifier,
            );
            instr.insert(i.id, id);
        }
    }

    let mut used = vec![false; module.values.len()];
    for f in module.functions.iter().filter(|f| !f.external) {
        for i in f.instructions() {
            for &o in &i.operands {
                used[o.index()] = true;
            }
            if let Some(r) = i.result {
                used[r.index()] = true;
            }
        }
    }
    let mut value = HashMap::new();
    for v in module.values.iter().filter(|v| used[v.id.index()]) {
        let kind = match v.kind {
            ValueKind::Variable => VertexKind::Variable,
            ValueKind::Constant => VertexKind::Constant,
        };
        let function = match v.scope {
            Scope::Global => None,
            Scope::Function(f) => Some(f.0),
        };
        let id = push(&mut vertices, kind, v.dtype.to_string(), function, None);
        value.insert(v.id, id);
    }

    let mut called = vec![false; module.functions.len()];
    for f in module.functions.iter().filter(|f| !f.external) {
        for i in f.instructions() {
            if let Some(c) = i.callee {
                called[c.index()] = true;
            }
        }
    }
    let mut dummy = HashMap::new();
    for f in module.functions.iter().filter(|f| f.external && called[f.id.index()]) {
        let id = push(
            &mut vertices,
            VertexKind::Instruction,
            UNDEFINED_FUNCTION_KEY.to_string(),
            Some(f.id.0),
            None,
        );
        dummy.insert(f.id, id);
    }

    let external = module
        .functions
        .iter()
        .any(|f| !f.external && f.externally_visible)
        .then(|| {
            push(
                &mut vertices,
                VertexKind::Instruction,
                EXTERNAL_KEY.to_string(),
                Some(module.functions.len() as u32),
                None,
            )
        });

    Layout {
        vertices,
        instr,
        value,
        dummy,
        external,
    }
}

fn control_edges(module: &IrModule, l: &Layout, out: &mut Vec<GraphEdge>) {
    for f in module.functions.iter().filter(|f| !f.external) {
        for block in &f.blocks {
            for pair in block.instructions.windows(2) {
                out.push(GraphEdge {
                    src: l.instr[&pair[0].id],
                    dst: l.instr[&pair[1].id],
                    flow: FlowType::Control,
                    position: 0,
                });
            }
            if let Some(term) = block.instructions.last() {
                for (pos, s) in term.successors.iter().enumerate() {
                    let target = &f.blocks[s.index()].instructions[0];
                    out.push(GraphEdge {
                        src: l.instr[&term.id],
                        dst: l.instr[&target.id],
                        flow: FlowType::Control,
                        position: pos as u32,
                    });
                }
            }
        }
    }
}

fn data_edges(module: &IrModule, l: &Layout, out: &mut Vec<GraphEdge>) {
    for f in module.functions.iter().filter(|f| !f.external) {
        for i in f.instructions() {
            let iv = l.instr[&i.id];
            for (pos, o) in i.operands.iter().enumerate() {
                out.push(GraphEdge {
                    src: l.value[o],
                    dst: iv,
                    flow: FlowType::Data,
                    position: pos as u32,
                });
            }
            if let Some(r) = i.result {
                out.push(GraphEdge {
                    src: iv,
                    dst: l.value[&r],
                    flow: FlowType::Data,
                    position: 0,
                });
            }
        }
    }
}

fn call_edges(module: &IrModule, l: &Layout, out: &mut Vec<GraphEdge>) {
    let call = |src, dst| GraphEdge {
        src,
        dst,
        flow: FlowType::Call,
        position: 0,
    };
    // Entry instruction and terminal (`ret`) instructions of a defined function.
    let endpoints = |fid: FuncId| {
        let f = module.function(fid);
        let entry = l.instr[&f.blocks[0].instructions[0].id];
        let exits: Vec<u32> = f
            .instructions()
            .filter(|i| i.opcode == Opcode::Ret)
            .map(|i| l.instr[&i.id])
            .collect();
        (entry, exits)
    };

    for f in module.functions.iter().filter(|f| !f.external) {
        for i in f.instructions() {
            let Some(callee) = i.callee else { continue };
            let site = l.instr[&i.id];
            if module.function(callee).external {
                let d = l.dummy[&callee];
                out.push(call(site, d));
                out.push(call(d, site));
            } else {
                let (entry, exits) = endpoints(callee);
                out.push(call(site, entry));
                out.extend(exits.into_iter().map(|e| call(e, site)));
            }
        }
    }
    if let Some(ext) = l.external {
        for f in module.functions.iter().filter(|f| !f.external && f.externally_visible) {
            let (entry, exits) = endpoints(f.id);
            out.push(call(ext, entry));
            out.extend(exits.into_iter().map(|e| call(e, ext)));
        }
    }
}

/// Builds the program graph of a validated module in a single pass over
/// its instructions.
pub fn build_graph(module: &IrModule) -> Result<ProgramGraph, GraphError> {
    build(module, &[Stage::Control, Stage::Data, Stage::Call])
}

/// Runs one construction stage: the full vertex set, but only that stage's
/// edges.
pub fn build_stage(module: &IrModule, stage: Stage) -> Result<ProgramGraph, GraphError> {
    build(module, &[stage])
}

fn build(module: &IrModule, stages: &[Stage]) -> Result<ProgramGraph, GraphError> {
    let diags = validate(module);
    if !diags.is_empty() {
        return Err(GraphError::InvalidModule(diags));
    }
    let l = layout(module);
    let mut edges = Vec::new();
    for stage in stages {
        match stage {
            Stage::Control => control_edges(module, &l, &mut edges),
            Stage::Data => data_edges(module, &l, &mut edges),
            Stage::Call => call_edges(module, &l, &mut edges),
        }
    }
    Ok(ProgramGraph {
        source_id: module.source_id.clone(),
        vertices: l.vertices,
        edges,
    })
}
