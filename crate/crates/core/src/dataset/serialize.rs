use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::AnalysisExample;
use crate::analysis::TaskId;
use crate::graph::ProgramGraph;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct SchemaError {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExampleRecord {
    source_id: String,
    task: TaskId,
    root: u32,
    labels: String,
    step_count: u32,
}

/// Run-length encodes a bit string as `bit:count` runs, e.g. `0:2,1:2,0:1`.
pub fn encode_labels(labels: &[bool]) -> String {
    let mut runs: Vec<String> = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        let bit = labels[i];
        let start = i;
        while i < labels.len() && labels[i] == bit {
            i += 1;
        }
        runs.push(format!("{}:{}", u8::from(bit), i - start));
    }
    runs.join(",")
}

/// Inverse of [`encode_labels`].
pub fn decode_labels(text: &str) -> Result<Vec<bool>, String> {
    let mut labels = Vec::new();
    if text.is_empty() {
        return Ok(labels);
    }
    for run in text.split(',') {
        let (bit, count) = run.split_once(':').ok_or_else(|| format!("malformed run `{run}`"))?;
        let bit = match bit {
            "0" => false,
            "1" => true,
            _ => return Err(format!("bad bit `{bit}`")),
        };
        let count: usize = count.parse().map_err(|_| format!("bad run length `{count}`"))?;
        if count == 0 {
            return Err(format!("empty run `{run}`"));
        }
        labels.extend(std::iter::repeat_n(bit, count));
    }
    Ok(labels)
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
}

/// One JSON graph record per line.
pub fn serialize_graphs(graphs: &[ProgramGraph]) -> String {
    let mut out = String::new();
    for g in graphs {
        out.push_str(&serde_json::to_string(g).expect("graphs serialise"));
        out.push('\n');
    }
    out
}

pub fn deserialize_graphs(text: &str) -> Result<Vec<ProgramGraph>, SchemaError> {
    lines(text)
        .map(|(line, l)| {
            let g: ProgramGraph = serde_json::from_str(l).map_err(|e| SchemaError {
                line,
                message: e.to_string(),
            })?;
            if let Some((i, v)) = g.vertices.iter().enumerate().find(|(i, v)| v.id as usize != *i) {
                return Err(SchemaError {
                    line,
                    message: format!("vertex {i} carries id {}", v.id),
                });
            }
            let n = g.vertices.len() as u32;
            if g.edges.iter().any(|e| e.src >= n || e.dst >= n) {
                return Err(SchemaError {
                    line,
                    message: "edge endpoint out of range".to_string(),
                });
            }
            Ok(g)
        })
        .collect()
}

/// One JSON example record per line; labels are run-length encoded and the
/// graph is referenced by `source_id`.
pub fn serialize_examples(examples: &[AnalysisExample]) -> String {
    let mut out = String::new();
    for e in examples {
        let record = ExampleRecord {
            source_id: e.source_id.clone(),
            task: e.task,
            root: e.root,
            labels: encode_labels(&e.labels),
            step_count: e.step_count,
        };
        out.push_str(&serde_json::to_string(&record).expect("examples serialise"));
        out.push('\n');
    }
    out
}

pub fn deserialize_examples(text: &str) -> Result<Vec<AnalysisExample>, SchemaError> {
    lines(text)
        .map(|(line, l)| {
            let r: ExampleRecord = serde_json::from_str(l).map_err(|e| SchemaError {
                line,
                message: e.to_string(),
            })?;
            let labels = decode_labels(&r.labels).map_err(|message| SchemaError { line, message })?;
            if r.root as usize >= labels.len() {
                return Err(SchemaError {
                    line,
                    message: format!("root {} outside {} labels", r.root, labels.len()),
                });
            }
            Ok(AnalysisExample {
                source_id: r.source_id,
                task: r.task,
                root: r.root,
                labels,
                step_count: r.step_count,
            })
        })
        .collect()
}
