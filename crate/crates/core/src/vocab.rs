//! Embedding vocabulary over vertex text keys.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::graph::ProgramGraph;

pub const UNKNOWN_KEY: &str = "<unk>";
pub const UNKNOWN_INDEX: usize = 0;

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("coverage is undefined without test vertices")]
    DivisionByZero,
    #[error("vocabulary file must start with `{UNKNOWN_KEY}`")]
    MissingUnknown,
    #[error("duplicate vocabulary key `{0}` on line {1}")]
    DuplicateKey(String, usize),
}

/// Sorted unique keys; index 0 is reserved for unknown keys, so key `i` of
/// [`Vocabulary::entries`] has index `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    entries: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_keys<I: IntoIterator<Item = String>>(keys: I) -> Self {
        let sorted: BTreeSet<String> = keys.into_iter().collect();
        let entries: Vec<String> = sorted.into_iter().collect();
        let index = entries.iter().enumerate().map(|(i, k)| (k.clone(), i + 1)).collect();
        Vocabulary { entries, index }
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    /// Embedding table rows, the unknown row included.
    pub fn size(&self) -> usize {
        self.entries.len() + 1
    }

    pub fn lookup(&self, key: &str) -> usize {
        self.index.get(key).copied().unwrap_or(UNKNOWN_INDEX)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    /// One key per line; line 0 is `<unk>`, so line number = index.
    pub fn to_text(&self) -> String {
        let mut out = format!("{UNKNOWN_KEY}\n");
        for k in &self.entries {
            out.push_str(k);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, VocabError> {
        let mut lines = text.lines();
        if lines.next() != Some(UNKNOWN_KEY) {
            return Err(VocabError::MissingUnknown);
        }
        let mut entries = Vec::new();
        let mut index = HashMap::new();
        for (i, key) in lines.enumerate() {
            if index.insert(key.to_string(), i + 1).is_some() {
                return Err(VocabError::DuplicateKey(key.to_string(), i + 1));
            }
            entries.push(key.to_string());
        }
        Ok(Vocabulary { entries, index })
    }
}

/// All vertex keys seen in `graphs`.
pub fn derive_vocab(graphs: &[ProgramGraph]) -> Vocabulary {
    Vocabulary::from_keys(
        graphs
            .iter()
            .flat_map(|g| g.vertices.iter().map(|v| v.text_key.clone())),
    )
}

/// Fraction of vertices in `graphs` whose key is in the vocabulary.
pub fn coverage(vocab: &Vocabulary, graphs: &[ProgramGraph]) -> Result<f64, VocabError> {
    let (mut total, mut known) = (0usize, 0usize);
    for v in graphs.iter().flat_map(|g| &g.vertices) {
        total += 1;
        known += usize::from(vocab.contains(&v.text_key));
    }
    if total == 0 {
        return Err(VocabError::DivisionByZero);
    }
    Ok(known as f64 / total as f64)
}

/// Vocabulary index of every vertex.
pub fn encode_vertices(vocab: &Vocabulary, graph: &ProgramGraph) -> Vec<usize> {
    graph.vertices.iter().map(|v| vocab.lookup(&v.text_key)).collect()
}
