use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AnalysisExample;
use crate::rng::{seeded, shuffle};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<AnalysisExample>,
    pub val: Vec<AnalysisExample>,
    pub test: Vec<AnalysisExample>,
    pub seed: u64,
}

/// Splits 3:1:1 by source id so all examples of one program stay together.
///
/// Source ids are sorted, shuffled by `seed`, and laid end to end by example
/// count; a group goes to train, val or test according to where its midpoint
/// falls on `[0, 0.6) / [0.6, 0.8) / [0.8, 1]` of the total.
pub fn split_dataset(examples: &[AnalysisExample], seed: u64) -> DatasetSplit {
    let mut groups: BTreeMap<&str, Vec<&AnalysisExample>> = BTreeMap::new();
    for e in examples {
        groups.entry(e.source_id.as_str()).or_default().push(e);
    }
    let mut ids: Vec<&str> = groups.keys().copied().collect();
    shuffle(&mut seeded(seed), &mut ids);

    let total = examples.len() as f64;
    let mut split = DatasetSplit {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        seed,
    };
    let mut start = 0usize;
    for id in ids {
        let group = &groups[id];
        let mid = (start as f64 + group.len() as f64 / 2.0) / total;
        let target = if mid < 0.6 {
            &mut split.train
        } else if mid < 0.8 {
            &mut split.val
        } else {
            &mut split.test
        };
        target.extend(group.iter().map(|&e| e.clone()));
        start += group.len();
    }
    split
}
