use serde::{Deserialize, Serialize};

/// Confusion counts for the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Counts {
    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn merge(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }
}

/// Binary precision, recall and F1 with respect to the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub counts: Counts,
}

impl Metrics {
    /// With no positives predicted or present the prediction is perfect and
    /// all scores are 1. Otherwise an empty denominator gives 0.
    pub fn from_counts(c: Counts) -> Self {
        let (tp, fp, fn_) = (c.tp as f64, c.fp as f64, c.fn_ as f64);
        let total = c.tp + c.fp + c.fn_ + c.tn;
        let accuracy = if total == 0 {
            1.0
        } else {
            (c.tp + c.tn) as f64 / total as f64
        };
        if c.tp + c.fp + c.fn_ == 0 {
            return Metrics {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
                accuracy,
                counts: c,
            };
        }
        let precision = if c.tp + c.fp == 0 { 0.0 } else { tp / (tp + fp) };
        let recall = if c.tp + c.fn_ == 0 { 0.0 } else { tp / (tp + fn_) };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics {
            precision,
            recall,
            f1,
            accuracy,
            counts: c,
        }
    }

    pub fn is_well_formed(&self) -> bool {
        [self.precision, self.recall, self.f1, self.accuracy]
            .iter()
            .all(|x| x.is_finite() && (0.0..=1.0).contains(x))
    }
}
