use serde::{Deserialize, Serialize};

use crate::{ModelError, Result};

/// Which vertices contribute to the loss and the metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MaskMode {
    /// Vertices of the task's target kind.
    #[default]
    Kind,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d_embed: usize,
    pub d_selector: usize,
    pub classes: usize,
    /// Message-passing rounds during training.
    pub t_train: usize,
    pub learning_rate: f64,
    /// Vertex budget per batch.
    pub batch_vertices: usize,
    pub epochs: usize,
    /// Validate after this many training examples.
    pub validate_every: usize,
    /// Stop after this many training examples in total, if set.
    pub max_train_examples: Option<usize>,
    pub mask: MaskMode,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_embed: 32,
            d_selector: 2,
            classes: 2,
            t_train: 30,
            learning_rate: 2.5e-4,
            batch_vertices: 10_000,
            epochs: 1,
            validate_every: 500,
            max_train_examples: None,
            mask: MaskMode::Kind,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// State size `d_embed + d_selector`.
    pub fn d(&self) -> usize {
        self.d_embed + self.d_selector
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_embed", self.d_embed),
            ("classes", self.classes),
            ("t_train", self.t_train),
            ("batch_vertices", self.batch_vertices),
            ("validate_every", self.validate_every),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ModelError::Config(format!("{name} must be positive")));
            }
        }
        if self.d_selector != 2 {
            return Err(ModelError::Config("the root selector has two slots".into()));
        }
        if !self.d().is_multiple_of(2) {
            return Err(ModelError::OddDimension(self.d()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(ModelError::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}
