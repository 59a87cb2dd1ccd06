use std::io::{Read, Write};

use flowgnn_core::rng::{seeded, uniform};
use flowgnn_tensor::{read_checkpoint, write_checkpoint, Tensor};

use crate::batch::EDGE_TYPES;
use crate::{ModelConfig, ModelError, Result};

/// All trainable tensors. Weight matrices are stored input-major
/// (`[in, out]`), so a layer computes `x · W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// `|vocab| × d_embed` key embeddings; row 0 is the unknown key.
    pub embedding: Tensor,
    /// One `d × d` message transform per edge type.
    pub w_type: Vec<Tensor>,
    /// `6 × d` message biases, row per edge type.
    pub b_type: Tensor,
    /// Position gate `d × d` and bias `d`.
    pub w_pos: Tensor,
    pub b_pos: Tensor,
    /// GRU input and hidden weights `d × 3d`, column blocks reset | update | candidate.
    pub gru_wi: Tensor,
    pub gru_wh: Tensor,
    pub gru_bi: Tensor,
    pub gru_bh: Tensor,
    /// Readout gate over `[h_T; h_0]`: `2d × classes`.
    pub f_w: Tensor,
    pub f_b: Tensor,
    /// Readout value over `h_T`: `d × classes`.
    pub g_w: Tensor,
    pub g_b: Tensor,
}

fn uniform_tensor(rng: &mut flowgnn_core::rng::SplitMix64, shape: &[usize], bound: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| uniform(rng, -bound, bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches data")
}

impl ModelParams {
    /// Embeddings uniform in `[-0.1, 0.1]`; weights uniform in
    /// `±1/√fan_in`; biases zero. Tensors are drawn in [`Self::names`] order
    /// from one stream seeded with `seed`.
    pub fn init(vocab_size: usize, config: &ModelConfig, seed: u64) -> Self {
        let d = config.d();
        let c = config.classes;
        let mut rng = seeded(seed);
        let fan = |n: usize| 1.0 / (n as f64).sqrt();
        let embedding = uniform_tensor(&mut rng, &[vocab_size, config.d_embed], 0.1);
        let w_type = (0..EDGE_TYPES)
            .map(|_| uniform_tensor(&mut rng, &[d, d], fan(d)))
            .collect();
        let w_pos = uniform_tensor(&mut rng, &[d, d], fan(d));
        let gru_wi = uniform_tensor(&mut rng, &[d, 3 * d], fan(d));
        let gru_wh = uniform_tensor(&mut rng, &[d, 3 * d], fan(d));
        let f_w = uniform_tensor(&mut rng, &[2 * d, c], fan(2 * d));
        let g_w = uniform_tensor(&mut rng, &[d, c], fan(d));
        ModelParams {
            embedding,
            w_type,
            b_type: Tensor::zeros(&[EDGE_TYPES, d]),
            w_pos,
            b_pos: Tensor::zeros(&[d]),
            gru_wi,
            gru_wh,
            gru_bi: Tensor::zeros(&[3 * d]),
            gru_bh: Tensor::zeros(&[3 * d]),
            f_w,
            f_b: Tensor::zeros(&[c]),
            g_w,
            g_b: Tensor::zeros(&[c]),
        }
    }

    pub fn names() -> Vec<String> {
        let mut names = vec!["embedding".to_string()];
        names.extend((0..EDGE_TYPES).map(|t| format!("w_type.{t}")));
        for n in [
            "b_type", "w_pos", "b_pos", "gru_wi", "gru_wh", "gru_bi", "gru_bh", "f_w", "f_b", "g_w", "g_b",
        ] {
            names.push(n.to_string());
        }
        names
    }

    /// Tensors in [`Self::names`] order.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.embedding];
        out.extend(self.w_type.iter());
        out.extend([
            &self.b_type,
            &self.w_pos,
            &self.b_pos,
            &self.gru_wi,
            &self.gru_wh,
            &self.gru_bi,
            &self.gru_bh,
            &self.f_w,
            &self.f_b,
            &self.g_w,
            &self.g_b,
        ]);
        out
    }

    pub fn to_vec(&self) -> Vec<Tensor> {
        self.tensors().into_iter().cloned().collect()
    }

    pub fn from_vec(mut t: Vec<Tensor>) -> Result<Self> {
        let expected = Self::names().len();
        if t.len() != expected {
            return Err(ModelError::Checkpoint(format!(
                "expected {expected} tensors, found {}",
                t.len()
            )));
        }
        let mut it = t.drain(..);
        let mut next = || it.next().expect("length checked");
        let embedding = next();
        let w_type = (0..EDGE_TYPES).map(|_| next()).collect();
        let p = ModelParams {
            embedding,
            w_type,
            b_type: next(),
            w_pos: next(),
            b_pos: next(),
            gru_wi: next(),
            gru_wh: next(),
            gru_bi: next(),
            gru_bh: next(),
            f_w: next(),
            f_b: next(),
            g_w: next(),
            g_b: next(),
        };
        p.check_shapes()?;
        Ok(p)
    }

    /// State size implied by the tensors.
    pub fn d(&self) -> usize {
        self.w_pos.rows()
    }

    pub fn classes(&self) -> usize {
        self.g_w.cols()
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.rows()
    }

    fn check_shapes(&self) -> Result<()> {
        let d = self.d();
        let c = self.classes();
        let de = self.embedding.cols();
        let mut expected: Vec<Vec<usize>> = vec![vec![self.vocab_size(), de]];
        expected.extend((0..EDGE_TYPES).map(|_| vec![d, d]));
        expected.extend([
            vec![EDGE_TYPES, d],
            vec![d, d],
            vec![d],
            vec![d, 3 * d],
            vec![d, 3 * d],
            vec![3 * d],
            vec![3 * d],
            vec![2 * d, c],
            vec![c],
            vec![d, c],
            vec![c],
        ]);
        for ((name, t), shape) in Self::names().iter().zip(self.tensors()).zip(expected) {
            if t.shape() != shape.as_slice() {
                return Err(ModelError::Checkpoint(format!(
                    "{name} has shape {:?}, expected {shape:?}",
                    t.shape()
                )));
            }
        }
        if de + 2 != d {
            return Err(ModelError::Checkpoint(
                "embedding width must be state size minus 2".into(),
            ));
        }
        Ok(())
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        let named: Vec<(String, Tensor)> = Self::names().into_iter().zip(self.to_vec()).collect();
        write_checkpoint(out, &named)?;
        Ok(())
    }

    pub fn load<R: Read>(input: R) -> Result<Self> {
        let named = read_checkpoint(input)?;
        for ((name, _), expected) in named.iter().zip(Self::names()) {
            if *name != expected {
                return Err(ModelError::Checkpoint(format!(
                    "unexpected tensor `{name}`, wanted `{expected}`"
                )));
            }
        }
        Self::from_vec(named.into_iter().map(|(_, t)| t).collect())
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}
