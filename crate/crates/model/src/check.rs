use std::collections::HashMap;

use flowgnn_core::analysis::TaskId;
use flowgnn_core::dataset::generate_examples;
use flowgnn_core::graph::build_graph;
use flowgnn_core::rng::derive_seed;
use flowgnn_core::synth::{synth_corpus, SynthConfig};
use flowgnn_core::vocab::derive_vocab;
use flowgnn_tensor::{grad_check, GradCheckReport};

use crate::{encode_batch, forward, MaskMode, ModelConfig, ModelError, ModelParams, ParamVars, Result};

/// Central-difference step used by [`check_model_gradients`].
pub const MODEL_CHECK_EPSILON: f64 = 1e-5;

/// Gradient check of the loss with respect to every parameter tensor, on a
/// small random batch drawn from `seed` and propagated for `steps` rounds.
///
/// Parameters use a narrow embedding and non-zero biases so that every term
/// contributes; `per_input` caps the probed elements per tensor.
pub fn check_model_gradients(seed: u64, steps: usize, per_input: Option<usize>) -> Result<GradCheckReport> {
    let synth = SynthConfig {
        max_functions: 2,
        max_instructions: 8,
        ..SynthConfig::default()
    };
    let graphs: Vec<_> = synth_corpus(seed, 2, &synth, "gc")
        .iter()
        .map(build_graph)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| ModelError::Config(e.to_string()))?;
    let task = TaskId::ALL[(seed % TaskId::ALL.len() as u64) as usize];
    let mut examples = generate_examples(&graphs, task, seed);
    examples.truncate(3);
    let store: HashMap<&str, _> = graphs.iter().map(|g| (g.source_id.as_str(), g)).collect();
    let pairs: Vec<_> = examples.iter().map(|e| (e, store[e.source_id.as_str()])).collect();
    let vocab = derive_vocab(&graphs);
    let batch = encode_batch(&pairs, &vocab, MaskMode::All);

    let config = ModelConfig {
        d_embed: 6,
        ..ModelConfig::default()
    };
    let mut params = ModelParams::init(vocab.size(), &config, derive_seed(seed, "gradcheck"));
    for (salt, bias) in [
        &mut params.b_type,
        &mut params.b_pos,
        &mut params.gru_bi,
        &mut params.gru_bh,
        &mut params.f_b,
        &mut params.g_b,
    ]
    .into_iter()
    .enumerate()
    {
        for (i, x) in bias.data_mut().iter_mut().enumerate() {
            *x = 0.05 * ((i + 7 * salt) as f64 * 0.7).sin();
        }
    }

    let report = grad_check(
        |tape, vars| {
            let pv = ParamVars { vars: vars.to_vec() };
            let out = forward(tape, &pv, &batch, steps).map_err(|e| match e {
                ModelError::Tensor(t) => t,
                other => flowgnn_tensor::TensorError::Checkpoint(other.to_string()),
            })?;
            tape.softmax_cross_entropy(out.scores, batch.labels.clone(), batch.mask.clone())
        },
        &params.to_vec(),
        MODEL_CHECK_EPSILON,
        per_input,
    )?;
    Ok(report)
}
