use std::collections::HashMap;

use flowgnn_core::dataset::AnalysisExample;
use flowgnn_core::graph::ProgramGraph;
use flowgnn_core::rng::{derive_seed, seeded, shuffle};
use flowgnn_core::vocab::Vocabulary;
use flowgnn_tensor::{adam_step, AdamConfig, AdamState, Tape, TensorError};
use serde::{Deserialize, Serialize};

use crate::batch::{encode_batch, pack_batches, EncodedBatch};
use crate::forward::{forward, forward_values, ParamVars};
use crate::metrics::{Counts, Metrics};
use crate::{MaskMode, ModelConfig, ModelError, ModelParams, Result};

/// Graphs by source id.
pub type GraphStore = HashMap<String, ProgramGraph>;

/// One line of the training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    /// Optimiser updates so far.
    pub step: u64,
    pub split: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the best validation F1 (the final ones if no
    /// validation ran).
    pub params: ModelParams,
    pub history: Vec<HistoryRecord>,
    pub best_f1: Option<f64>,
    pub steps: u64,
    pub examples_seen: usize,
}

fn lookup<'a>(graphs: &'a GraphStore, ex: &AnalysisExample) -> Result<&'a ProgramGraph> {
    let g = graphs
        .get(&ex.source_id)
        .ok_or_else(|| ModelError::MissingGraph(ex.source_id.clone()))?;
    if ex.labels.len() != g.num_vertices() || ex.root as usize >= g.num_vertices() {
        return Err(ModelError::ExampleMismatch {
            source_id: ex.source_id.clone(),
            labels: ex.labels.len(),
            root: ex.root,
            vertices: g.num_vertices(),
        });
    }
    Ok(g)
}

fn encode(
    examples: &[&AnalysisExample],
    graphs: &GraphStore,
    vocab: &Vocabulary,
    mask: MaskMode,
) -> Result<EncodedBatch> {
    let pairs = examples
        .iter()
        .map(|&e| Ok((e, lookup(graphs, e)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(encode_batch(&pairs, vocab, mask))
}

/// Class-1 decisions from `n × 2` scores.
fn decisions(scores: &flowgnn_tensor::Tensor) -> Vec<bool> {
    (0..scores.rows())
        .map(|i| {
            let r = scores.row(i);
            r[1] > r[0]
        })
        .collect()
}

fn count(batch: &EncodedBatch, predicted: &[bool]) -> Counts {
    let mut c = Counts::default();
    for v in (0..batch.num_vertices).filter(|&v| batch.mask[v]) {
        c.record(predicted[v], batch.labels[v] == 1);
    }
    c
}

fn loss_of(tape: &mut Tape, batch: &EncodedBatch, scores: flowgnn_tensor::Var) -> Result<Option<flowgnn_tensor::Var>> {
    match tape.softmax_cross_entropy(scores, batch.labels.clone(), batch.mask.clone()) {
        Ok(l) => Ok(Some(l)),
        Err(TensorError::EmptyMask) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn batches_of<'a>(
    examples: &'a [AnalysisExample],
    graphs: &GraphStore,
    budget: usize,
) -> Result<Vec<Vec<&'a AnalysisExample>>> {
    let sizes = examples
        .iter()
        .map(|e| Ok(lookup(graphs, e)?.num_vertices()))
        .collect::<Result<Vec<_>>>()?;
    Ok(pack_batches(&sizes, budget)
        .into_iter()
        .map(|r| examples[r].iter().collect())
        .collect())
}

/// Metrics and mean masked loss of `params` on `examples` with `steps`
/// rounds of message passing.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_with_loss(
    params: &ModelParams,
    examples: &[AnalysisExample],
    graphs: &GraphStore,
    vocab: &Vocabulary,
    steps: usize,
    mask: MaskMode,
    batch_vertices: usize,
) -> Result<(Metrics, f64)> {
    let mut counts = Counts::default();
    let (mut loss_sum, mut loss_weight) = (0.0, 0usize);
    for chunk in batches_of(examples, graphs, batch_vertices)? {
        let batch = encode(&chunk, graphs, vocab, mask)?;
        let values = forward_values(params, &batch, steps)?;
        counts.merge(count(&batch, &decisions(&values.scores)));
        let mut tape = Tape::new();
        let scores = tape.constant(values.scores)?;
        if let Some(l) = loss_of(&mut tape, &batch, scores)? {
            let w = batch.mask.iter().filter(|&&m| m).count();
            loss_sum += tape.value(l).item() * w as f64;
            loss_weight += w;
        }
    }
    let loss = if loss_weight == 0 {
        0.0
    } else {
        loss_sum / loss_weight as f64
    };
    Ok((Metrics::from_counts(counts), loss))
}

/// Precision, recall and F1 over the masked vertices of `examples`.
pub fn evaluate(
    params: &ModelParams,
    examples: &[AnalysisExample],
    graphs: &GraphStore,
    vocab: &Vocabulary,
    steps: usize,
    mask: MaskMode,
) -> Result<Metrics> {
    evaluate_with_loss(params, examples, graphs, vocab, steps, mask, 10_000).map(|(m, _)| m)
}

/// Per-example vertex scores (`|V| × classes`, row-major).
pub fn predict(
    params: &ModelParams,
    examples: &[AnalysisExample],
    graphs: &GraphStore,
    vocab: &Vocabulary,
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(examples.len());
    for chunk in batches_of(examples, graphs, 10_000)? {
        let batch = encode(&chunk, graphs, vocab, MaskMode::All)?;
        let scores = forward_values(params, &batch, steps)?.scores;
        let c = scores.cols();
        for r in &batch.ranges {
            out.push(scores.data()[r.start * c..r.end * c].to_vec());
        }
    }
    Ok(out)
}

/// Adam training with periodic validation; keeps the parameters with the
/// best validation F1.
///
/// Each epoch visits the training examples in an order shuffled from the
/// seed, packed into batches of at most `batch_vertices` vertices.
/// Validation runs on `val` every `validate_every` training examples and
/// once at the end.
pub fn train(
    train: &[AnalysisExample],
    val: &[AnalysisExample],
    graphs: &GraphStore,
    vocab: &Vocabulary,
    config: &ModelConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    let mut params = ModelParams::init(vocab.size(), config, derive_seed(config.seed, "init"));
    let adam = AdamConfig {
        lr: config.learning_rate,
        ..AdamConfig::default()
    };
    let mut state = AdamState::new(&params.to_vec());
    let limit = config.max_train_examples.unwrap_or(usize::MAX);

    let mut history = Vec::new();
    let mut best: Option<(f64, ModelParams)> = None;
    let mut seen = 0usize;
    let mut steps = 0u64;
    let mut next_validation = config.validate_every;
    let mut window = (Counts::default(), 0.0, 0usize);

    let validate = |params: &ModelParams,
                    steps: u64,
                    window: &mut (Counts, f64, usize),
                    history: &mut Vec<HistoryRecord>,
                    best: &mut Option<(f64, ModelParams)>|
     -> Result<()> {
        if window.2 > 0 {
            let m = Metrics::from_counts(window.0);
            history.push(HistoryRecord {
                step: steps,
                split: "train".into(),
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                loss: window.1 / window.2 as f64,
            });
            *window = (Counts::default(), 0.0, 0);
        }
        if val.is_empty() {
            return Ok(());
        }
        let (m, loss) = evaluate_with_loss(
            params,
            val,
            graphs,
            vocab,
            config.t_train,
            config.mask,
            config.batch_vertices,
        )?;
        log::info!("step {steps}: val f1 {:.4} loss {:.4}", m.f1, loss);
        history.push(HistoryRecord {
            step: steps,
            split: "val".into(),
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            loss,
        });
        if best.as_ref().is_none_or(|(f, _)| m.f1 > *f) {
            *best = Some((m.f1, params.clone()));
        }
        Ok(())
    };

    'epochs: for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        shuffle(
            &mut seeded(derive_seed(config.seed, &format!("epoch-{epoch}"))),
            &mut order,
        );
        let shuffled: Vec<AnalysisExample> = order.iter().map(|&i| train[i].clone()).collect();
        for chunk in batches_of(&shuffled, graphs, config.batch_vertices)? {
            if seen >= limit {
                break 'epochs;
            }
            let chunk = &chunk[..chunk.len().min(limit - seen)];
            let batch = encode(chunk, graphs, vocab, config.mask)?;
            let mut tape = Tape::new();
            let pv = ParamVars::register(&mut tape, &params, true)?;
            let out = forward(&mut tape, &pv, &batch, config.t_train)?;
            seen += chunk.len();
            let Some(loss) = loss_of(&mut tape, &batch, out.scores)? else {
                continue;
            };
            window.0.merge(count(&batch, &decisions(tape.value(out.scores))));
            window.1 += tape.value(loss).item();
            window.2 += 1;
            tape.backward(loss)?;
            let grads = pv.grads(&tape);
            let mut flat = params.to_vec();
            adam_step(&mut flat, &grads, &mut state, &adam)?;
            params = ModelParams::from_vec(flat)?;
            steps += 1;
            if seen >= next_validation {
                validate(&params, steps, &mut window, &mut history, &mut best)?;
                while next_validation <= seen {
                    next_validation += config.validate_every;
                }
            }
        }
    }
    if steps > 0 && history.last().is_none_or(|h| h.step != steps) {
        validate(&params, steps, &mut window, &mut history, &mut best)?;
    }

    let best_f1 = best.as_ref().map(|(f, _)| *f);
    Ok(TrainOutcome {
        params: best.map_or(params, |(_, p)| p),
        history,
        best_f1,
        steps,
        examples_seen: seen,
    })
}
