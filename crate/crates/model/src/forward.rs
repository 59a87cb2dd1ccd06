use std::sync::Arc;

use flowgnn_tensor::{Tape, Tensor, Var};

use crate::batch::{EncodedBatch, EDGE_TYPES};
use crate::{ModelError, ModelParams, Result};

/// `emb[2i] = sin(pos / 10000^{2i/d})`, `emb[2i+1] = cos(pos / 10000^{2i/d})`.
pub fn sinusoidal_embedding(position: u32, d: usize) -> Result<Vec<f64>> {
    if !d.is_multiple_of(2) {
        return Err(ModelError::OddDimension(d));
    }
    let mut emb = vec![0.0; d];
    for i in 0..d / 2 {
        let angle = position as f64 / 10000f64.powf(2.0 * i as f64 / d as f64);
        emb[2 * i] = angle.sin();
        emb[2 * i + 1] = angle.cos();
    }
    Ok(emb)
}

/// Parameters recorded on a tape.
#[derive(Debug, Clone)]
pub struct ParamVars {
    pub vars: Vec<Var>,
}

impl ParamVars {
    /// Records every tensor of `params`, differentiable if `trainable`.
    pub fn register(tape: &mut Tape, params: &ModelParams, trainable: bool) -> Result<Self> {
        let vars = params
            .tensors()
            .into_iter()
            .map(|t| {
                if trainable {
                    tape.param(t.clone())
                } else {
                    tape.constant(t.clone())
                }
            })
            .collect::<flowgnn_tensor::Result<Vec<_>>>()?;
        Ok(ParamVars { vars })
    }

    pub fn embedding(&self) -> Var {
        self.vars[0]
    }
    pub fn w_type(&self, t: usize) -> Var {
        self.vars[1 + t]
    }
    fn at(&self, k: usize) -> Var {
        self.vars[1 + EDGE_TYPES + k]
    }
    pub fn b_type(&self) -> Var {
        self.at(0)
    }
    pub fn w_pos(&self) -> Var {
        self.at(1)
    }
    pub fn b_pos(&self) -> Var {
        self.at(2)
    }
    pub fn gru_wi(&self) -> Var {
        self.at(3)
    }
    pub fn gru_wh(&self) -> Var {
        self.at(4)
    }
    pub fn gru_bi(&self) -> Var {
        self.at(5)
    }
    pub fn gru_bh(&self) -> Var {
        self.at(6)
    }
    pub fn f_w(&self) -> Var {
        self.at(7)
    }
    pub fn f_b(&self) -> Var {
        self.at(8)
    }
    pub fn g_w(&self) -> Var {
        self.at(9)
    }
    pub fn g_b(&self) -> Var {
        self.at(10)
    }

    /// Gradients of every parameter after [`Tape::backward`], zero where
    /// a parameter did not influence the output.
    pub fn grads(&self, tape: &Tape) -> Vec<Tensor> {
        self.vars
            .iter()
            .map(|&v| {
                tape.grad(v)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(tape.value(v).shape()))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ForwardOutput {
    pub h0: Var,
    pub ht: Var,
    /// `n × classes` readout scores.
    pub scores: Var,
}

/// Position gates `2σ(emb(pos) · W_p + b_p)`, one row per position.
fn gate_table(tape: &mut Tape, pv: &ParamVars, positions: &[u32], d: usize) -> Result<Var> {
    let mut data = Vec::with_capacity(positions.len() * d);
    for &p in positions {
        data.extend(sinusoidal_embedding(p, d)?);
    }
    let emb = tape.constant(Tensor::matrix(positions.len(), d, data)?)?;
    let z = tape.matmul(emb, pv.w_pos())?;
    let z = tape.add_row(z, pv.b_pos())?;
    let s = tape.sigmoid(z)?;
    Ok(tape.affine(s, 2.0, 0.0)?)
}

/// Per-batch constants shared by every propagation round.
struct Round {
    edge_gates: Vec<Option<Var>>,
    counts: Var,
    all_targets: Arc<[u32]>,
    d: usize,
}

fn initial_state(tape: &mut Tape, pv: &ParamVars, batch: &EncodedBatch) -> Result<Var> {
    let emb = tape.gather_rows(pv.embedding(), batch.vocab_index.clone())?;
    let selector: Vec<f64> = batch
        .is_root
        .iter()
        .flat_map(|&r| if r { [1.0, 0.0] } else { [0.0, 1.0] })
        .collect();
    let selector = tape.constant(Tensor::matrix(batch.num_vertices, 2, selector)?)?;
    Ok(tape.concat_cols(&[emb, selector])?)
}

fn prepare_round(tape: &mut Tape, pv: &ParamVars, batch: &EncodedBatch) -> Result<Round> {
    let d = tape.value(pv.w_pos()).rows();
    let gates = if batch.positions.is_empty() {
        None
    } else {
        Some(gate_table(tape, pv, &batch.positions, d)?)
    };
    let mut edge_gates = Vec::with_capacity(EDGE_TYPES);
    for e in &batch.edges {
        edge_gates.push(match gates {
            Some(g) if !e.src.is_empty() => Some(tape.gather_rows(g, e.position_index.clone())?),
            _ => None,
        });
    }
    let counts = tape.constant(Tensor::matrix(
        batch.num_vertices,
        EDGE_TYPES,
        batch.type_counts.clone(),
    )?)?;
    let all_targets: Arc<[u32]> = batch.edges.iter().flat_map(|e| e.targets.iter().copied()).collect();
    Ok(Round {
        edge_gates,
        counts,
        all_targets,
        d,
    })
}

/// Runs `steps` rounds of message passing and the readout.
pub fn forward(tape: &mut Tape, pv: &ParamVars, batch: &EncodedBatch, steps: usize) -> Result<ForwardOutput> {
    let h0 = initial_state(tape, pv, batch)?;
    let mut h = h0;
    if steps > 0 {
        let round = prepare_round(tape, pv, batch)?;
        for _ in 0..steps {
            h = step(tape, pv, batch, h, &round)?;
        }
    }
    let scores = readout(tape, pv, h, h0)?;
    Ok(ForwardOutput { h0, ht: h, scores })
}

/// Values of [`forward`] without gradients. Each round runs on a fresh tape
/// so memory stays flat in `steps`; results are bitwise equal to `forward`.
pub fn forward_values(params: &ModelParams, batch: &EncodedBatch, steps: usize) -> Result<ForwardValues> {
    let mut tape = Tape::new();
    let pv = ParamVars::register(&mut tape, params, false)?;
    let h0v = initial_state(&mut tape, &pv, batch)?;
    let h0 = tape.value(h0v).clone();
    let mut h = h0.clone();
    for _ in 0..steps {
        let mut tape = Tape::new();
        let pv = ParamVars::register(&mut tape, params, false)?;
        let round = prepare_round(&mut tape, &pv, batch)?;
        let hv = tape.constant(h)?;
        let next = step(&mut tape, &pv, batch, hv, &round)?;
        h = tape.value(next).clone();
    }
    let mut tape = Tape::new();
    let pv = ParamVars::register(&mut tape, params, false)?;
    let (hv, h0v) = (tape.constant(h.clone())?, tape.constant(h0.clone())?);
    let scores = readout(&mut tape, &pv, hv, h0v)?;
    let scores = tape.value(scores).clone();
    Ok(ForwardValues { h0, ht: h, scores })
}

/// Plain tensors produced by [`forward_values`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardValues {
    pub h0: Tensor,
    pub ht: Tensor,
    pub scores: Tensor,
}

fn step(tape: &mut Tape, pv: &ParamVars, batch: &EncodedBatch, h: Var, round: &Round) -> Result<Var> {
    let Round {
        edge_gates,
        counts,
        all_targets,
        d,
    } = round;
    let n = batch.num_vertices;
    // Messages are linear in the gated source state, so per type the gated
    // states are summed per destination first and transformed once.
    let mut per_type = Vec::with_capacity(EDGE_TYPES);
    for (t, e) in batch.edges.iter().enumerate() {
        let Some(gate) = edge_gates[t] else { continue };
        let src = tape.gather_rows(h, e.src.clone())?;
        let gated = tape.mul(src, gate)?;
        let summed = tape.segment_sum(gated, e.target_slot.clone(), e.targets.len())?;
        per_type.push(tape.matmul(summed, pv.w_type(t))?);
    }
    let bias = tape.matmul(*counts, pv.b_type())?;
    let total = if per_type.is_empty() {
        bias
    } else {
        let stacked = tape.concat_rows(&per_type)?;
        let scattered = tape.segment_sum(stacked, all_targets.clone(), n)?;
        tape.add(scattered, bias)?
    };
    let aggregate = tape.scale_rows(total, batch.inv_degree.clone())?;
    gru(tape, pv, aggregate, h, *d)
}

/// `r = σ(x W_ir + b_ir + h W_hr + b_hr)`, `z` likewise,
/// `n = tanh(x W_in + b_in + r ⊙ (h W_hn + b_hn))`, `h' = (1 − z) ⊙ n + z ⊙ h`.
fn gru(tape: &mut Tape, pv: &ParamVars, x: Var, h: Var, d: usize) -> Result<Var> {
    let gi = tape.matmul(x, pv.gru_wi())?;
    let gi = tape.add_row(gi, pv.gru_bi())?;
    let gh = tape.matmul(h, pv.gru_wh())?;
    let gh = tape.add_row(gh, pv.gru_bh())?;
    let (ir, iz, in_) = (
        tape.slice_cols(gi, 0, d)?,
        tape.slice_cols(gi, d, 2 * d)?,
        tape.slice_cols(gi, 2 * d, 3 * d)?,
    );
    let (hr, hz, hn) = (
        tape.slice_cols(gh, 0, d)?,
        tape.slice_cols(gh, d, 2 * d)?,
        tape.slice_cols(gh, 2 * d, 3 * d)?,
    );
    let r = tape.add(ir, hr)?;
    let r = tape.sigmoid(r)?;
    let z = tape.add(iz, hz)?;
    let z = tape.sigmoid(z)?;
    let rh = tape.mul(r, hn)?;
    let cand = tape.add(in_, rh)?;
    let cand = tape.tanh(cand)?;
    let diff = tape.sub(h, cand)?;
    let keep = tape.mul(z, diff)?;
    Ok(tape.add(cand, keep)?)
}

/// `σ(f([h_T; h_0])) ⊙ g(h_T)` per vertex and class.
pub fn readout(tape: &mut Tape, pv: &ParamVars, ht: Var, h0: Var) -> Result<Var> {
    let both = tape.concat_cols(&[ht, h0])?;
    let f = tape.matmul(both, pv.f_w())?;
    let f = tape.add_row(f, pv.f_b())?;
    let gate = tape.sigmoid(f)?;
    let g = tape.matmul(ht, pv.g_w())?;
    let g = tape.add_row(g, pv.g_b())?;
    Ok(tape.mul(gate, g)?)
}

/// The message a vertex in state `h` sends along one edge of type
/// `edge_type` at `position`: `W_t (h ⊙ p(pos)) + b_t`.
pub fn message(params: &ModelParams, h: &[f64], edge_type: usize, position: u32) -> Result<Vec<f64>> {
    let d = params.d();
    let mut tape = Tape::new();
    let pv = ParamVars::register(&mut tape, params, false)?;
    let gate = gate_table(&mut tape, &pv, &[position], d)?;
    let hv = tape.constant(Tensor::matrix(1, d, h.to_vec())?)?;
    let gated = tape.mul(hv, gate)?;
    let m = tape.matmul(gated, pv.w_type(edge_type))?;
    let bias = tape.gather_rows(pv.b_type(), Arc::from(vec![edge_type as u32]))?;
    let out = tape.add(m, bias)?;
    Ok(tape.value(out).data().to_vec())
}
