use std::sync::Arc;

use crate::kernels::{matmul_nn, matmul_tn, transpose};
use crate::{Result, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Affine(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Arc<[u32]>),
    SegmentSum(Var, Arc<[u32]>),
    ScaleRows(Var, Arc<[f64]>),
    Sum(Var),
    SoftmaxXent {
        logits: Var,
        targets: Arc<[u32]>,
        mask: Arc<[bool]>,
        count: usize,
    },
    BceLogits {
        logits: Var,
        targets: Arc<[f64]>,
        mask: Arc<[bool]>,
        count: usize,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Records operations for one forward pass and differentiates them.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool, name: &'static str) -> Result<Var> {
        if !value.is_finite() {
            return Err(TensorError::NonFiniteValue { op: name });
        }
        self.nodes.push(Node { value, op, needs_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A constant input; no gradient is tracked for it.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Leaf, false, "constant")
    }

    /// A differentiable input.
    pub fn param(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Leaf, true, "param")
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last [`Tape::backward`] target with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    fn matrix_dims(&self, v: Var, op: &'static str) -> Result<(usize, usize)> {
        let t = self.value(v);
        match t.shape() {
            [r, c] => Ok((*r, *c)),
            _ => Err(mismatch(op, t, t)),
        }
    }

    /// `a[n×k] · b[k×m]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (n, k) = self.matrix_dims(a, "matmul")?;
        let (k2, m) = self.matrix_dims(b, "matmul")?;
        if k != k2 {
            return Err(mismatch("matmul", self.value(a), self.value(b)));
        }
        let mut out = vec![0.0; n * m];
        matmul_nn(self.value(a).data(), self.value(b).data(), &mut out, n, k, m);
        let needs = self.needs(a) || self.needs(b);
        self.push(Tensor::matrix(n, m, out)?, Op::MatMul(a, b), needs, "matmul")
    }

    fn zip(&mut self, a: Var, b: Var, name: &'static str, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch(name, ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = ta.with_data(data);
        let needs = self.needs(a) || self.needs(b);
        self.push(value, op, needs, name)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds the vector `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if tb.shape().len() != 1 || tb.len() != ta.cols() || ta.shape().len() != 2 {
            return Err(mismatch("add_row", ta, tb));
        }
        let mut data = ta.data().to_vec();
        for row in data.chunks_exact_mut(tb.len().max(1)) {
            for (x, y) in row.iter_mut().zip(tb.data()) {
                *x += y;
            }
        }
        let value = ta.with_data(data);
        let needs = self.needs(a) || self.needs(b);
        self.push(value, Op::AddRow(a, b), needs, "add_row")
    }

    /// `scale · a + shift`.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Result<Var> {
        let value = self.value(a).map(|x| scale * x + shift);
        let needs = self.needs(a);
        self.push(value, Op::Affine(a, scale), needs, "affine")
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(sigmoid);
        let needs = self.needs(a);
        self.push(value, Op::Sigmoid(a), needs, "sigmoid")
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(f64::tanh);
        let needs = self.needs(a);
        self.push(value, Op::Tanh(a), needs, "tanh")
    }

    /// Side-by-side concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.matrix_dims(parts[0], "concat_cols")?.0;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.matrix_dims(p, "concat_cols")?;
            if r != rows {
                return Err(mismatch("concat_cols", self.value(parts[0]), self.value(p)));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(i));
            }
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        self.push(
            Tensor::matrix(rows, total, data)?,
            Op::ConcatCols(parts.to_vec()),
            needs,
            "concat_cols",
        )
    }

    /// Stacks matrices with equal column counts.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = self.matrix_dims(parts[0], "concat_rows")?.1;
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let (r, c) = self.matrix_dims(p, "concat_rows")?;
            if c != cols {
                return Err(mismatch("concat_rows", self.value(parts[0]), self.value(p)));
            }
            rows += r;
            data.extend_from_slice(self.value(p).data());
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        self.push(
            Tensor::matrix(rows, cols, data)?,
            Op::ConcatRows(parts.to_vec()),
            needs,
            "concat_rows",
        )
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (rows, cols) = self.matrix_dims(a, "slice_cols")?;
        if start > end || end > cols {
            return Err(mismatch("slice_cols", self.value(a), &Tensor::zeros(&[start, end])));
        }
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(rows * (end - start));
        for i in 0..rows {
            data.extend_from_slice(&src[i * cols + start..i * cols + end]);
        }
        let needs = self.needs(a);
        self.push(
            Tensor::matrix(rows, end - start, data)?,
            Op::SliceCols(a, start),
            needs,
            "slice_cols",
        )
    }

    /// Rows of `table` selected by `indices`, in order; repeats allowed.
    pub fn gather_rows(&mut self, table: Var, indices: Arc<[u32]>) -> Result<Var> {
        let (rows, cols) = self.matrix_dims(table, "gather_rows")?;
        let src = self.value(table);
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in indices.iter() {
            let i = i as usize;
            if i >= rows {
                return Err(TensorError::IndexOutOfRange {
                    op: "gather_rows",
                    index: i,
                    len: rows,
                });
            }
            data.extend_from_slice(src.row(i));
        }
        let needs = self.needs(table);
        let value = Tensor::matrix(indices.len(), cols, data)?;
        self.push(value, Op::GatherRows(table, indices), needs, "gather_rows")
    }

    /// Sums rows of `a` into `segments` output rows; row `i` goes to
    /// `segment_ids[i]`. Empty segments are zero.
    pub fn segment_sum(&mut self, a: Var, segment_ids: Arc<[u32]>, segments: usize) -> Result<Var> {
        let (rows, cols) = self.matrix_dims(a, "segment_sum")?;
        if segment_ids.len() != rows {
            return Err(mismatch(
                "segment_sum",
                self.value(a),
                &Tensor::zeros(&[segment_ids.len()]),
            ));
        }
        let src = self.value(a).data();
        let mut data = vec![0.0; segments * cols];
        for (i, &s) in segment_ids.iter().enumerate() {
            let s = s as usize;
            if s >= segments {
                return Err(TensorError::IndexOutOfRange {
                    op: "segment_sum",
                    index: s,
                    len: segments,
                });
            }
            for (o, &x) in data[s * cols..(s + 1) * cols]
                .iter_mut()
                .zip(&src[i * cols..(i + 1) * cols])
            {
                *o += x;
            }
        }
        let needs = self.needs(a);
        let value = Tensor::matrix(segments, cols, data)?;
        self.push(value, Op::SegmentSum(a, segment_ids), needs, "segment_sum")
    }

    /// Multiplies row `i` of `a` by the constant `factors[i]`.
    pub fn scale_rows(&mut self, a: Var, factors: Arc<[f64]>) -> Result<Var> {
        let (rows, cols) = self.matrix_dims(a, "scale_rows")?;
        if factors.len() != rows {
            return Err(mismatch("scale_rows", self.value(a), &Tensor::zeros(&[factors.len()])));
        }
        let mut data = self.value(a).data().to_vec();
        for (row, &f) in data.chunks_exact_mut(cols.max(1)).zip(factors.iter()) {
            for x in row {
                *x *= f;
            }
        }
        let value = self.value(a).with_data(data);
        let needs = self.needs(a);
        self.push(value, Op::ScaleRows(a, factors), needs, "scale_rows")
    }

    /// Mean of the rows assigned to each segment; empty segments are zero.
    pub fn segment_mean(&mut self, a: Var, segment_ids: Arc<[u32]>, segments: usize) -> Result<Var> {
        let mut counts = vec![0usize; segments];
        for &s in segment_ids.iter() {
            if let Some(c) = counts.get_mut(s as usize) {
                *c += 1;
            }
        }
        let sum = self.segment_sum(a, segment_ids, segments)?;
        let inv: Arc<[f64]> = counts
            .iter()
            .map(|&c| if c == 0 { 0.0 } else { 1.0 / c as f64 })
            .collect();
        self.scale_rows(sum, inv)
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        let needs = self.needs(a);
        self.push(Tensor::scalar(s), Op::Sum(a), needs, "sum")
    }

    /// Mean softmax cross-entropy of `logits[n×c]` against class
    /// `targets[i]` over the rows with `mask[i]` set.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: Arc<[u32]>, mask: Arc<[bool]>) -> Result<Var> {
        let (rows, cols) = self.matrix_dims(logits, "softmax_cross_entropy")?;
        if targets.len() != rows || mask.len() != rows {
            return Err(mismatch(
                "softmax_cross_entropy",
                self.value(logits),
                &Tensor::zeros(&[targets.len()]),
            ));
        }
        let count = mask.iter().filter(|&&m| m).count();
        if count == 0 {
            return Err(TensorError::EmptyMask);
        }
        let x = self.value(logits);
        let mut total = 0.0;
        for i in (0..rows).filter(|&i| mask[i]) {
            let t = targets[i] as usize;
            if t >= cols {
                return Err(TensorError::IndexOutOfRange {
                    op: "softmax_cross_entropy",
                    index: t,
                    len: cols,
                });
            }
            let row = x.row(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[t];
        }
        let needs = self.needs(logits);
        let op = Op::SoftmaxXent {
            logits,
            targets,
            mask,
            count,
        };
        self.push(Tensor::scalar(total / count as f64), op, needs, "softmax_cross_entropy")
    }

    /// Mean binary cross-entropy of sigmoid(`logits`) against `targets`
    /// in `[0, 1]` over the masked elements.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Arc<[f64]>, mask: Arc<[bool]>) -> Result<Var> {
        let x = self.value(logits);
        if targets.len() != x.len() || mask.len() != x.len() {
            return Err(mismatch("bce_with_logits", x, &Tensor::zeros(&[targets.len()])));
        }
        let count = mask.iter().filter(|&&m| m).count();
        if count == 0 {
            return Err(TensorError::EmptyMask);
        }
        let mut total = 0.0;
        for (i, &z) in x.data().iter().enumerate().filter(|(i, _)| mask[*i]) {
            // max(z, 0) - z t + ln(1 + e^{-|z|})
            total += z.max(0.0) - z * targets[i] + (-z.abs()).exp().ln_1p();
        }
        let needs = self.needs(logits);
        let op = Op::BceLogits {
            logits,
            targets,
            mask,
            count,
        };
        self.push(Tensor::scalar(total / count as f64), op, needs, "bce_with_logits")
    }

    fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    /// Reverse pass from the scalar `output`. Each recorded node is visited
    /// once, newest first.
    pub fn backward(&mut self, output: Var) -> Result<()> {
        if self.value(output).len() != 1 {
            return Err(mismatch("backward", self.value(output), &Tensor::scalar(0.0)));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::full(self.value(output).shape(), 1.0));

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let needs = |v: Var| self.nodes[v.0].needs_grad;
            let val = |v: Var| &self.nodes[v.0].value;
            match &node.op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                    continue;
                }
                &Op::MatMul(a, b) => {
                    let (n, k) = (val(a).rows(), val(a).cols());
                    let m = val(b).cols();
                    if needs(a) {
                        let bt = transpose(val(b).data(), k, m);
                        let mut ga = vec![0.0; n * k];
                        matmul_nn(g.data(), &bt, &mut ga, n, m, k);
                        Self::accumulate(&mut grads, a, Tensor::matrix(n, k, ga)?);
                    }
                    if needs(b) {
                        let mut gb = vec![0.0; k * m];
                        matmul_tn(val(a).data(), g.data(), &mut gb, n, k, m);
                        Self::accumulate(&mut grads, b, Tensor::matrix(k, m, gb)?);
                    }
                }
                &Op::Add(a, b) => {
                    if needs(a) {
                        Self::accumulate(&mut grads, a, g.clone());
                    }
                    if needs(b) {
                        Self::accumulate(&mut grads, b, g);
                    }
                }
                &Op::Sub(a, b) => {
                    if needs(b) {
                        Self::accumulate(&mut grads, b, g.map(|x| -x));
                    }
                    if needs(a) {
                        Self::accumulate(&mut grads, a, g);
                    }
                }
                &Op::Mul(a, b) => {
                    if needs(a) {
                        let d = g.data().iter().zip(val(b).data()).map(|(x, y)| x * y).collect();
                        Self::accumulate(&mut grads, a, g.with_data(d));
                    }
                    if needs(b) {
                        let d = g.data().iter().zip(val(a).data()).map(|(x, y)| x * y).collect();
                        Self::accumulate(&mut grads, b, g.with_data(d));
                    }
                }
                &Op::AddRow(a, b) => {
                    if needs(b) {
                        let cols = val(b).len();
                        let mut gb = vec![0.0; cols];
                        for row in g.data().chunks_exact(cols.max(1)) {
                            for (o, x) in gb.iter_mut().zip(row) {
                                *o += x;
                            }
                        }
                        Self::accumulate(&mut grads, b, Tensor::vector(gb));
                    }
                    if needs(a) {
                        Self::accumulate(&mut grads, a, g);
                    }
                }
                &Op::Affine(a, scale) => Self::accumulate(&mut grads, a, g.map(|x| x * scale)),
                &Op::Sigmoid(a) => {
                    let d = g
                        .data()
                        .iter()
                        .zip(node.value.data())
                        .map(|(x, s)| x * s * (1.0 - s))
                        .collect();
                    Self::accumulate(&mut grads, a, g.with_data(d));
                }
                &Op::Tanh(a) => {
                    let d = g
                        .data()
                        .iter()
                        .zip(node.value.data())
                        .map(|(x, t)| x * (1.0 - t * t))
                        .collect();
                    Self::accumulate(&mut grads, a, g.with_data(d));
                }
                Op::ConcatCols(parts) => {
                    let (rows, total) = (g.rows(), g.cols());
                    let mut offset = 0;
                    for &p in parts {
                        let c = val(p).cols();
                        if needs(p) {
                            let mut d = Vec::with_capacity(rows * c);
                            for i in 0..rows {
                                d.extend_from_slice(&g.data()[i * total + offset..i * total + offset + c]);
                            }
                            Self::accumulate(&mut grads, p, Tensor::matrix(rows, c, d)?);
                        }
                        offset += c;
                    }
                }
                Op::ConcatRows(parts) => {
                    let cols = g.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let r = val(p).rows();
                        if needs(p) {
                            let d = g.data()[offset * cols..(offset + r) * cols].to_vec();
                            Self::accumulate(&mut grads, p, Tensor::matrix(r, cols, d)?);
                        }
                        offset += r;
                    }
                }
                &Op::SliceCols(a, start) => {
                    let (rows, cols) = (val(a).rows(), val(a).cols());
                    let width = g.cols();
                    let mut d = vec![0.0; rows * cols];
                    for i in 0..rows {
                        d[i * cols + start..i * cols + start + width].copy_from_slice(g.row(i));
                    }
                    Self::accumulate(&mut grads, a, Tensor::matrix(rows, cols, d)?);
                }
                Op::GatherRows(table, indices) => {
                    let (rows, cols) = (val(*table).rows(), val(*table).cols());
                    let mut d = vec![0.0; rows * cols];
                    for (k, &i) in indices.iter().enumerate() {
                        let i = i as usize;
                        for (o, x) in d[i * cols..(i + 1) * cols].iter_mut().zip(g.row(k)) {
                            *o += x;
                        }
                    }
                    Self::accumulate(&mut grads, *table, Tensor::matrix(rows, cols, d)?);
                }
                Op::SegmentSum(a, ids) => {
                    let cols = g.cols();
                    let mut d = Vec::with_capacity(ids.len() * cols);
                    for &s in ids.iter() {
                        d.extend_from_slice(g.row(s as usize));
                    }
                    Self::accumulate(&mut grads, *a, Tensor::matrix(ids.len(), cols, d)?);
                }
                Op::ScaleRows(a, factors) => {
                    let cols = g.cols();
                    let mut d = g.data().to_vec();
                    for (row, &f) in d.chunks_exact_mut(cols.max(1)).zip(factors.iter()) {
                        for x in row {
                            *x *= f;
                        }
                    }
                    Self::accumulate(&mut grads, *a, g.with_data(d));
                }
                &Op::Sum(a) => {
                    let s = g.item();
                    Self::accumulate(&mut grads, a, val(a).map(|_| s));
                }
                Op::SoftmaxXent {
                    logits,
                    targets,
                    mask,
                    count,
                } => {
                    let x = val(*logits);
                    let scale = g.item() / *count as f64;
                    let cols = x.cols();
                    let mut d = vec![0.0; x.len()];
                    for i in (0..x.rows()).filter(|&i| mask[i]) {
                        let row = x.row(i);
                        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let z: f64 = row.iter().map(|v| (v - max).exp()).sum();
                        for j in 0..cols {
                            let p = (row[j] - max).exp() / z;
                            let y = if j == targets[i] as usize { 1.0 } else { 0.0 };
                            d[i * cols + j] = scale * (p - y);
                        }
                    }
                    Self::accumulate(&mut grads, *logits, x.with_data(d));
                }
                Op::BceLogits {
                    logits,
                    targets,
                    mask,
                    count,
                } => {
                    let x = val(*logits);
                    let scale = g.item() / *count as f64;
                    let d = x
                        .data()
                        .iter()
                        .enumerate()
                        .map(|(i, &z)| {
                            if mask[i] {
                                scale * (sigmoid(z) - targets[i])
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    Self::accumulate(&mut grads, *logits, x.with_data(d));
                }
            }
        }
        self.grads = grads;
        Ok(())
    }
}
