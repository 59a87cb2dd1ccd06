use crate::{Result, Tape, Tensor, Var};

/// Denominator floor for [`relative_error`], so gradients that are zero up
/// to rounding do not produce huge ratios.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

/// `|a − n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    /// Elements compared.
    pub checked: usize,
    /// Per input: largest relative error among its checked elements.
    pub per_input: Vec<f64>,
}

/// Compares reverse-mode gradients of the scalar `f(inputs)` with central
/// differences `(f(x + ε) − f(x − ε)) / 2ε`.
///
/// `per_input` caps how many elements of each input are probed (evenly
/// spaced, first and last included); `None` probes all of them.
pub fn grad_check<F>(f: F, inputs: &[Tensor], epsilon: f64, per_input: Option<usize>) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    assert!(epsilon > 0.0 && epsilon <= 1e-2, "epsilon must lie in (0, 1e-2]");
    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars = values
            .iter()
            .map(|v| tape.constant(v.clone()))
            .collect::<Result<Vec<_>>>()?;
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).item())
    };

    let mut tape = Tape::new();
    let vars = inputs
        .iter()
        .map(|v| tape.param(v.clone()))
        .collect::<Result<Vec<_>>>()?;
    let out = f(&mut tape, &vars)?;
    tape.backward(out)?;

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        max_absolute_error: 0.0,
        checked: 0,
        per_input: Vec::with_capacity(inputs.len()),
    };
    let mut values = inputs.to_vec();
    for (k, var) in vars.iter().enumerate() {
        let n = inputs[k].len();
        let analytic = tape
            .grad(*var)
            .map(|g| g.data().to_vec())
            .unwrap_or_else(|| vec![0.0; n]);
        let probes: Vec<usize> = match per_input {
            Some(p) if p < n && p > 1 => (0..p).map(|i| i * (n - 1) / (p - 1)).collect(),
            Some(1) if n > 1 => vec![0],
            _ => (0..n).collect(),
        };
        let mut worst = 0.0f64;
        for i in probes {
            let x = values[k].data()[i];
            values[k].data_mut()[i] = x + epsilon;
            let plus = eval(&values)?;
            values[k].data_mut()[i] = x - epsilon;
            let minus = eval(&values)?;
            values[k].data_mut()[i] = x;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let rel = relative_error(analytic[i], numeric);
            worst = worst.max(rel);
            report.max_absolute_error = report.max_absolute_error.max((analytic[i] - numeric).abs());
            report.checked += 1;
        }
        report.max_relative_error = report.max_relative_error.max(worst);
        report.per_input.push(worst);
    }
    Ok(report)
}

fn sample(rows: usize, cols: usize, seed: u64) -> Tensor {
    let data = (0..rows * cols)
        .map(|i| {
            let x = (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ seed.wrapping_mul(0xBF58_476D_1CE4_E5B9);
            ((x >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect();
    Tensor::new(vec![rows, cols], data).expect("shape matches data")
}

/// Gradient checks of each differentiable primitive on small inputs drawn
/// from `seed`, one named report per primitive.
pub fn primitive_suite(seed: u64) -> Result<Vec<(&'static str, GradCheckReport)>> {
    use std::sync::Arc;
    let (n, k, m) = (5, 4, 3);
    let a = sample(n, k, seed);
    let b = sample(k, m, seed ^ 1);
    let c = sample(n, k, seed ^ 2);
    let bias = Tensor::new(vec![k], sample(1, k, seed ^ 3).into_data())?;
    let idx: Arc<[u32]> = Arc::from(vec![4u32, 0, 0, 2, 3]);
    let segs: Arc<[u32]> = Arc::from(vec![0u32, 2, 0, 2, 2]);
    let factors: Arc<[f64]> = Arc::from(vec![0.5, 1.0, 0.0, 2.0, 0.25]);
    let targets: Arc<[u32]> = Arc::from(vec![0u32, 3, 1, 2, 0]);
    let mask: Arc<[bool]> = Arc::from(vec![true, false, true, true, true]);
    let soft: Arc<[f64]> = (0..n * k).map(|i| (i % 3) as f64 / 2.0).collect();
    let bmask: Arc<[bool]> = (0..n * k).map(|i| i % 4 != 0).collect();
    let eps = 1e-5;
    let ab = [a.clone(), b];
    let ac = [a.clone(), c];
    let a1 = [a.clone()];
    let ak = [a, bias];

    let mut out = Vec::new();
    out.push((
        "matmul",
        grad_check(
            |t, v| {
                let y = t.matmul(v[0], v[1])?;
                let y = t.tanh(y)?;
                t.sum(y)
            },
            &ab,
            eps,
            None,
        )?,
    ));
    out.push((
        "add",
        grad_check(
            |t, v| {
                let y = t.add(v[0], v[1])?;
                let y = t.sigmoid(y)?;
                t.sum(y)
            },
            &ac,
            eps,
            None,
        )?,
    ));
    out.push((
        "sub",
        grad_check(
            |t, v| {
                let y = t.sub(v[0], v[1])?;
                let y = t.tanh(y)?;
                t.sum(y)
            },
            &ac,
            eps,
            None,
        )?,
    ));
    out.push((
        "mul",
        grad_check(
            |t, v| {
                let y = t.mul(v[0], v[1])?;
                let y = t.sigmoid(y)?;
                t.sum(y)
            },
            &ac,
            eps,
            None,
        )?,
    ));
    out.push((
        "add_row",
        grad_check(
            |t, v| {
                let y = t.add_row(v[0], v[1])?;
                let y = t.tanh(y)?;
                t.sum(y)
            },
            &ak,
            eps,
            None,
        )?,
    ));
    out.push((
        "affine",
        grad_check(
            |t, v| {
                let y = t.affine(v[0], 2.0, 0.5)?;
                let y = t.sigmoid(y)?;
                t.sum(y)
            },
            &a1,
            eps,
            None,
        )?,
    ));
    out.push((
        "concat_slice",
        grad_check(
            |t, v| {
                let y = t.concat_cols(&[v[0], v[1]])?;
                let y = t.slice_cols(y, 1, k + 1)?;
                let y = t.concat_rows(&[y, v[1]])?;
                let y = t.tanh(y)?;
                t.sum(y)
            },
            &ac,
            eps,
            None,
        )?,
    ));
    out.push((
        "gather_segment",
        grad_check(
            |t, v| {
                let y = t.gather_rows(v[0], idx.clone())?;
                let y = t.tanh(y)?;
                let s = t.segment_sum(y, segs.clone(), 3)?;
                let m = t.segment_mean(y, segs.clone(), 3)?;
                let y = t.mul(s, m)?;
                t.sum(y)
            },
            &a1,
            eps,
            None,
        )?,
    ));
    out.push((
        "scale_rows",
        grad_check(
            |t, v| {
                let y = t.scale_rows(v[0], factors.clone())?;
                let y = t.tanh(y)?;
                t.sum(y)
            },
            &a1,
            eps,
            None,
        )?,
    ));
    out.push((
        "softmax_cross_entropy",
        grad_check(
            |t, v| t.softmax_cross_entropy(v[0], targets.clone(), mask.clone()),
            &a1,
            eps,
            None,
        )?,
    ));
    out.push((
        "bce_with_logits",
        grad_check(
            |t, v| t.bce_with_logits(v[0], soft.clone(), bmask.clone()),
            &a1,
            eps,
            None,
        )?,
    ));
    Ok(out)
}
