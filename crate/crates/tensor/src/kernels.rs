//! Matrix kernels. Loops are ordered so the innermost one is a contiguous
//! `axpy`, which the compiler vectorises without changing summation order.

/// `out[n×m] += a[n×k] · b[k×m]`.
pub fn matmul_nn(a: &[f64], b: &[f64], out: &mut [f64], n: usize, k: usize, m: usize) {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), k * m);
    debug_assert_eq!(out.len(), n * m);
    for (arow, orow) in a.chunks_exact(k.max(1)).zip(out.chunks_exact_mut(m.max(1))) {
        for (&av, brow) in arow.iter().zip(b.chunks_exact(m.max(1))) {
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `out[k×m] += aᵀ · b` for `a[n×k]`, `b[n×m]`.
pub fn matmul_tn(a: &[f64], b: &[f64], out: &mut [f64], n: usize, k: usize, m: usize) {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), n * m);
    debug_assert_eq!(out.len(), k * m);
    for (arow, brow) in a.chunks_exact(k.max(1)).zip(b.chunks_exact(m.max(1))) {
        for (&av, orow) in arow.iter().zip(out.chunks_exact_mut(m.max(1))) {
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// Transpose of a row-major `rows×cols` matrix.
pub fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; a.len()];
    for i in 0..rows {
        for j in 0..cols {
            t[j * rows + i] = a[i * cols + j];
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                out[i * m + j] = (0..k).map(|p| a[i * k + p] * b[p * m + j]).sum();
            }
        }
        out
    }

    #[test]
    fn kernels_agree_with_naive_product() {
        let (n, k, m) = (3, 4, 5);
        let a: Vec<f64> = (0..n * k).map(|x| x as f64 * 0.5 - 2.0).collect();
        let b: Vec<f64> = (0..k * m).map(|x| (x as f64).sin()).collect();
        let mut out = vec![0.0; n * m];
        matmul_nn(&a, &b, &mut out, n, k, m);
        assert_eq!(out, naive(&a, &b, n, k, m));

        let at = transpose(&a, n, k);
        let mut out2 = vec![0.0; n * m];
        matmul_tn(&at, &b, &mut out2, k, n, m);
        for (x, y) in out.iter().zip(&out2) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(transpose(&at, k, n), a);
    }
}
