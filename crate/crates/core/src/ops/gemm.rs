//! Small row-major matrix products on flat slices. Each output element is
//! reduced in a fixed order, so results do not depend on the thread count.

use rayon::prelude::*;

/// `out[r, p] = sum_k a[r, k] * b[k, p]` with `a: rows x inner`, `b: inner x cols`.
pub(crate) fn matmul(a: &[f64], b: &[f64], rows: usize, inner: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    out.par_chunks_mut(cols).enumerate().for_each(|(r, o)| {
        for kk in 0..inner {
            let av = a[r * inner + kk];
            if av == 0.0 {
                continue;
            }
            for (ov, bv) in o.iter_mut().zip(&b[kk * cols..(kk + 1) * cols]) {
                *ov += av * bv;
            }
        }
    });
    out
}

/// `out[k, p] = sum_r a[r, k] * g[r, p]`, i.e. `a^T g`.
pub(crate) fn matmul_tn(a: &[f64], g: &[f64], rows: usize, inner: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; inner * cols];
    out.par_chunks_mut(cols).enumerate().for_each(|(kk, o)| {
        for r in 0..rows {
            let av = a[r * inner + kk];
            if av == 0.0 {
                continue;
            }
            for (ov, gv) in o.iter_mut().zip(&g[r * cols..(r + 1) * cols]) {
                *ov += av * gv;
            }
        }
    });
    out
}

/// `out[r, k] = sum_p g[r, p] * b[k, p]`, i.e. `g b^T`.
pub(crate) fn matmul_nt(g: &[f64], b: &[f64], rows: usize, inner: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * inner];
    out.par_chunks_mut(inner).enumerate().for_each(|(r, o)| {
        let gr = &g[r * cols..(r + 1) * cols];
        for (kk, ov) in o.iter_mut().enumerate() {
            *ov = dot(gr, &b[kk * cols..(kk + 1) * cols]);
        }
    });
    out
}

/// Dot product with four interleaved partial sums, combined in a fixed order.
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let xs = x.chunks_exact(4);
    let ys = y.chunks_exact(4);
    let tail: f64 = xs.remainder().iter().zip(ys.remainder()).map(|(a, b)| a * b).sum();
    for (a, b) in xs.zip(ys) {
        for l in 0..4 {
            acc[l] += a[l] * b[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_agree_with_definition() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let b = [1.0, 0.0, -1.0, 2.0, 0.5, 1.0]; // 3x2
        assert_eq!(matmul(&a, &b, 2, 3, 2), vec![0.5, 7.0, 2.0, 16.0]);
        // a^T (2x3 -> 3x2) times g (2x2)
        let g = [1.0, 1.0, 0.0, 2.0];
        assert_eq!(matmul_tn(&a, &g, 2, 3, 2), vec![1.0, 9.0, 2.0, 12.0, 3.0, 15.0]);
        // g (2x2) times b'^T where b' is 3x2
        assert_eq!(matmul_nt(&g, &b, 2, 3, 2), vec![1.0, 1.0, 1.5, 0.0, 4.0, 2.0]);
    }
}
