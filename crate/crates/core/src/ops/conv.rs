//! Same-size zero-padded 2-D convolution over `[D,H,W]` feature maps.
//!
//! Kernels are `[F,D,k,k]` with `k` odd. Kernel index `a` along an axis
//! corresponds to the signed offset `a - (k-1)/2`, and
//! `out[f,i,j] = sum_{d,m,n} w[f,d,m,n] * x[d,i-m,j-n]`.

use rayon::prelude::*;

use super::gemm::{matmul, matmul_nt, matmul_tn};
use crate::error::{check_dim, Error, Result};
use crate::tensor::Tensor;

/// `out[i,j] += weight * src[i-m, j-n]` over the in-range part of an
/// `h x w` plane; reads outside the plane are zero.
#[inline]
pub(crate) fn shifted_axpy(
    out: &mut [f64],
    src: &[f64],
    h: usize,
    w: usize,
    m: isize,
    n: isize,
    weight: f64,
) {
    let (j_lo, j_hi) = col_range(w, n);
    if j_lo >= j_hi {
        return;
    }
    for i in row_range(h, m) {
        let si = (i as isize - m) as usize;
        let dst = &mut out[i * w + j_lo..i * w + j_hi];
        let s0 = si * w + (j_lo as isize - n) as usize;
        let s = &src[s0..s0 + (j_hi - j_lo)];
        for (o, v) in dst.iter_mut().zip(s) {
            *o += weight * v;
        }
    }
}

/// Output rows `i` with `0 <= i - m < h`.
#[inline]
fn row_range(h: usize, m: isize) -> std::ops::Range<usize> {
    let lo = m.max(0) as usize;
    let hi = (h as isize + m).clamp(0, h as isize) as usize;
    lo.min(hi)..hi
}

#[inline]
fn col_range(w: usize, n: isize) -> (usize, usize) {
    let r = row_range(w, n);
    (r.start, r.end)
}

pub(crate) fn kernel_dims(op: &'static str, kernels: &Tensor) -> Result<(usize, usize, usize)> {
    match *kernels.shape() {
        [f, d, kh, kw] => {
            check_dim(op, "kernel width", kw, kh)?;
            if kh % 2 == 0 {
                return Err(Error::invalid(op, format!("kernel extent {kh} must be odd")));
            }
            Ok((f, d, kh))
        }
        _ => Err(Error::invalid(
            op,
            format!("kernels must be [F,D,k,k], got {:?}", kernels.shape()),
        )),
    }
}

/// Rows `(d, a, b)` of `x[d, i-(a-half), j-(b-half)]`, shape `[D*k*k, H*W]`.
fn im2col(x: &[f64], d: usize, h: usize, w: usize, k: usize) -> Vec<f64> {
    let half = (k / 2) as isize;
    let plane = h * w;
    let kk = k * k;
    let mut cols = vec![0.0; d * kk * plane];
    cols.par_chunks_mut(plane).enumerate().for_each(|(row, o)| {
        let (di, s) = (row / kk, row % kk);
        let (a, b) = ((s / k) as isize, (s % k) as isize);
        shifted_axpy(o, &x[di * plane..(di + 1) * plane], h, w, a - half, b - half, 1.0);
    });
    cols
}

pub fn conv2d(input: &Tensor, kernels: &Tensor) -> Result<Tensor> {
    let (d, h, w) = input.chw()?;
    let (f, kd, k) = kernel_dims("conv2d", kernels)?;
    check_dim("conv2d", "input channels", d, kd)?;
    let plane = h * w;
    let cols = im2col(input.data(), d, h, w, k);
    let out = matmul(kernels.data(), &cols, f, d * k * k, plane);
    Tensor::from_vec(&[f, h, w], out)
}

/// Adjoint of [`conv2d`]: returns `(grad_input, grad_kernels)`.
pub fn conv2d_backward(input: &Tensor, kernels: &Tensor, upstream: &Tensor) -> Result<(Tensor, Tensor)> {
    let (d, h, w) = input.chw()?;
    let (f, kd, k) = kernel_dims("conv2d_backward", kernels)?;
    check_dim("conv2d_backward", "input channels", d, kd)?;
    let (gf, gh, gw) = upstream.chw()?;
    check_dim("conv2d_backward", "upstream channels", gf, f)?;
    check_dim("conv2d_backward", "upstream height", gh, h)?;
    check_dim("conv2d_backward", "upstream width", gw, w)?;
    let half = (k / 2) as isize;
    let plane = h * w;
    let kk = k * k;
    let g = upstream.data();
    let cols = im2col(input.data(), d, h, w, k);
    let gk = matmul_nt(g, &cols, f, d * kk, plane);
    let gcols = matmul_tn(kernels.data(), g, f, d * kk, plane);
    let mut gx = vec![0.0; d * plane];
    gx.par_chunks_mut(plane).enumerate().for_each(|(di, o)| {
        for s in 0..kk {
            let (a, b) = ((s / k) as isize, (s % k) as isize);
            let row = &gcols[(di * kk + s) * plane..(di * kk + s + 1) * plane];
            shifted_axpy(o, row, h, w, half - a, half - b, 1.0);
        }
    });
    Ok((
        Tensor::from_vec(&[d, h, w], gx)?,
        Tensor::from_vec(kernels.shape(), gk)?,
    ))
}

/// Adds `bias[c]` to every position of channel `c`.
pub fn add_channel_bias(x: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (c, h, w) = x.chw()?;
    check_dim("add_channel_bias", "bias length", bias.len(), c)?;
    let plane = h * w;
    let mut out = x.clone();
    for (ci, chunk) in out.data_mut().chunks_mut(plane).enumerate() {
        let b = bias.data()[ci];
        chunk.iter_mut().for_each(|v| *v += b);
    }
    Ok(out)
}

/// Gradient of a channel bias: the per-channel sum of `upstream`.
pub fn channel_sum(upstream: &Tensor) -> Result<Tensor> {
    let (c, h, w) = upstream.chw()?;
    let sums = upstream
        .data()
        .chunks(h * w)
        .map(|p| p.iter().sum())
        .collect();
    Tensor::from_vec(&[c], sums)
}
