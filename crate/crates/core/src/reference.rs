//! Naive nested-loop transcriptions of the forward and backward formulas.
//!
//! Nothing here is used on the training path. These functions exist so the
//! optimized kernels can be checked against a literal reading of the
//! definitions; they index every element directly and share no helpers
//! with the fast implementations.

use crate::paired::{PairedConvParams, ShapeMask};
use crate::svconv::{SvConvLayer, SvKernels};
use crate::tensor::Tensor;

fn at3(t: &Tensor, c: usize, i: isize, j: isize) -> f64 {
    let s = t.shape();
    if i < 0 || j < 0 || i >= s[1] as isize || j >= s[2] as isize {
        return 0.0;
    }
    t.data()[(c * s[1] + i as usize) * s[2] + j as usize]
}

fn at4(t: &Tensor, a: usize, b: usize, c: usize, d: usize) -> f64 {
    let s = t.shape();
    t.data()[((a * s[1] + b) * s[2] + c) * s[3] + d]
}

pub fn conv2d_reference(x: &Tensor, kernels: &Tensor) -> Tensor {
    let (dd, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (ff, k) = (kernels.shape()[0], kernels.shape()[2]);
    let half = (k / 2) as isize;
    let mut out = Tensor::zeros(&[ff, h, w]);
    for f in 0..ff {
        for i in 0..h {
            for j in 0..w {
                let mut acc = 0.0;
                for d in 0..dd {
                    for a in 0..k {
                        for b in 0..k {
                            let (m, n) = (a as isize - half, b as isize - half);
                            acc += at4(kernels, f, d, a, b) * at3(x, d, i as isize - m, j as isize - n);
                        }
                    }
                }
                out.data_mut()[(f * h + i) * w + j] = acc;
            }
        }
    }
    out
}

/// `(grad_input, grad_kernels)` of [`conv2d_reference`] for upstream `g`.
pub fn conv2d_backward_reference(x: &Tensor, kernels: &Tensor, g: &Tensor) -> (Tensor, Tensor) {
    let (dd, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (ff, k) = (kernels.shape()[0], kernels.shape()[2]);
    let half = (k / 2) as isize;
    let mut gx = Tensor::zeros(x.shape());
    let mut gk = Tensor::zeros(kernels.shape());
    for f in 0..ff {
        for i in 0..h {
            for j in 0..w {
                let gv = g.data()[(f * h + i) * w + j];
                for d in 0..dd {
                    for a in 0..k {
                        for b in 0..k {
                            let (si, sj) = (i as isize - (a as isize - half), j as isize - (b as isize - half));
                            if si < 0 || sj < 0 || si >= h as isize || sj >= w as isize {
                                continue;
                            }
                            let xi = (d * h + si as usize) * w + sj as usize;
                            gk.data_mut()[((f * dd + d) * k + a) * k + b] += gv * x.data()[xi];
                            gx.data_mut()[xi] += gv * at4(kernels, f, d, a, b);
                        }
                    }
                }
            }
        }
    }
    (gx, gk)
}

/// 3x3 local convolution of `bank[s]` centred at `(i, j)`.
fn local3(x: &Tensor, bank: &Tensor, s: usize, i: isize, j: isize) -> f64 {
    let dd = x.shape()[0];
    let mut acc = 0.0;
    for d in 0..dd {
        for a in 0..3 {
            for b in 0..3 {
                acc += at4(bank, s, d, a, b) * at3(x, d, i - (a as isize - 1), j - (b as isize - 1));
            }
        }
    }
    acc
}

pub fn paired_conv_reference(x: &Tensor, params: &PairedConvParams) -> Tensor {
    let (h, w) = (x.shape()[1], x.shape()[2]);
    let k = params.extent();
    let half = (k / 2) as isize;
    let mut out = Tensor::zeros(&[k * k, h, w]);
    for m in -half..=half {
        for n in -half..=half {
            let s = ((m + half) * k as isize + (n + half)) as usize;
            for i in 0..h as isize {
                for j in 0..w as isize {
                    let centre = local3(x, &params.center, s, i, j);
                    let (p, q) = (i - m, j - n);
                    let anchor = if p < 0 || q < 0 || p >= h as isize || q >= w as isize {
                        0.0
                    } else {
                        local3(x, &params.offset, s, p, q)
                    };
                    out.data_mut()[(s * h + i as usize) * w + j as usize] = centre - anchor;
                }
            }
        }
    }
    out
}

/// `(grad_features, grad_center, grad_offset)` for upstream `g: [K*K,H,W]`.
pub fn paired_conv_backward_reference(
    x: &Tensor,
    params: &PairedConvParams,
    g: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let (dd, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let k = params.extent();
    let half = (k / 2) as isize;
    let mut gx = Tensor::zeros(x.shape());
    let mut gc = Tensor::zeros(params.center.shape());
    let mut go = Tensor::zeros(params.offset.shape());
    let inside = |i: isize, j: isize| i >= 0 && j >= 0 && i < h as isize && j < w as isize;
    for s in 0..k * k {
        let (m, n) = ((s / k) as isize - half, (s % k) as isize - half);
        for i in 0..h as isize {
            for j in 0..w as isize {
                let gv = g.data()[(s * h + i as usize) * w + j as usize];
                let (p, q) = (i - m, j - n);
                for d in 0..dd {
                    for a in 0..3 {
                        for b in 0..3 {
                            let widx = ((s * dd + d) * 3 + a) * 3 + b;
                            let (ci, cj) = (i - (a as isize - 1), j - (b as isize - 1));
                            if inside(ci, cj) {
                                let xi = (d * h + ci as usize) * w + cj as usize;
                                gc.data_mut()[widx] += gv * x.data()[xi];
                                gx.data_mut()[xi] += gv * params.center.data()[widx];
                            }
                            if inside(p, q) {
                                let (oi, oj) = (p - (a as isize - 1), q - (b as isize - 1));
                                if inside(oi, oj) {
                                    let xi = (d * h + oi as usize) * w + oj as usize;
                                    go.data_mut()[widx] -= gv * x.data()[xi];
                                    gx.data_mut()[xi] -= gv * params.offset.data()[widx];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    (gx, gc, go)
}

/// Full kernels `[F,D,K,K]` equivalent to the layer; a separable layer
/// is expanded as `pointwise[f,d] * depthwise[d,m,n]`.
pub fn expand_kernels(layer: &SvConvLayer) -> Tensor {
    match &layer.kernels {
        SvKernels::Full(t) => t.clone(),
        SvKernels::Separable {
            depthwise,
            pointwise,
        } => {
            let (ff, dd, k) = (pointwise.shape()[0], pointwise.shape()[1], depthwise.shape()[1]);
            let mut out = Tensor::zeros(&[ff, dd, k, k]);
            for f in 0..ff {
                for d in 0..dd {
                    for a in 0..k {
                        for b in 0..k {
                            out.data_mut()[((f * dd + d) * k + a) * k + b] = pointwise.data()[f * dd + d]
                                * depthwise.data()[(d * k + a) * k + b];
                        }
                    }
                }
            }
            out
        }
    }
}

fn mask_value(mask: Option<&ShapeMask>, i: usize, j: usize, m: isize, n: isize) -> f64 {
    mask.map_or(1.0, |mk| mk.at(i, j, m, n))
}

/// Literal five-loop shape-variant convolution on the expanded kernels.
pub fn sv_conv_reference(x: &Tensor, mask: Option<&ShapeMask>, layer: &SvConvLayer) -> Tensor {
    let theta = expand_kernels(layer);
    let (dd, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (ff, k) = (theta.shape()[0], theta.shape()[2]);
    let half = (k / 2) as isize;
    let mut out = Tensor::zeros(&[ff, h, w]);
    for f in 0..ff {
        for i in 0..h {
            for j in 0..w {
                let mut acc = 0.0;
                for d in 0..dd {
                    for m in -half..=half {
                        for n in -half..=half {
                            let masked_theta = mask_value(mask, i, j, m, n)
                                * at4(&theta, f, d, (m + half) as usize, (n + half) as usize);
                            acc += masked_theta * at3(x, d, i as isize - m, j as isize - n);
                        }
                    }
                }
                out.data_mut()[(f * h + i) * w + j] = acc;
            }
        }
    }
    out
}

/// Gradients of the full-kernel form: `(features, mask [K*K,H,W], kernels)`.
pub fn sv_conv_backward_reference(
    x: &Tensor,
    mask: Option<&ShapeMask>,
    theta: &Tensor,
    g: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let (dd, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (ff, k) = (theta.shape()[0], theta.shape()[2]);
    let half = (k / 2) as isize;
    let mut gx = Tensor::zeros(x.shape());
    let mut gm = Tensor::zeros(&[k * k, h, w]);
    let mut gk = Tensor::zeros(theta.shape());
    for f in 0..ff {
        for i in 0..h {
            for j in 0..w {
                let gv = g.data()[(f * h + i) * w + j];
                for d in 0..dd {
                    for m in -half..=half {
                        for n in -half..=half {
                            let (si, sj) = (i as isize - m, j as isize - n);
                            if si < 0 || sj < 0 || si >= h as isize || sj >= w as isize {
                                continue;
                            }
                            let (a, b) = ((m + half) as usize, (n + half) as usize);
                            let s = a * k + b;
                            let xi = (d * h + si as usize) * w + sj as usize;
                            let xv = x.data()[xi];
                            let mv = mask_value(mask, i, j, m, n);
                            let tv = at4(theta, f, d, a, b);
                            gk.data_mut()[((f * dd + d) * k + a) * k + b] += mv * gv * xv;
                            gm.data_mut()[(s * h + i) * w + j] += tv * gv * xv;
                            gx.data_mut()[xi] += mv * tv * gv;
                        }
                    }
                }
            }
        }
    }
    (gx, gm, gk)
}

/// Align-corners-false bilinear upsampling written per output pixel.
pub fn bilinear_reference(x: &Tensor, factor: usize) -> Tensor {
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let mut out = Tensor::zeros(&[c, h * factor, w * factor]);
    let sample = |len: usize, o: usize| -> (usize, usize, f64) {
        let mut pos = (o as f64 + 0.5) * (len as f64 / (len * factor) as f64) - 0.5;
        if pos < 0.0 {
            pos = 0.0;
        }
        let i0 = pos as usize;
        let i0 = if i0 > len - 1 { len - 1 } else { i0 };
        let i1 = if i0 + 1 < len { i0 + 1 } else { len - 1 };
        (i0, i1, pos - i0 as f64)
    };
    for ch in 0..c {
        for oi in 0..h * factor {
            let (y0, y1, ly) = sample(h, oi);
            for oj in 0..w * factor {
                let (x0, x1, lx) = sample(w, oj);
                let v = |r: usize, q: usize| x.data()[(ch * h + r) * w + q];
                let val = (1.0 - ly) * (1.0 - lx) * v(y0, x0)
                    + (1.0 - ly) * lx * v(y0, x1)
                    + ly * (1.0 - lx) * v(y1, x0)
                    + ly * lx * v(y1, x1);
                out.data_mut()[(ch * h * factor + oi) * w * factor + oj] = val;
            }
        }
    }
    out
}
