//! Per-channel batch normalization over a batch of `[C,H,W]` maps.

use crate::error::{check_dim, Error, Result};
use crate::tensor::Tensor;

pub const EPSILON: f64 = 1e-5;
pub const MOMENTUM: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats {
    pub mean: Tensor,
    pub var: Tensor,
}

impl RunningStats {
    pub fn new(channels: usize) -> Self {
        RunningStats {
            mean: Tensor::zeros(&[channels]),
            var: Tensor::ones(&[channels]),
        }
    }
}

/// Saved forward values needed by [`batch_norm_backward`].
#[derive(Clone, Debug)]
pub struct BatchNormCache {
    normalized: Vec<Tensor>,
    inv_std: Vec<f64>,
    mode: Mode,
}

pub fn batch_norm(
    xs: &[Tensor],
    gamma: &Tensor,
    beta: &Tensor,
    mode: Mode,
    stats: &mut RunningStats,
) -> Result<(Vec<Tensor>, BatchNormCache)> {
    let first = xs
        .first()
        .ok_or_else(|| Error::invalid("batch_norm", "empty batch"))?;
    let (c, h, w) = first.chw()?;
    for x in xs {
        first.expect_same_shape("batch_norm", x)?;
    }
    check_dim("batch_norm", "gamma length", gamma.len(), c)?;
    check_dim("batch_norm", "beta length", beta.len(), c)?;
    check_dim("batch_norm", "running mean length", stats.mean.len(), c)?;
    let plane = h * w;
    let count = (xs.len() * plane) as f64;

    let (mean, var): (Vec<f64>, Vec<f64>) = match mode {
        Mode::Train => (0..c)
            .map(|ci| {
                let chan = || xs.iter().flat_map(|x| &x.data()[ci * plane..(ci + 1) * plane]);
                let mean = chan().sum::<f64>() / count;
                let var = chan().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
                (mean, var)
            })
            .unzip(),
        Mode::Eval => (stats.mean.data().to_vec(), stats.var.data().to_vec()),
    };

    if mode == Mode::Train {
        let unbias = if count > 1.0 { count / (count - 1.0) } else { 1.0 };
        for ci in 0..c {
            let rm = &mut stats.mean.data_mut()[ci];
            *rm = (1.0 - MOMENTUM) * *rm + MOMENTUM * mean[ci];
            let rv = &mut stats.var.data_mut()[ci];
            *rv = (1.0 - MOMENTUM) * *rv + MOMENTUM * var[ci] * unbias;
        }
    }

    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + EPSILON).sqrt()).collect();
    let mut normalized = Vec::with_capacity(xs.len());
    let mut outputs = Vec::with_capacity(xs.len());
    for x in xs {
        let mut xhat = x.clone();
        let mut y = x.clone();
        for ci in 0..c {
            let (g, b) = (gamma.data()[ci], beta.data()[ci]);
            let range = ci * plane..(ci + 1) * plane;
            for (nh, out) in xhat.data_mut()[range.clone()]
                .iter_mut()
                .zip(&mut y.data_mut()[range])
            {
                *nh = (*nh - mean[ci]) * inv_std[ci];
                *out = g * *nh + b;
            }
        }
        normalized.push(xhat);
        outputs.push(y);
    }
    Ok((
        outputs,
        BatchNormCache {
            normalized,
            inv_std,
            mode,
        },
    ))
}

/// Returns `(grad_inputs, grad_gamma, grad_beta)`.
pub fn batch_norm_backward(
    cache: &BatchNormCache,
    gamma: &Tensor,
    upstream: &[Tensor],
) -> Result<(Vec<Tensor>, Tensor, Tensor)> {
    check_dim(
        "batch_norm_backward",
        "batch size",
        upstream.len(),
        cache.normalized.len(),
    )?;
    let (c, h, w) = cache.normalized[0].chw()?;
    let plane = h * w;
    let count = (upstream.len() * plane) as f64;
    let mut grad_gamma = vec![0.0; c];
    let mut grad_beta = vec![0.0; c];
    for (g, xhat) in upstream.iter().zip(&cache.normalized) {
        xhat.expect_same_shape("batch_norm_backward", g)?;
        for ci in 0..c {
            let range = ci * plane..(ci + 1) * plane;
            for (gv, xv) in g.data()[range.clone()].iter().zip(&xhat.data()[range]) {
                grad_gamma[ci] += gv * xv;
                grad_beta[ci] += gv;
            }
        }
    }
    let mut grads = Vec::with_capacity(upstream.len());
    for (g, xhat) in upstream.iter().zip(&cache.normalized) {
        let mut gx = g.clone();
        for ci in 0..c {
            let scale = gamma.data()[ci] * cache.inv_std[ci];
            let range = ci * plane..(ci + 1) * plane;
            match cache.mode {
                Mode::Train => {
                    for (out, xv) in gx.data_mut()[range.clone()].iter_mut().zip(&xhat.data()[range]) {
                        *out = scale
                            * (*out - grad_beta[ci] / count - xv * grad_gamma[ci] / count);
                    }
                }
                Mode::Eval => gx.data_mut()[range].iter_mut().for_each(|v| *v *= scale),
            }
        }
        grads.push(gx);
    }
    Ok((
        grads,
        Tensor::from_vec(&[c], grad_gamma)?,
        Tensor::from_vec(&[c], grad_beta)?,
    ))
}
