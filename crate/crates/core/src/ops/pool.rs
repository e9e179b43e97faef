use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-channel spatial maximum of a `[C,H,W]` map.
///
/// Also returns the flat position (row-major within the plane) of the
/// first maximum of each channel, which is where the backward pass routes
/// the gradient.
pub fn global_max_pool(x: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let (c, h, w) = x.chw()?;
    let plane = h * w;
    let mut values = Vec::with_capacity(c);
    let mut argmax = Vec::with_capacity(c);
    for chunk in x.data().chunks(plane) {
        let mut best = 0;
        for (p, &v) in chunk.iter().enumerate() {
            if v > chunk[best] {
                best = p;
            }
        }
        values.push(chunk[best]);
        argmax.push(best);
    }
    Ok((Tensor::from_vec(&[c], values)?, argmax))
}

pub fn global_max_pool_backward(
    shape: (usize, usize, usize),
    argmax: &[usize],
    upstream: &Tensor,
) -> Result<Tensor> {
    let (c, h, w) = shape;
    if argmax.len() != c || upstream.len() != c {
        return Err(Error::invalid(
            "global_max_pool_backward",
            format!("expected {c} channels, got {} / {}", argmax.len(), upstream.len()),
        ));
    }
    let mut out = Tensor::zeros(&[c, h, w]);
    let plane = h * w;
    for (ci, (&p, &g)) in argmax.iter().zip(upstream.data()).enumerate() {
        out.data_mut()[ci * plane + p] = g;
    }
    Ok(out)
}

/// 2x2 average pooling with stride 2; height and width must be even.
pub fn avg_down2(x: &Tensor) -> Result<Tensor> {
    let (c, h, w) = x.chw()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::invalid(
            "avg_down2",
            format!("spatial extents {h}x{w} must be even"),
        ));
    }
    let (oh, ow) = (h / 2, w / 2);
    let src = x.data();
    let mut out = vec![0.0; c * oh * ow];
    for ci in 0..c {
        for i in 0..oh {
            for j in 0..ow {
                let base = ci * h * w + 2 * i * w + 2 * j;
                out[(ci * oh + i) * ow + j] =
                    0.25 * (src[base] + src[base + 1] + src[base + w] + src[base + w + 1]);
            }
        }
    }
    Tensor::from_vec(&[c, oh, ow], out)
}

pub fn avg_down2_backward(upstream: &Tensor) -> Result<Tensor> {
    let (c, oh, ow) = upstream.chw()?;
    let (h, w) = (2 * oh, 2 * ow);
    let g = upstream.data();
    let mut out = vec![0.0; c * h * w];
    for ci in 0..c {
        for i in 0..h {
            for j in 0..w {
                out[(ci * h + i) * w + j] = 0.25 * g[(ci * oh + i / 2) * ow + j / 2];
            }
        }
    }
    Tensor::from_vec(&[c, h, w], out)
}
