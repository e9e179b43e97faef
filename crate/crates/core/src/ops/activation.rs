use crate::error::Result;
use crate::tensor::Tensor;

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Passes `upstream` where `x > 0`; the kink at zero takes the zero branch.
pub fn relu_backward(x: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    x.zip_map(upstream, |v, g| if v > 0.0 { g } else { 0.0 })
}

/// Softmax across channels at every spatial position of a `[C,H,W]` map.
pub fn softmax_channels(x: &Tensor) -> Result<Tensor> {
    let (c, h, w) = x.chw()?;
    let plane = h * w;
    let src = x.data();
    let mut out = vec![0.0; c * plane];
    for p in 0..plane {
        let max = (0..c).map(|ci| src[ci * plane + p]).fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for ci in 0..c {
            let e = (src[ci * plane + p] - max).exp();
            out[ci * plane + p] = e;
            total += e;
        }
        for ci in 0..c {
            out[ci * plane + p] /= total;
        }
    }
    Tensor::from_vec(&[c, h, w], out)
}

/// Adjoint of [`softmax_channels`] given its output `probs`.
pub fn softmax_channels_backward(probs: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    let (c, h, w) = probs.chw()?;
    probs.expect_same_shape("softmax_channels_backward", upstream)?;
    let plane = h * w;
    let y = probs.data();
    let g = upstream.data();
    let mut out = vec![0.0; c * plane];
    for p in 0..plane {
        let inner: f64 = (0..c).map(|ci| y[ci * plane + p] * g[ci * plane + p]).sum();
        for ci in 0..c {
            let idx = ci * plane + p;
            out[idx] = y[idx] * (g[idx] - inner);
        }
    }
    Tensor::from_vec(&[c, h, w], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_definition() {
        let x = Tensor::from_vec(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        let neg = Tensor::full(&[2, 2], -3.0);
        assert_eq!(relu(&neg), Tensor::zeros(&[2, 2]));
        let g = Tensor::ones(&[3]);
        assert_eq!(relu_backward(&x, &g).unwrap().data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn softmax_symmetric_and_stable() {
        let x = Tensor::zeros(&[2, 1, 1]);
        assert_eq!(softmax_channels(&x).unwrap().data(), &[0.5, 0.5]);
        let big = Tensor::from_vec(&[2, 1, 1], vec![1000.0, 0.0]).unwrap();
        let y = softmax_channels(&big).unwrap();
        assert_eq!(y.data()[0], 1.0);
        assert!(y.data()[1] >= 0.0 && y.data()[1] < 1e-300);
        assert!(y.is_finite());
    }
}
