//! Shape-variant convolution.
//!
//! A bank of location-invariant kernels whose taps are reweighted at every
//! output position by a [`ShapeMask`]:
//!
//! ```text
//! out[f,i,j] = sum_{d,m,n} mask[i,j,m,n] * theta[f,d,m,n] * x[d,i-m,j-n]
//! ```
//!
//! The separable form runs a masked depthwise stage followed by a
//! pointwise channel mix. Passing no mask gives the shape-fixed baseline,
//! which is exactly an ordinary (or depthwise-separable) convolution.
//!
//! The per-pixel reweighted kernels are never materialized. Instead each
//! `(channel, offset)` pair gets one masked, shifted copy of its input
//! plane, and the channel contraction becomes a matrix product.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::ops::gemm::{matmul, matmul_nt, matmul_tn};
use crate::paired::{pair_offset, ShapeMask};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub enum SvKernels {
    /// `[F, D, K, K]`
    Full(Tensor),
    /// `[D, K, K]` depthwise taps and `[F, D]` pointwise weights.
    Separable { depthwise: Tensor, pointwise: Tensor },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvConvLayer {
    k: usize,
    in_channels: usize,
    out_channels: usize,
    pub kernels: SvKernels,
}

impl SvConvLayer {
    pub fn full(kernels: Tensor) -> Result<Self> {
        match *kernels.shape() {
            [f, d, k, kw] if k == kw && k % 2 == 1 => Ok(SvConvLayer {
                k,
                in_channels: d,
                out_channels: f,
                kernels: SvKernels::Full(kernels),
            }),
            _ => Err(Error::invalid(
                "sv_conv",
                format!("full kernels must be [F,D,K,K] with K odd, got {:?}", kernels.shape()),
            )),
        }
    }

    pub fn separable(depthwise: Tensor, pointwise: Tensor) -> Result<Self> {
        let (d, k) = match *depthwise.shape() {
            [d, k, kw] if k == kw && k % 2 == 1 => (d, k),
            _ => {
                return Err(Error::invalid(
                    "sv_conv",
                    format!("depthwise kernels must be [D,K,K] with K odd, got {:?}", depthwise.shape()),
                ))
            }
        };
        let f = match *pointwise.shape() {
            [f, pd] => {
                check_dim("sv_conv", "pointwise input channels", pd, d)?;
                f
            }
            _ => {
                return Err(Error::invalid(
                    "sv_conv",
                    format!("pointwise weights must be [F,D], got {:?}", pointwise.shape()),
                ))
            }
        };
        Ok(SvConvLayer {
            k,
            in_channels: d,
            out_channels: f,
            kernels: SvKernels::Separable {
                depthwise,
                pointwise,
            },
        })
    }

    /// He-style fan-in initialization: `sqrt(2 / (D K^2))` for full kernels,
    /// `sqrt(2 / K^2)` depthwise and `sqrt(2 / D)` pointwise.
    pub fn random<R: Rng + ?Sized>(
        k: usize,
        in_channels: usize,
        out_channels: usize,
        separable: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let kk = (k * k) as f64;
        if separable {
            let dw = Tensor::randn(&[in_channels, k, k], (2.0 / kk).sqrt(), rng);
            let pw = Tensor::randn(
                &[out_channels, in_channels],
                (2.0 / in_channels as f64).sqrt(),
                rng,
            );
            Self::separable(dw, pw)
        } else {
            let std = (2.0 / (in_channels as f64 * kk)).sqrt();
            Self::full(Tensor::randn(&[out_channels, in_channels, k, k], std, rng))
        }
    }

    pub fn extent(&self) -> usize {
        self.k
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn is_separable(&self) -> bool {
        matches!(self.kernels, SvKernels::Separable { .. })
    }

    /// Forward pass; `mask = None` is the shape-fixed (constant mask) case.
    pub fn forward(&self, features: &Tensor, mask: Option<&ShapeMask>) -> Result<Tensor> {
        let (d, h, w) = features.chw()?;
        check_dim("sv_conv", "feature channels", d, self.in_channels)?;
        if let Some(mask) = mask {
            self.check_mask(mask, h, w)?;
        }
        let planes = masked_planes(features, mask, self.k);
        let plane = h * w;
        let kk = self.k * self.k;
        let out = match &self.kernels {
            SvKernels::Full(theta) => {
                matmul(theta.data(), &planes, self.out_channels, d * kk, plane)
            }
            SvKernels::Separable {
                depthwise,
                pointwise,
            } => {
                let mid = depthwise_reduce(&planes, depthwise.data(), d, kk, plane);
                matmul(pointwise.data(), &mid, self.out_channels, d, plane)
            }
        };
        Tensor::from_vec(&[self.out_channels, h, w], out)
    }

    /// Adjoint of [`SvConvLayer::forward`]. The mask gradient is only
    /// produced when a mask was supplied.
    pub fn backward(
        &self,
        features: &Tensor,
        mask: Option<&ShapeMask>,
        upstream: &Tensor,
    ) -> Result<SvConvGrads> {
        let (d, h, w) = features.chw()?;
        check_dim("sv_conv_backward", "feature channels", d, self.in_channels)?;
        let (f, gh, gw) = upstream.chw()?;
        check_dim("sv_conv_backward", "upstream channels", f, self.out_channels)?;
        check_dim("sv_conv_backward", "upstream height", gh, h)?;
        check_dim("sv_conv_backward", "upstream width", gw, w)?;
        if let Some(mask) = mask {
            self.check_mask(mask, h, w)?;
        }
        let k = self.k;
        let kk = k * k;
        let plane = h * w;
        let planes = masked_planes(features, mask, k);
        let g = upstream.data();

        // Gradient with respect to each masked plane, laid out [D*K*K, HW].
        let (grad_planes, kernels) = match &self.kernels {
            SvKernels::Full(theta) => {
                let gp = matmul_tn(theta.data(), g, f, d * kk, plane);
                let gk = matmul_nt(g, &planes, f, d * kk, plane);
                (gp, SvKernelGrads::Full(Tensor::from_vec(theta.shape(), gk)?))
            }
            SvKernels::Separable {
                depthwise,
                pointwise,
            } => {
                let mid = depthwise_reduce(&planes, depthwise.data(), d, kk, plane);
                let g_pw = matmul_nt(g, &mid, f, d, plane);
                let g_mid = matmul_tn(pointwise.data(), g, f, d, plane);
                let dw = depthwise.data();
                let mut g_dw = vec![0.0; d * kk];
                g_dw.par_chunks_mut(kk).enumerate().for_each(|(di, o)| {
                    let gm = &g_mid[di * plane..(di + 1) * plane];
                    for (s, ov) in o.iter_mut().enumerate() {
                        let p = &planes[(di * kk + s) * plane..(di * kk + s + 1) * plane];
                        *ov = gm.iter().zip(p).map(|(a, b)| a * b).sum();
                    }
                });
                let mut gp = vec![0.0; d * kk * plane];
                gp.par_chunks_mut(plane).enumerate().for_each(|(row, o)| {
                    let di = row / kk;
                    let wv = dw[row];
                    for (ov, gm) in o.iter_mut().zip(&g_mid[di * plane..(di + 1) * plane]) {
                        *ov = wv * gm;
                    }
                });
                (
                    gp,
                    SvKernelGrads::Separable {
                        depthwise: Tensor::from_vec(depthwise.shape(), g_dw)?,
                        pointwise: Tensor::from_vec(pointwise.shape(), g_pw)?,
                    },
                )
            }
        };

        let x = features.data();
        // d(plane)/d(mask_s) = shifted x_d ; d(plane)/d(shifted x_d) = mask_s
        let grad_mask = mask
            .map(|_| {
                let mut gm = vec![0.0; kk * plane];
                gm.par_chunks_mut(plane).enumerate().for_each(|(s, o)| {
                    let (m, n) = pair_offset(k, s);
                    let mut shifted = vec![0.0; plane];
                    for di in 0..d {
                        shift_into(&mut shifted, &x[di * plane..(di + 1) * plane], h, w, m, n);
                        let gp = &grad_planes[(di * kk + s) * plane..(di * kk + s + 1) * plane];
                        for ((ov, a), b) in o.iter_mut().zip(gp).zip(&shifted) {
                            *ov += a * b;
                        }
                    }
                });
                Tensor::from_vec(&[kk, h, w], gm)
            })
            .transpose()?;

        let mut gx = vec![0.0; d * plane];
        gx.par_chunks_mut(plane).enumerate().for_each(|(di, o)| {
            let mut weighted = vec![0.0; plane];
            for s in 0..kk {
                let (m, n) = pair_offset(k, s);
                let gp = &grad_planes[(di * kk + s) * plane..(di * kk + s + 1) * plane];
                match mask {
                    Some(mask) => {
                        let ms = &mask.planes().data()[s * plane..(s + 1) * plane];
                        for ((wv, a), b) in weighted.iter_mut().zip(gp).zip(ms) {
                            *wv = a * b;
                        }
                        crate::ops::conv::shifted_axpy(o, &weighted, h, w, -m, -n, 1.0);
                    }
                    None => crate::ops::conv::shifted_axpy(o, gp, h, w, -m, -n, 1.0),
                }
            }
        });

        Ok(SvConvGrads {
            features: Tensor::from_vec(&[d, h, w], gx)?,
            mask: grad_mask,
            kernels,
        })
    }

    fn check_mask(&self, mask: &ShapeMask, h: usize, w: usize) -> Result<()> {
        check_dim("sv_conv", "mask extent", mask.extent(), self.k)?;
        check_dim("sv_conv", "mask height", mask.height(), h)?;
        check_dim("sv_conv", "mask width", mask.width(), w)
    }
}

#[derive(Clone, Debug)]
pub enum SvKernelGrads {
    Full(Tensor),
    Separable { depthwise: Tensor, pointwise: Tensor },
}

#[derive(Clone, Debug)]
pub struct SvConvGrads {
    pub features: Tensor,
    /// `[K*K, H, W]`, absent for the shape-fixed case.
    pub mask: Option<Tensor>,
    pub kernels: SvKernelGrads,
}

/// Shape-fixed context: the layer applied under a constant all-ones mask.
pub fn sfc_forward(features: &Tensor, layer: &SvConvLayer) -> Result<Tensor> {
    layer.forward(features, None)
}

/// `dst[i,j] = src[i-m, j-n]`, zero outside.
fn shift_into(dst: &mut [f64], src: &[f64], h: usize, w: usize, m: isize, n: isize) {
    dst.iter_mut().for_each(|v| *v = 0.0);
    crate::ops::conv::shifted_axpy(dst, src, h, w, m, n, 1.0);
}

/// Rows `(d, s)` of `mask_s[i,j] * x_d[i-m, j-n]`, shape `[D*K*K, H*W]`.
fn masked_planes(features: &Tensor, mask: Option<&ShapeMask>, k: usize) -> Vec<f64> {
    let (d, h, w) = features.chw().expect("checked by caller");
    let plane = h * w;
    let kk = k * k;
    let x = features.data();
    let mut out = vec![0.0; d * kk * plane];
    out.par_chunks_mut(plane).enumerate().for_each(|(row, o)| {
        let (di, s) = (row / kk, row % kk);
        let (m, n) = pair_offset(k, s);
        crate::ops::conv::shifted_axpy(o, &x[di * plane..(di + 1) * plane], h, w, m, n, 1.0);
        if let Some(mask) = mask {
            let ms = &mask.planes().data()[s * plane..(s + 1) * plane];
            for (v, mv) in o.iter_mut().zip(ms) {
                *v *= mv;
            }
        }
    });
    out
}

/// `mid[d, p] = sum_s dw[d, s] * planes[(d, s), p]`.
fn depthwise_reduce(planes: &[f64], dw: &[f64], d: usize, kk: usize, plane: usize) -> Vec<f64> {
    let mut mid = vec![0.0; d * plane];
    mid.par_chunks_mut(plane).enumerate().for_each(|(di, o)| {
        for s in 0..kk {
            let wv = dw[di * kk + s];
            let p = &planes[(di * kk + s) * plane..(di * kk + s + 1) * plane];
            for (ov, pv) in o.iter_mut().zip(p) {
                *ov += wv * pv;
            }
        }
    });
    mid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::conv2d;
    use crate::paired::pair_index;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn ones_mask_is_plain_convolution() {
        let mut r = rng(10);
        let layer = SvConvLayer::random(5, 2, 3, false, &mut r).unwrap();
        let x = Tensor::randn(&[2, 7, 6], 1.0, &mut r);
        let mask = ShapeMask::ones(5, 7, 6);
        let SvKernels::Full(theta) = &layer.kernels else { unreachable!() };
        let reference = conv2d(&x, theta).unwrap();
        let masked = layer.forward(&x, Some(&mask)).unwrap();
        let fixed = sfc_forward(&x, &layer).unwrap();
        assert!(masked.max_abs_diff(&reference).unwrap() < 1e-12);
        assert!(fixed.max_abs_diff(&masked).unwrap() < 1e-12);
    }

    #[test]
    fn centre_only_mask_collapses_to_pointwise() {
        let mut r = rng(11);
        let k = 3;
        let layer = SvConvLayer::random(k, 2, 2, false, &mut r).unwrap();
        let x = Tensor::randn(&[2, 4, 4], 1.0, &mut r);
        let mut planes = Tensor::zeros(&[9, 4, 4]);
        let c = pair_index(k, 0, 0);
        planes.data_mut()[c * 16..(c + 1) * 16].fill(1.0);
        let mask = ShapeMask::from_planes(k, planes, 3.0).unwrap();
        let SvKernels::Full(theta) = &layer.kernels else { unreachable!() };
        let mut centre = Tensor::zeros(&[2, 2, 1, 1]);
        for f in 0..2 {
            for d in 0..2 {
                centre.data_mut()[f * 2 + d] = theta.data()[((f * 2 + d) * 3 + 1) * 3 + 1];
            }
        }
        let expect = conv2d(&x, &centre).unwrap();
        let got = layer.forward(&x, Some(&mask)).unwrap();
        assert!(got.max_abs_diff(&expect).unwrap() < 1e-12);
    }

    #[test]
    fn identity_pointwise_leaves_depthwise_stage() {
        let mut r = rng(12);
        let dw = Tensor::randn(&[3, 3, 3], 1.0, &mut r);
        let mut eye = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            eye.data_mut()[i * 3 + i] = 1.0;
        }
        let layer = SvConvLayer::separable(dw.clone(), eye).unwrap();
        let x = Tensor::randn(&[3, 5, 5], 1.0, &mut r);
        let mask = ShapeMask::from_planes(3, Tensor::rand_uniform(&[9, 5, 5], 0.1, 1.0, &mut r), 3.0)
            .unwrap();
        let out = layer.forward(&x, Some(&mask)).unwrap();
        // depthwise stage by hand
        for d in 0..3 {
            for i in 0..5 {
                for j in 0..5 {
                    let mut acc = 0.0;
                    for m in -1isize..=1 {
                        for n in -1isize..=1 {
                            let (si, sj) = (i as isize - m, j as isize - n);
                            if si < 0 || sj < 0 || si >= 5 || sj >= 5 {
                                continue;
                            }
                            let tap = dw.data()[(d * 3 + (m + 1) as usize) * 3 + (n + 1) as usize];
                            acc += mask.at(i, j, m, n)
                                * tap
                                * x.data()[(d * 5 + si as usize) * 5 + sj as usize];
                        }
                    }
                    assert!((out.data()[(d * 5 + i) * 5 + j] - acc).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut r = rng(13);
        let layer = SvConvLayer::random(3, 2, 2, true, &mut r).unwrap();
        let x = Tensor::randn(&[2, 4, 4], 1.0, &mut r);
        let mask = ShapeMask::from_planes(3, Tensor::rand_uniform(&[9, 4, 4], 0.1, 1.0, &mut r), 3.0)
            .unwrap();
        let g = layer.backward(&x, Some(&mask), &Tensor::zeros(&[2, 4, 4])).unwrap();
        assert_eq!(g.features.max_abs(), 0.0);
        assert_eq!(g.mask.unwrap().max_abs(), 0.0);
        let SvKernelGrads::Separable { depthwise, pointwise } = g.kernels else { unreachable!() };
        assert_eq!(depthwise.max_abs() + pointwise.max_abs(), 0.0);
    }

    #[test]
    fn mask_gradient_is_local_to_the_upstream_pixel() {
        let mut r = rng(14);
        let layer = SvConvLayer::random(3, 2, 2, false, &mut r).unwrap();
        let x = Tensor::randn(&[2, 5, 5], 1.0, &mut r);
        let mask = ShapeMask::from_planes(3, Tensor::rand_uniform(&[9, 5, 5], 0.1, 1.0, &mut r), 3.0)
            .unwrap();
        let mut up = Tensor::zeros(&[2, 5, 5]);
        up.data_mut()[25 + 2 * 5 + 3] = 1.0;
        let gm = layer.backward(&x, Some(&mask), &up).unwrap().mask.unwrap();
        for s in 0..9 {
            for p in 0..25 {
                if p != 2 * 5 + 3 {
                    assert_eq!(gm.data()[s * 25 + p], 0.0);
                }
            }
        }
    }

    #[test]
    fn extent_mismatch_rejected() {
        let mut r = rng(15);
        let layer = SvConvLayer::random(5, 2, 2, true, &mut r).unwrap();
        let x = Tensor::zeros(&[2, 4, 4]);
        let mask = ShapeMask::ones(3, 4, 4);
        let err = layer.forward(&x, Some(&mask)).unwrap_err().to_string();
        assert!(err.contains("mask extent"), "{err}");
        assert!(SvConvLayer::full(Tensor::zeros(&[1, 1, 2, 2])).is_err());
    }

    #[test]
    fn unit_extent_sfc_is_pointwise() {
        let mut r = rng(16);
        let layer = SvConvLayer::random(1, 3, 2, false, &mut r).unwrap();
        let x = Tensor::randn(&[3, 4, 4], 1.0, &mut r);
        let SvKernels::Full(theta) = &layer.kernels else { unreachable!() };
        let expect = conv2d(&x, theta).unwrap();
        assert!(sfc_forward(&x, &layer).unwrap().max_abs_diff(&expect).unwrap() < 1e-12);
    }
}
