//! Paired convolution and Gaussian mapping: the side branch that infers a
//! per-pixel shape mask from local features.
//!
//! For every offset `(m, n)` in a `K x K` window there is one pair of 3x3
//! kernels. The centre kernel looks at the target pixel `(i, j)`, the
//! offset kernel at `(i-m, j-n)`, and the scalar difference of their
//! responses is the discrepancy for that offset. The Gaussian mapping turns
//! discrepancies into mask values in `(0, 1]`.

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::ops::conv::shifted_axpy;
use crate::ops::{conv2d, conv2d_backward};
use crate::tensor::Tensor;

pub const DEFAULT_SIGMA: f64 = 3.0;

/// Maps a signed offset `(m, n)` in `[-K1, K1]^2` to its pair index.
pub fn pair_index(k: usize, m: isize, n: isize) -> usize {
    let half = (k / 2) as isize;
    ((m + half) as usize) * k + (n + half) as usize
}

/// Inverse of [`pair_index`].
pub fn pair_offset(k: usize, s: usize) -> (isize, isize) {
    let half = (k / 2) as isize;
    ((s / k) as isize - half, (s % k) as isize - half)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairedConvParams {
    k: usize,
    /// `[K*K, D, 3, 3]`
    pub center: Tensor,
    /// `[K*K, D, 3, 3]`
    pub offset: Tensor,
}

impl PairedConvParams {
    pub fn new(k: usize, center: Tensor, offset: Tensor) -> Result<Self> {
        if k % 2 == 0 {
            return Err(Error::invalid("paired_conv", format!("mask extent {k} must be odd")));
        }
        for bank in [&center, &offset] {
            match *bank.shape() {
                [s, _, 3, 3] => check_dim("paired_conv", "pair count", s, k * k)?,
                _ => {
                    return Err(Error::invalid(
                        "paired_conv",
                        format!("kernel bank must be [K*K,D,3,3], got {:?}", bank.shape()),
                    ))
                }
            }
        }
        check_dim("paired_conv", "offset bank channels", offset.shape()[1], center.shape()[1])?;
        Ok(PairedConvParams { k, center, offset })
    }

    /// Independent He-style draws for both banks, std `sqrt(2 / (9 D))`.
    pub fn random<R: Rng + ?Sized>(k: usize, channels: usize, rng: &mut R) -> Result<Self> {
        let std = (2.0 / (9.0 * channels as f64)).sqrt();
        let shape = [k * k, channels, 3, 3];
        let center = Tensor::randn(&shape, std, rng);
        let offset = Tensor::randn(&shape, std, rng);
        Self::new(k, center, offset)
    }

    pub fn extent(&self) -> usize {
        self.k
    }

    pub fn channels(&self) -> usize {
        self.center.shape()[1]
    }
}

/// Per-pixel `K x K` semantic-correlation weights.
///
/// Stored offset-major as `[K*K, H, W]` so that each offset is a contiguous
/// plane; [`ShapeMask::at`] gives the `[i, j, m, n]` view.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeMask {
    k: usize,
    values: Tensor,
    sigma: f64,
}

impl ShapeMask {
    pub fn from_planes(k: usize, values: Tensor, sigma: f64) -> Result<Self> {
        let (s, _, _) = values.chw()?;
        check_dim("shape_mask", "offset planes", s, k * k)?;
        if k % 2 == 0 {
            return Err(Error::invalid("shape_mask", format!("extent {k} must be odd")));
        }
        Ok(ShapeMask { k, values, sigma })
    }

    /// A constant all-ones mask, which turns SV conv into plain convolution.
    pub fn ones(k: usize, h: usize, w: usize) -> Self {
        ShapeMask {
            k,
            values: Tensor::ones(&[k * k, h, w]),
            sigma: DEFAULT_SIGMA,
        }
    }

    pub fn extent(&self) -> usize {
        self.k
    }

    pub fn height(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.values.shape()[2]
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// The `[K*K, H, W]` planes.
    pub fn planes(&self) -> &Tensor {
        &self.values
    }

    /// Mask value of target `(i, j)` at signed offset `(m, n)`.
    pub fn at(&self, i: usize, j: usize, m: isize, n: isize) -> f64 {
        let s = pair_index(self.k, m, n);
        self.values.data()[(s * self.height() + i) * self.width() + j]
    }

    /// The `K x K` window of target `(i, j)`, row-major over `(m, n)`.
    pub fn window(&self, i: usize, j: usize) -> Vec<f64> {
        let plane = self.height() * self.width();
        let p = i * self.width() + j;
        (0..self.k * self.k)
            .map(|s| self.values.data()[s * plane + p])
            .collect()
    }

    /// Values re-laid out as `[H, W, K, K]`.
    pub fn to_hwkk(&self) -> Tensor {
        let (h, w, k) = (self.height(), self.width(), self.k);
        let mut out = Vec::with_capacity(h * w * k * k);
        for i in 0..h {
            for j in 0..w {
                out.extend(self.window(i, j));
            }
        }
        Tensor::from_vec(&[h, w, k, k], out).expect("extents are positive")
    }
}

/// Discrepancy planes `[K*K, H, W]` for every pair and position. The
/// shifted anchor `(i-m, j-n)` contributes zero when it leaves the image.
pub fn paired_conv_forward(features: &Tensor, params: &PairedConvParams) -> Result<Tensor> {
    let (d, h, w) = features.chw()?;
    check_dim("paired_conv", "feature channels", d, params.channels())?;
    let center = conv2d(features, &params.center)?;
    let offset = conv2d(features, &params.offset)?;
    let k = params.k;
    let plane = h * w;
    let mut disc = center.into_vec();
    for s in 0..k * k {
        let (m, n) = pair_offset(k, s);
        shifted_axpy(
            &mut disc[s * plane..(s + 1) * plane],
            &offset.data()[s * plane..(s + 1) * plane],
            h,
            w,
            m,
            n,
            -1.0,
        );
    }
    Tensor::from_vec(&[k * k, h, w], disc)
}

#[derive(Clone, Debug)]
pub struct PairedConvGrads {
    pub features: Tensor,
    pub center: Tensor,
    pub offset: Tensor,
}

pub fn paired_conv_backward(
    features: &Tensor,
    params: &PairedConvParams,
    upstream: &Tensor,
) -> Result<PairedConvGrads> {
    let (d, h, w) = features.chw()?;
    check_dim("paired_conv_backward", "feature channels", d, params.channels())?;
    let k = params.k;
    let (s, gh, gw) = upstream.chw()?;
    check_dim("paired_conv_backward", "pair count", s, k * k)?;
    check_dim("paired_conv_backward", "upstream height", gh, h)?;
    check_dim("paired_conv_backward", "upstream width", gw, w)?;
    let plane = h * w;
    let mut g_offset = vec![0.0; k * k * plane];
    for s in 0..k * k {
        let (m, n) = pair_offset(k, s);
        shifted_axpy(
            &mut g_offset[s * plane..(s + 1) * plane],
            &upstream.data()[s * plane..(s + 1) * plane],
            h,
            w,
            -m,
            -n,
            -1.0,
        );
    }
    let g_offset = Tensor::from_vec(&[k * k, h, w], g_offset)?;
    let (mut gx, g_center) = conv2d_backward(features, &params.center, upstream)?;
    let (gx_off, g_off_k) = conv2d_backward(features, &params.offset, &g_offset)?;
    gx.add_assign(&gx_off)?;
    Ok(PairedConvGrads {
        features: gx,
        center: g_center,
        offset: g_off_k,
    })
}

/// `exp(-disc^2 / sigma^2)` elementwise.
pub fn gaussian_map(disc: &Tensor, k: usize, sigma: f64) -> Result<ShapeMask> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("gaussian_map", format!("sigma {sigma} must be positive")));
    }
    let s2 = sigma * sigma;
    ShapeMask::from_planes(k, disc.map(|v| (-v * v / s2).exp()), sigma)
}

pub fn gaussian_map_backward(disc: &Tensor, sigma: f64, upstream: &Tensor) -> Result<Tensor> {
    let s2 = sigma * sigma;
    disc.zip_map(upstream, |v, g| g * (-2.0 * v / s2) * (-v * v / s2).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pair_index_round_trip() {
        for k in [1usize, 3, 5, 7] {
            for s in 0..k * k {
                let (m, n) = pair_offset(k, s);
                assert_eq!(pair_index(k, m, n), s);
            }
        }
        assert_eq!(pair_index(5, -2, -2), 0);
        assert_eq!(pair_index(5, 0, 0), 12);
    }

    #[test]
    fn equal_banks_on_constant_input_cancel_in_the_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bank = Tensor::randn(&[9, 2, 3, 3], 1.0, &mut rng);
        let params = PairedConvParams::new(3, bank.clone(), bank).unwrap();
        let x = Tensor::full(&[2, 7, 7], 0.8);
        let disc = paired_conv_forward(&x, &params).unwrap();
        // away from the zero-padded border every window sees the same values
        for s in 0..9 {
            for i in 2..5 {
                for j in 2..5 {
                    assert!(disc.data()[(s * 7 + i) * 7 + j].abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn centre_pair_with_equal_kernels_is_zero_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut params = PairedConvParams::random(5, 3, &mut rng).unwrap();
        let centre = pair_index(5, 0, 0);
        let span = 3 * 9;
        let copy = params.center.data()[centre * span..(centre + 1) * span].to_vec();
        params.offset.data_mut()[centre * span..(centre + 1) * span].copy_from_slice(&copy);
        let x = Tensor::randn(&[3, 6, 6], 1.0, &mut rng);
        let disc = paired_conv_forward(&x, &params).unwrap();
        let mask = gaussian_map(&disc, 5, DEFAULT_SIGMA).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(disc.data()[(centre * 6 + i) * 6 + j], 0.0);
                assert_eq!(mask.at(i, j, 0, 0), 1.0);
            }
        }
    }

    #[test]
    fn gaussian_values() {
        let disc = Tensor::from_vec(&[1, 1, 3], vec![0.0, 3.0, -3.0]).unwrap();
        let mask = gaussian_map(&disc, 1, 3.0).unwrap();
        assert_eq!(mask.at(0, 0, 0, 0), 1.0);
        assert!((mask.at(0, 1, 0, 0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((mask.at(0, 1, 0, 0) - 0.367879).abs() < 1e-6);
        assert!(gaussian_map(&disc, 1, 0.0).is_err());
        assert_eq!(DEFAULT_SIGMA, 3.0);
    }

    #[test]
    fn gaussian_backward_sign_and_stationary_point() {
        let disc = Tensor::from_vec(&[1, 1, 3], vec![0.0, 1.5, -0.5]).unwrap();
        let g = gaussian_map_backward(&disc, 3.0, &Tensor::ones(&[1, 1, 3])).unwrap();
        assert_eq!(g.data()[0], 0.0);
        assert!(g.data()[1] < 0.0);
        assert!(g.data()[2] > 0.0);
    }

    #[test]
    fn channel_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = PairedConvParams::random(3, 2, &mut rng).unwrap();
        assert!(paired_conv_forward(&Tensor::zeros(&[3, 4, 4]), &params).is_err());
        assert!(PairedConvParams::random(4, 2, &mut rng).is_err());
    }

    #[test]
    fn hwkk_view_matches_at() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let planes = Tensor::rand_uniform(&[9, 2, 3], 0.1, 1.0, &mut rng);
        let mask = ShapeMask::from_planes(3, planes, 3.0).unwrap();
        let hwkk = mask.to_hwkk();
        assert_eq!(hwkk.shape(), &[2, 3, 3, 3]);
        for i in 0..2 {
            for j in 0..3 {
                for a in 0..3 {
                    for b in 0..3 {
                        let v = hwkk.data()[((i * 3 + j) * 3 + a) * 3 + b];
                        assert_eq!(v, mask.at(i, j, a as isize - 1, b as isize - 1));
                    }
                }
            }
        }
    }
}
