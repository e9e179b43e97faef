//! Labeling denoising: class existence potentials from a higher-level
//! score map suppress the lower-level scores of classes that appear absent
//! before the two maps are summed.
//!
//! ```text
//! E_k       = max_{i,j} softmax_c(S_k)
//! P_k[c]    = relu(T_k - E_k[c]) * delta_k[c]
//! S_{k-1}   = relu(S^_{k-1} - P_k) + up(S_k)
//! ```

use crate::error::{check_dim, Error, Result};
use crate::ops::{
    bilinear_upsample, bilinear_upsample_backward, global_max_pool, global_max_pool_backward,
    softmax_channels, softmax_channels_backward,
};
use crate::tensor::Tensor;

/// Penalty thresholds from the highest level downwards: `t, 2t, 4t, ...`
/// with `t = 1 / classes`.
pub fn thresholds(classes: usize, levels: usize) -> Vec<f64> {
    let t = 1.0 / classes as f64;
    (0..levels).map(|k| t * (1u64 << k) as f64).collect()
}

#[derive(Clone, Debug)]
pub struct ExistenceCache {
    probs: Tensor,
    argmax: Vec<usize>,
}

pub fn existence_potential(scores: &Tensor) -> Result<(Tensor, ExistenceCache)> {
    let (c, _, _) = scores.chw()?;
    if c < 2 {
        return Err(Error::invalid("existence_potential", "needs at least 2 classes"));
    }
    let probs = softmax_channels(scores)?;
    let (e, argmax) = global_max_pool(&probs)?;
    Ok((e, ExistenceCache { probs, argmax }))
}

pub fn existence_potential_backward(cache: &ExistenceCache, upstream: &Tensor) -> Result<Tensor> {
    let shape = cache.probs.chw()?;
    let g_probs = global_max_pool_backward(shape, &cache.argmax, upstream)?;
    softmax_channels_backward(&cache.probs, &g_probs)
}

pub fn penalty(existence: &Tensor, threshold: f64, delta: &Tensor) -> Result<Tensor> {
    if !(threshold > 0.0) {
        return Err(Error::invalid("penalty", format!("threshold {threshold} must be positive")));
    }
    existence.zip_map(delta, |e, d| (threshold - e).max(0.0) * d)
}

/// Returns `(grad_existence, grad_delta)`.
pub fn penalty_backward(
    existence: &Tensor,
    threshold: f64,
    delta: &Tensor,
    upstream: &Tensor,
) -> Result<(Tensor, Tensor)> {
    existence.expect_same_shape("penalty_backward", upstream)?;
    let active = existence.map(|e| if threshold - e > 0.0 { 1.0 } else { 0.0 });
    let g_e = Tensor::from_vec(
        existence.shape(),
        active
            .data()
            .iter()
            .zip(delta.data())
            .zip(upstream.data())
            .map(|((a, d), g)| -a * d * g)
            .collect(),
    )?;
    let g_delta = existence.zip_map(upstream, |e, g| (threshold - e).max(0.0) * g)?;
    Ok((g_e, g_delta))
}

/// `relu(lower - penalty[c]) + higher`, with the penalty broadcast over
/// positions; `higher` must already be at the lower resolution.
pub fn denoise_aggregate(lower: &Tensor, penalty: &Tensor, higher: &Tensor) -> Result<Tensor> {
    let (c, h, w) = lower.chw()?;
    lower.expect_same_shape("denoise_aggregate", higher)?;
    check_dim("denoise_aggregate", "penalty length", penalty.len(), c)?;
    let plane = h * w;
    let mut out = higher.clone();
    for ci in 0..c {
        let p = penalty.data()[ci];
        let range = ci * plane..(ci + 1) * plane;
        for (o, l) in out.data_mut()[range.clone()].iter_mut().zip(&lower.data()[range]) {
            *o += (l - p).max(0.0);
        }
    }
    Ok(out)
}

/// Returns `(grad_lower, grad_penalty, grad_higher)`.
pub fn denoise_aggregate_backward(
    lower: &Tensor,
    penalty: &Tensor,
    upstream: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (c, h, w) = lower.chw()?;
    lower.expect_same_shape("denoise_aggregate_backward", upstream)?;
    let plane = h * w;
    let mut g_lower = upstream.clone();
    let mut g_pen = vec![0.0; c];
    for ci in 0..c {
        let p = penalty.data()[ci];
        let range = ci * plane..(ci + 1) * plane;
        for (g, l) in g_lower.data_mut()[range.clone()].iter_mut().zip(&lower.data()[range]) {
            if l - p > 0.0 {
                g_pen[ci] -= *g;
            } else {
                *g = 0.0;
            }
        }
    }
    Ok((g_lower, Tensor::from_vec(&[c], g_pen)?, upstream.clone()))
}

/// One aggregation step of the decoder: the higher map is upsampled to the
/// lower resolution and, when denoising is on, lower-level scores of absent
/// classes are penalized first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SkipMode {
    /// `lower + up(higher)`
    Plain,
    /// `relu(lower) + up(higher)`
    Clamped,
    /// `relu(lower - P) + up(higher)`
    Denoise,
}

#[derive(Clone, Debug)]
pub struct StepCache {
    mode: SkipMode,
    factor: usize,
    threshold: f64,
    existence: Option<(Tensor, ExistenceCache)>,
    penalty: Tensor,
}

#[derive(Clone, Debug)]
pub struct StepGrads {
    pub lower: Tensor,
    pub higher: Tensor,
    /// Present only in [`SkipMode::Denoise`].
    pub delta: Option<Tensor>,
}

pub fn aggregate_step(
    mode: SkipMode,
    higher: &Tensor,
    lower: &Tensor,
    factor: usize,
    threshold: f64,
    delta: Option<&Tensor>,
) -> Result<(Tensor, StepCache)> {
    let (c, _, _) = lower.chw()?;
    let up = bilinear_upsample(higher, factor)?;
    let (existence, pen) = match mode {
        SkipMode::Denoise => {
            let delta = delta.ok_or_else(|| Error::invalid("aggregate_step", "denoising needs delta"))?;
            let (e, cache) = existence_potential(higher)?;
            let p = penalty(&e, threshold, delta)?;
            (Some((e, cache)), p)
        }
        _ => (None, Tensor::zeros(&[c])),
    };
    let out = match mode {
        SkipMode::Plain => lower.add(&up)?,
        _ => denoise_aggregate(lower, &pen, &up)?,
    };
    Ok((
        out,
        StepCache {
            mode,
            factor,
            threshold,
            existence,
            penalty: pen,
        },
    ))
}

pub fn aggregate_step_backward(
    cache: &StepCache,
    lower: &Tensor,
    delta: Option<&Tensor>,
    upstream: &Tensor,
) -> Result<StepGrads> {
    let (g_lower, g_pen, g_up) = match cache.mode {
        SkipMode::Plain => (upstream.clone(), None, upstream.clone()),
        _ => {
            let (gl, gp, gu) = denoise_aggregate_backward(lower, &cache.penalty, upstream)?;
            (gl, Some(gp), gu)
        }
    };
    let mut g_higher = bilinear_upsample_backward(&g_up, cache.factor)?;
    let mut g_delta = None;
    if let (Some((e, e_cache)), Some(g_pen)) = (&cache.existence, g_pen) {
        let delta = delta.ok_or_else(|| Error::invalid("aggregate_step_backward", "missing delta"))?;
        let (g_e, g_d) = penalty_backward(e, cache.threshold, delta, &g_pen)?;
        g_higher.add_assign(&existence_potential_backward(e_cache, &g_e)?)?;
        g_delta = Some(g_d);
    }
    Ok(StepGrads {
        lower: g_lower,
        higher: g_higher,
        delta: g_delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_ladder() {
        assert_eq!(thresholds(4, 3), vec![0.25, 0.5, 1.0]);
        let t = thresholds(59, 3);
        assert!((t[0] - 1.0 / 59.0).abs() < 1e-15);
        assert!((t[2] - 4.0 / 59.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_scores_give_uniform_potential() {
        let (e, _) = existence_potential(&Tensor::zeros(&[2, 3, 3])).unwrap();
        assert_eq!(e.data(), &[0.5, 0.5]);
        assert!(existence_potential(&Tensor::zeros(&[1, 2, 2])).is_err());
    }

    #[test]
    fn dominant_class_saturates() {
        let mut s = Tensor::zeros(&[3, 2, 2]);
        s.data_mut()[4..8].fill(1000.0);
        let (e, _) = existence_potential(&s).unwrap();
        assert_eq!(e.data()[1], 1.0);
        assert!(e.data()[0] < 1e-300);
    }

    #[test]
    fn penalty_boundary_and_value() {
        let e = Tensor::from_vec(&[2], vec![0.25, 0.0]).unwrap();
        let delta = Tensor::ones(&[2]);
        let p = penalty(&e, 0.25, &delta).unwrap();
        assert_eq!(p.data(), &[0.0, 0.25]);
        assert!(penalty(&e, 0.0, &delta).is_err());
    }

    #[test]
    fn zero_penalty_is_plain_skip_for_nonnegative_scores() {
        let lower = Tensor::from_vec(&[1, 1, 3], vec![0.0, 1.0, 2.5]).unwrap();
        let higher = Tensor::from_vec(&[1, 1, 3], vec![-1.0, 0.5, 1.0]).unwrap();
        let out = denoise_aggregate(&lower, &Tensor::zeros(&[1]), &higher).unwrap();
        assert_eq!(out, lower.add(&higher).unwrap());
    }

    #[test]
    fn large_penalty_suppresses_the_lower_level() {
        let lower = Tensor::from_vec(&[2, 1, 2], vec![1.0, 2.0, 1.0, 2.0]).unwrap();
        let higher = Tensor::from_vec(&[2, 1, 2], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let pen = Tensor::from_vec(&[2], vec![5.0, 0.0]).unwrap();
        let out = denoise_aggregate(&lower, &pen, &higher).unwrap();
        assert_eq!(&out.data()[..2], &[0.1, 0.2]);
        assert_eq!(&out.data()[2..], &[1.3, 2.4]);
    }
}
