//! Per-pixel softmax cross-entropy.

use crate::error::{check_dim, Error, Result};
use crate::ops::softmax_channels;
use crate::tensor::Tensor;

pub const IGNORE_INDEX: u8 = 255;

/// Mean of `-log softmax(scores)[label]` over pixels whose label is not
/// `ignore`, and its gradient `(softmax - onehot) / count`. When every
/// pixel is ignored both are zero and a warning is logged.
pub fn cross_entropy_loss(scores: &Tensor, labels: &[u8], ignore: u8) -> Result<(f64, Tensor)> {
    let (c, h, w) = scores.chw()?;
    let plane = h * w;
    check_dim("cross_entropy_loss", "label count", labels.len(), plane)?;
    let probs = softmax_channels(scores)?;
    let count = labels.iter().filter(|&&l| l != ignore).count();
    if count == 0 {
        log::warn!("cross_entropy_loss: every pixel is ignored");
        return Ok((0.0, Tensor::zeros(scores.shape())));
    }
    let mut grad = probs.into_vec();
    let mut loss = 0.0;
    let inv = 1.0 / count as f64;
    for (p, &l) in labels.iter().enumerate() {
        if l == ignore {
            for ci in 0..c {
                grad[ci * plane + p] = 0.0;
            }
            continue;
        }
        let l = l as usize;
        if l >= c {
            return Err(Error::invalid(
                "cross_entropy_loss",
                format!("label {l} at pixel {p} outside 0..{c}"),
            ));
        }
        // log p_l = s_l - max - log(sum exp(s - max)), computed from scores
        // so that saturated probabilities do not produce log(0).
        let col = (0..c).map(|ci| scores.data()[ci * plane + p]);
        let max = col.clone().fold(f64::NEG_INFINITY, f64::max);
        let lse = col.map(|s| (s - max).exp()).sum::<f64>().ln() + max;
        loss += lse - scores.data()[l * plane + p];
        grad[l * plane + p] -= 1.0;
        for ci in 0..c {
            grad[ci * plane + p] *= inv;
        }
    }
    Ok((loss * inv, Tensor::from_vec(scores.shape(), grad)?))
}

/// Per-pixel argmax over channels; ties go to the lowest class.
pub fn predict_labels(scores: &Tensor) -> Result<Vec<u8>> {
    let (c, h, w) = scores.chw()?;
    let plane = h * w;
    Ok((0..plane)
        .map(|p| {
            let mut best = 0;
            for ci in 1..c {
                if scores.data()[ci * plane + p] > scores.data()[best * plane + p] {
                    best = ci;
                }
            }
            best as u8
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_c() {
        let (loss, _) = cross_entropy_loss(&Tensor::zeros(&[4, 2, 2]), &[0, 1, 2, 3], IGNORE_INDEX).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn confident_and_correct_is_near_zero() {
        let mut s = Tensor::zeros(&[2, 1, 1]);
        s.data_mut()[1] = 1000.0;
        let (loss, g) = cross_entropy_loss(&s, &[1], IGNORE_INDEX).unwrap();
        assert!(loss.abs() < 1e-12);
        assert!(g.max_abs() < 1e-12);
    }

    #[test]
    fn all_ignored_is_zero() {
        let s = Tensor::ones(&[3, 1, 2]);
        let (loss, g) = cross_entropy_loss(&s, &[255, 255], IGNORE_INDEX).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(g.max_abs(), 0.0);
        assert!(cross_entropy_loss(&s, &[3, 0], IGNORE_INDEX).is_err());
    }
}
