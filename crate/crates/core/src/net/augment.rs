//! Random horizontal flip and mean subtraction.

use rand::Rng;

use super::model::subtract_mean;
use crate::error::{check_dim, Result};
use crate::tensor::Tensor;

/// Mirrors every channel left to right.
pub fn flip_image(image: &Tensor) -> Result<Tensor> {
    let (_, _, w) = image.chw()?;
    let mut out = image.clone();
    for row in out.data_mut().chunks_mut(w) {
        row.reverse();
    }
    Ok(out)
}

pub fn flip_labels(labels: &[u8], width: usize) -> Vec<u8> {
    let mut out = labels.to_vec();
    for row in out.chunks_mut(width) {
        row.reverse();
    }
    out
}

/// Optional flip of both image and labels, then mean subtraction.
pub fn augment_with(image: &Tensor, labels: &[u8], mean: &Tensor, flip: bool) -> Result<(Tensor, Vec<u8>)> {
    let (_, h, w) = image.chw()?;
    check_dim("augment", "label count", labels.len(), h * w)?;
    if flip {
        Ok((subtract_mean(&flip_image(image)?, mean)?, flip_labels(labels, w)))
    } else {
        Ok((subtract_mean(image, mean)?, labels.to_vec()))
    }
}

/// Flips with probability 0.5.
pub fn augment<R: Rng + ?Sized>(
    image: &Tensor,
    labels: &[u8],
    mean: &Tensor,
    rng: &mut R,
) -> Result<(Tensor, Vec<u8>)> {
    let flip = rng.random_bool(0.5);
    augment_with(image, labels, mean, flip)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_flip_is_identity() {
        let img = Tensor::from_vec(&[1, 2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let once = flip_image(&img).unwrap();
        assert_eq!(once.data(), &[3.0, 2.0, 1.0, 6.0, 5.0, 4.0]);
        assert_eq!(flip_image(&once).unwrap(), img);
        assert_eq!(flip_labels(&flip_labels(&[1, 2, 3, 4], 2), 2), vec![1, 2, 3, 4]);
    }

    #[test]
    fn no_flip_only_subtracts_mean() {
        let img = Tensor::full(&[3, 2, 2], 0.5);
        let mean = Tensor::from_vec(&[3], vec![0.5, 0.25, 0.0]).unwrap();
        let (out, labels) = augment_with(&img, &[0, 1, 2, 3], &mean, false).unwrap();
        assert_eq!(&out.data()[..4], &[0.0; 4]);
        assert_eq!(&out.data()[4..8], &[0.25; 4]);
        assert_eq!(labels, vec![0, 1, 2, 3]);
    }
}
