//! Gray-level renderings of a shape mask around one target pixel.
//!
//! Both images are laid out in image space: the cell showing offset
//! `(m, n)` sits at pixel `(i - m, j - n)`, the neighbour it weighs.

use std::path::Path;

use super::pnm::{quantize, write_pgm, GrayImage};
use crate::error::{Error, Result};
use crate::paired::ShapeMask;

fn check_point(mask: &ShapeMask, i: usize, j: usize) -> Result<()> {
    if i >= mask.height() || j >= mask.width() {
        return Err(Error::invalid(
            "export_mask_image",
            format!(
                "point ({i},{j}) outside rows 0..{} and columns 0..{}",
                mask.height(),
                mask.width()
            ),
        ));
    }
    Ok(())
}

/// `K x K` window; cell `(r, c)` is the mask at offset `(K1 - r, K1 - c)`.
pub fn mask_window_image(mask: &ShapeMask, i: usize, j: usize) -> Result<GrayImage> {
    check_point(mask, i, j)?;
    let k = mask.extent();
    let half = (k / 2) as isize;
    let mut pixels = Vec::with_capacity(k * k);
    for r in 0..k as isize {
        for c in 0..k as isize {
            pixels.push(quantize(mask.at(i, j, half - r, half - c)));
        }
    }
    Ok(GrayImage {
        width: k,
        height: k,
        pixels,
    })
}

/// Full-size map: black outside the window, mask values inside, and the
/// target pixel itself forced to black.
pub fn mask_overlay_image(mask: &ShapeMask, i: usize, j: usize) -> Result<GrayImage> {
    check_point(mask, i, j)?;
    let (h, w) = (mask.height(), mask.width());
    let half = (mask.extent() / 2) as isize;
    let mut pixels = vec![0u8; h * w];
    for m in -half..=half {
        for n in -half..=half {
            let (p, q) = (i as isize - m, j as isize - n);
            if p >= 0 && q >= 0 && p < h as isize && q < w as isize {
                pixels[p as usize * w + q as usize] = quantize(mask.at(i, j, m, n));
            }
        }
    }
    pixels[i * w + j] = 0;
    Ok(GrayImage {
        width: w,
        height: h,
        pixels,
    })
}

/// Writes the window at `(i, j)`, or the full overlay when `overlay` is set.
pub fn export_mask_image(
    mask: &ShapeMask,
    i: usize,
    j: usize,
    path: impl AsRef<Path>,
    overlay: bool,
) -> Result<()> {
    let img = if overlay {
        mask_overlay_image(mask, i, j)?
    } else {
        mask_window_image(mask, i, j)?
    };
    write_pgm(&img, path)
}
