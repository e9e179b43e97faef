use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Source taps `(lo, hi, frac)` for each output coordinate along one axis,
/// half-pixel centred (align_corners = false), borders clamped.
fn axis_taps(len: usize, factor: usize) -> Vec<(usize, usize, f64)> {
    (0..len * factor)
        .map(|o| {
            let src = ((o as f64 + 0.5) / factor as f64 - 0.5).max(0.0);
            let lo = (src.floor() as usize).min(len - 1);
            let hi = (lo + 1).min(len - 1);
            (lo, hi, src - lo as f64)
        })
        .collect()
}

pub fn bilinear_upsample(x: &Tensor, factor: usize) -> Result<Tensor> {
    if factor == 0 {
        return Err(Error::invalid("bilinear_upsample", "factor must be >= 1"));
    }
    let (c, h, w) = x.chw()?;
    if factor == 1 {
        return Ok(x.clone());
    }
    let (oh, ow) = (h * factor, w * factor);
    let rows = axis_taps(h, factor);
    let cols = axis_taps(w, factor);
    let src = x.data();
    let mut out = vec![0.0; c * oh * ow];
    for ci in 0..c {
        let plane = &src[ci * h * w..(ci + 1) * h * w];
        for (i, &(r0, r1, fy)) in rows.iter().enumerate() {
            for (j, &(c0, c1, fx)) in cols.iter().enumerate() {
                let top = plane[r0 * w + c0] * (1.0 - fx) + plane[r0 * w + c1] * fx;
                let bot = plane[r1 * w + c0] * (1.0 - fx) + plane[r1 * w + c1] * fx;
                out[(ci * oh + i) * ow + j] = top * (1.0 - fy) + bot * fy;
            }
        }
    }
    Tensor::from_vec(&[c, oh, ow], out)
}

/// Adjoint of [`bilinear_upsample`]; `upstream` has the upsampled shape.
pub fn bilinear_upsample_backward(upstream: &Tensor, factor: usize) -> Result<Tensor> {
    if factor == 0 {
        return Err(Error::invalid("bilinear_upsample_backward", "factor must be >= 1"));
    }
    let (c, oh, ow) = upstream.chw()?;
    if oh % factor != 0 || ow % factor != 0 {
        return Err(Error::invalid(
            "bilinear_upsample_backward",
            format!("{oh}x{ow} not divisible by factor {factor}"),
        ));
    }
    if factor == 1 {
        return Ok(upstream.clone());
    }
    let (h, w) = (oh / factor, ow / factor);
    let rows = axis_taps(h, factor);
    let cols = axis_taps(w, factor);
    let g = upstream.data();
    let mut out = vec![0.0; c * h * w];
    for ci in 0..c {
        let plane = &mut out[ci * h * w..(ci + 1) * h * w];
        for (i, &(r0, r1, fy)) in rows.iter().enumerate() {
            for (j, &(c0, c1, fx)) in cols.iter().enumerate() {
                let v = g[(ci * oh + i) * ow + j];
                plane[r0 * w + c0] += v * (1.0 - fy) * (1.0 - fx);
                plane[r0 * w + c1] += v * (1.0 - fy) * fx;
                plane[r1 * w + c0] += v * fy * (1.0 - fx);
                plane[r1 * w + c1] += v * fy * fx;
            }
        }
    }
    Tensor::from_vec(&[c, h, w], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_one_is_identity() {
        let x = Tensor::from_vec(&[1, 2, 2], vec![1., 2., 3., 4.]).unwrap();
        assert_eq!(bilinear_upsample(&x, 1).unwrap(), x);
        assert!(bilinear_upsample(&x, 0).is_err());
    }

    #[test]
    fn constants_stay_constant() {
        let x = Tensor::full(&[2, 3, 5], 1.25);
        for f in 2..5 {
            let y = bilinear_upsample(&x, f).unwrap();
            assert_eq!(y.shape(), &[2, 3 * f, 5 * f]);
            assert!(y.data().iter().all(|&v| (v - 1.25).abs() < 1e-15));
        }
    }
}
