//! Shape-variant convolution against its shape-fixed counterpart.
//!
//! cargo run --release --example sv_conv

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use svctx::ops::conv2d;
use svctx::reference::expand_kernels;
use svctx::svconv::sfc_forward;
use svctx::{ShapeMask, SvConvLayer, Tensor};

fn main() -> svctx::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (k, d, f) = (7, 4, 6);
    let x = Tensor::randn(&[d, 12, 12], 1.0, &mut rng);
    let layer = SvConvLayer::random(k, d, f, true, &mut rng)?;

    let fixed = sfc_forward(&x, &layer)?;
    let plain = conv2d(&x, &expand_kernels(&layer))?;
    println!("shape-fixed vs conv2d: max diff {:.2e}", fixed.max_abs_diff(&plain)?);

    // keep only the upper half of every window
    let mut planes = Tensor::zeros(&[k * k, 12, 12]);
    for s in 0..k * k {
        let m = (s / k) as isize - (k / 2) as isize;
        if m >= 0 {
            planes.data_mut()[s * 144..(s + 1) * 144].fill(1.0);
        }
    }
    let half = ShapeMask::from_planes(k, planes, 3.0)?;
    let masked = layer.forward(&x, Some(&half))?;
    println!("half-window mask changes the output by up to {:.3}", masked.max_abs_diff(&fixed)?);

    let g = Tensor::ones(&[f, 12, 12]);
    let grads = layer.backward(&x, Some(&half), &g)?;
    println!(
        "gradient norms: features {:.3}, mask {:.3}",
        grads.features.dot(&grads.features)?.sqrt(),
        grads.mask.as_ref().map_or(0.0, |m| m.dot(m).unwrap().sqrt())
    );
    Ok(())
}
