//! One denoising aggregation step on hand-made score maps.
//!
//! cargo run --release --example label_denoise

use svctx::denoise::{aggregate_step, existence_potential, penalty, SkipMode};
use svctx::Tensor;

fn main() -> svctx::Result<()> {
    let classes = 3;
    // coarse map: class 0 everywhere, class 2 nowhere
    let mut higher = Tensor::zeros(&[classes, 2, 2]);
    higher.data_mut()[..4].fill(4.0);
    higher.data_mut()[4..8].fill(1.0);
    // fine map votes strongly for the absent class at one pixel
    let mut lower = Tensor::full(&[classes, 4, 4], 0.5);
    lower.data_mut()[2 * 16 + 5] = 3.0;

    let (e, _) = existence_potential(&higher)?;
    let t = 1.0 / classes as f64;
    let delta = Tensor::ones(&[classes]);
    println!("existence potentials {:?}", e.data());
    println!("penalties at t = {t:.3}: {:?}", penalty(&e, t, &delta)?.data());

    for mode in [SkipMode::Plain, SkipMode::Denoise] {
        let (out, _) = aggregate_step(mode, &higher, &lower, 2, t, Some(&delta))?;
        let scores: Vec<f64> = (0..classes).map(|c| out.data()[c * 16 + 5]).collect();
        println!("{mode:?}: scores at pixel (1,1) {scores:.3?}");
    }
    Ok(())
}
