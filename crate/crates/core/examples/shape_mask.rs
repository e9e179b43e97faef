//! Infers a shape mask from random features and prints one window.
//!
//! cargo run --release --example shape_mask

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use svctx::paired::{gaussian_map, paired_conv_forward, DEFAULT_SIGMA};
use svctx::{PairedConvParams, Tensor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let k = 5;
    let features = Tensor::randn(&[8, 12, 12], 1.0, &mut rng);
    let params = PairedConvParams::random(k, 8, &mut rng)?;
    let disc = paired_conv_forward(&features, &params)?;
    let mask = gaussian_map(&disc, k, DEFAULT_SIGMA)?;

    let (i, j) = (6, 6);
    println!("mask window at ({i},{j}), rows m = -2..=2, columns n = -2..=2:");
    for row in mask.window(i, j).chunks(k) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
        println!("  {}", cells.join(" "));
    }
    let dir = std::env::temp_dir().join("svctx_shape_mask");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("window.pgm");
    svctx::data::export_mask_image(&mask, i, j, &path, false)?;
    println!("wrote {}", path.display());
    Ok(())
}
