//! Loads a trained checkpoint and measures whether masks at square pixels
//! favour neighbours of the same stripe texture.
//!
//! cargo run --release --example mask_semantics -- run/model.ckpt

use svctx::ablation::mask_context_preference;
use svctx::data::gen_splits;
use svctx::net::{checkpoint, Config};

fn main() -> svctx::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "run/model.ckpt".into());
    let (model, iteration) = checkpoint::load(&path)?;
    let val = gen_splits(&Config::default().data.scene).1;
    let pref = mask_context_preference(&model, &val, 20)?;
    println!(
        "{} after {iteration} iterations: {}/{} square pixels prefer their own context ({:.1}%)",
        model.config.variant_name(),
        pref.preferring,
        pref.sampled,
        100.0 * pref.fraction()
    );
    Ok(())
}
