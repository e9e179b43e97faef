//! Generates a few scenes and writes them with a manifest.
//!
//! cargo run --release --example synthetic_data -- /tmp/scenes

use svctx::data::scene::CLASSES;
use svctx::data::{gen_scenes, Dataset, SceneSpec};

fn main() -> svctx::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "scenes".into());
    let spec = SceneSpec::default();
    let scenes = gen_scenes(&spec, spec.seed, 8);
    let mut counts = [0usize; CLASSES];
    for s in &scenes {
        for &l in &s.labels {
            counts[l as usize] += 1;
        }
    }
    println!("pixels per class over {} scenes: {counts:?}", scenes.len());
    let manifest = Dataset::from_scenes(scenes).save(&out, "demo")?;
    println!("wrote {}", manifest.display());
    Ok(())
}
