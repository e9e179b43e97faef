//! Trains a reduced network for a few hundred steps and evaluates it.
//!
//! cargo run --release --example train_small -- svc

use svctx::data::{gen_splits, Dataset};
use svctx::net::{evaluate, train, Config};

fn main() -> svctx::Result<()> {
    let variant = std::env::args().nth(1).unwrap_or_else(|| "svc".into());
    let mut cfg = Config::default();
    cfg.network.set("context", &variant)?;
    cfg.network.widths = [8, 16, 32];
    cfg.optim.max_iter = 300;
    cfg.train.eval_every = 100;
    cfg.data.scene.train_count = 100;
    cfg.data.scene.val_count = 30;
    let (t, v) = gen_splits(&cfg.data.scene);
    let (t, v) = (Dataset::from_scenes(t), Dataset::from_scenes(v));
    let out = train(&cfg, &t, &v, 0)?;
    println!("{}", svctx::net::train::CSV_HEADER);
    for row in &out.trace {
        println!("{}", row.csv_line());
    }
    let (cm, m) = evaluate(&out.model, &t)?;
    println!("train split: pixel_acc {:.4} mean_iou {:.4} ({} pixels)", m.pixel_acc, m.mean_iou, cm.total());
    Ok(())
}
