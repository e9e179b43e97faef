//! Confusion matrix and the three segmentation scores.
//!
//! cargo run --example metrics

use svctx::data::confusion;

fn main() -> svctx::Result<()> {
    let truth = [0, 0, 1, 1, 2, 2, 2, 255];
    let pred = [0, 1, 1, 1, 2, 2, 0, 0];
    let cm = confusion(&pred, &truth, 3, 255)?;
    for t in 0..3 {
        let row: Vec<u64> = (0..3).map(|p| cm.get(t, p)).collect();
        println!("truth {t}: {row:?}");
    }
    let m = cm.metrics()?;
    println!("pixel_acc {:.4} mean_acc {:.4} mean_iou {:.4}", m.pixel_acc, m.mean_acc, m.mean_iou);
    Ok(())
}
