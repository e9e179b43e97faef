//! Deterministic training loop and evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::augment::{augment, augment_with};
use super::config::Config;
use super::model::Model;
use super::optim::{sgd_step, OptimizerState};
use crate::data::{ConfusionMatrix, Dataset, Metrics};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "iter,loss,lr,val_pixel_acc,val_mean_acc,val_miou";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    /// Number of completed iterations.
    pub iter: usize,
    /// Mean training loss since the previous row.
    pub loss: f64,
    /// Learning rate of the last step.
    pub lr: f64,
    pub val: Metrics,
}

impl TraceRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.6},{:.6e},{:.6},{:.6},{:.6}",
            self.iter, self.loss, self.lr, self.val.pixel_acc, self.val.mean_acc, self.val.mean_iou
        )
    }
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model,
    /// Model as initialized, before the first step.
    pub initial: Model,
    pub optimizer: OptimizerState,
    pub trace: Vec<TraceRow>,
}

/// Confusion matrix and metrics of eval-mode predictions.
pub fn evaluate(model: &Model, data: &Dataset) -> Result<(ConfusionMatrix, Metrics)> {
    let mut cm = ConfusionMatrix::new(model.config.classes);
    for (img, labels) in data.images.iter().zip(&data.labels) {
        let pred = model.segment(img)?;
        cm.accumulate(&pred, labels, super::loss::IGNORE_INDEX)?;
    }
    let m = cm.metrics()?;
    Ok((cm, m))
}

pub fn train(config: &Config, train_set: &Dataset, val_set: &Dataset, seed: u64) -> Result<TrainOutcome> {
    train_with_progress(config, train_set, val_set, seed, |_| {})
}

/// Runs `optim.max_iter` SGD steps. All randomness (initialization,
/// sampling order, flips) comes from one generator seeded with `seed`.
/// `on_row` sees each trace row as it is produced.
pub fn train_with_progress(
    config: &Config,
    train_set: &Dataset,
    val_set: &Dataset,
    seed: u64,
    mut on_row: impl FnMut(&TraceRow),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::invalid("train", "training set is empty"));
    }
    if val_set.is_empty() {
        return Err(Error::invalid("train", "validation set is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Model::init(&config.network, &mut rng)?;
    model.input_mean = train_set.channel_mean()?;
    let initial = model.clone();
    let mut optimizer = OptimizerState::new(config.optim.clone());
    let o = &config.optim;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut cursor = order.len();
    let mut trace = Vec::new();
    let (mut loss_sum, mut loss_n) = (0.0, 0usize);
    for iter in 0..o.max_iter {
        let mut images = Vec::with_capacity(o.batch_size);
        let mut labels = Vec::with_capacity(o.batch_size);
        for _ in 0..o.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let idx = order[cursor];
            cursor += 1;
            let (img, lbl) = if config.train.flip {
                augment(&train_set.images[idx], &train_set.labels[idx], &model.input_mean, &mut rng)?
            } else {
                augment_with(&train_set.images[idx], &train_set.labels[idx], &model.input_mean, false)?
            };
            images.push(img);
            labels.push(lbl);
        }
        let (loss, grads) = model.loss_and_grads(&images, &labels)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                what: "training loss".into(),
                iteration: iter,
            });
        }
        let lr = sgd_step(&mut model.params, &grads, &mut optimizer)?;
        loss_sum += loss;
        loss_n += 1;
        let done = iter + 1;
        if done % config.train.eval_every == 0 || done == o.max_iter {
            let (_, val) = evaluate(&model, val_set)?;
            let row = TraceRow {
                iter: done,
                loss: loss_sum / loss_n as f64,
                lr,
                val,
            };
            log::info!("{}", row.csv_line());
            if let Some(delta) = model.params.get(super::model::LD_DELTAS[0]) {
                if delta.data().iter().any(|&d| d < 0.0) {
                    log::info!("iteration {done}: a denoising penalty weight is negative");
                }
            }
            on_row(&row);
            trace.push(row);
            loss_sum = 0.0;
            loss_n = 0;
        }
    }
    Ok(TrainOutcome {
        model,
        initial,
        optimizer,
        trace,
    })
}

/// Train and validation sets: read from the configured manifests, or
/// generated from the scene spec when no manifest is given.
pub fn load_data(config: &Config) -> Result<(Dataset, Dataset)> {
    let d = &config.data;
    let generated = if d.train_manifest.is_none() || d.val_manifest.is_none() {
        Some(crate::data::gen_splits(&d.scene))
    } else {
        None
    };
    let (gen_train, gen_val) = match generated {
        Some((t, v)) => (Some(Dataset::from_scenes(t)), Some(Dataset::from_scenes(v))),
        None => (None, None),
    };
    let train = match &d.train_manifest {
        Some(p) => Dataset::load_manifest(p)?,
        None => gen_train.expect("generated above"),
    };
    let val = match &d.val_manifest {
        Some(p) => Dataset::load_manifest(p)?,
        None => gen_val.expect("generated above"),
    };
    Ok((train, val))
}
