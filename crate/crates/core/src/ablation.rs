//! Kernel-size by context-variant sweeps and the mask statistic used to
//! judge whether masks follow scene context.

use crate::data::scene::{context_of, Scene};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::net::{train, Config, Model};

/// One trained grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub kernel: usize,
    pub variant: String,
    pub seed: u64,
    pub pixel_acc: f64,
    pub mean_acc: f64,
    pub mean_iou: f64,
}

pub const CELLS_HEADER: &str = "kernel,variant,seed,pixel_acc,mean_acc,mean_iou";

impl Cell {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{:.6}",
            self.kernel, self.variant, self.seed, self.pixel_acc, self.mean_acc, self.mean_iou
        )
    }
}

/// Configuration for one cell: kernel 0 means the no-context network.
pub fn cell_config(base: &Config, kernel: usize, variant: &str) -> Result<Config> {
    let mut cfg = base.clone();
    if kernel == 0 {
        cfg.network.set("context", "none")?;
    } else {
        cfg.network.set("context", variant)?;
        cfg.network.context_kernel = kernel;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run_cell(base: &Config, kernel: usize, variant: &str, seed: u64, data: &(Dataset, Dataset)) -> Result<Cell> {
    let cfg = cell_config(base, kernel, variant)?;
    let out = train(&cfg, &data.0, &data.1, seed)?;
    let last = out
        .trace
        .last()
        .ok_or_else(|| Error::invalid("ablate", "training produced no trace"))?;
    Ok(Cell {
        kernel,
        variant: if kernel == 0 { "none".into() } else { variant.to_string() },
        seed,
        pixel_acc: last.val.pixel_acc,
        mean_acc: last.val.mean_acc,
        mean_iou: last.val.mean_iou,
    })
}

/// Trains every `(kernel, variant, seed)` cell in that order. Kernel 0 is
/// trained once per seed, as the no-context variant.
pub fn run_grid(
    base: &Config,
    kernels: &[usize],
    variants: &[String],
    seeds: &[u64],
    data: &(Dataset, Dataset),
    mut on_cell: impl FnMut(&Cell),
) -> Result<Vec<Cell>> {
    let mut cells = Vec::new();
    for &k in kernels {
        let vs: Vec<&str> = if k == 0 {
            vec!["none"]
        } else {
            variants.iter().map(String::as_str).collect()
        };
        for v in vs {
            for &seed in seeds {
                let cell = run_cell(base, k, v, seed, data)?;
                on_cell(&cell);
                cells.push(cell);
            }
        }
    }
    Ok(cells)
}

/// `(mean, sample standard deviation)`; the deviation is 0 for one value.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Rows per kernel, one `mean±std` mIoU column per variant; the kernel-0
/// row repeats the no-context result in every column.
pub fn table(cells: &[Cell], kernels: &[usize], variants: &[String]) -> String {
    let mut out = String::from("kernel");
    for v in variants {
        out.push(',');
        out.push_str(v);
    }
    out.push('\n');
    for &k in kernels {
        out.push_str(&k.to_string());
        for v in variants {
            let vals: Vec<f64> = cells
                .iter()
                .filter(|c| c.kernel == k && (k == 0 || &c.variant == v))
                .map(|c| c.mean_iou)
                .collect();
            if vals.is_empty() {
                out.push_str(",");
            } else {
                let (m, s) = mean_std(&vals);
                out.push_str(&format!(",{m:.4}±{s:.4}"));
            }
        }
        out.push('\n');
    }
    out
}

/// Outcome of [`mask_context_preference`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaskPreference {
    /// Sampled pixels whose window contained both stripe contexts.
    pub sampled: usize,
    /// Of those, pixels whose mask is larger on average over same-context
    /// neighbours than over other-context neighbours.
    pub preferring: usize,
}

impl MaskPreference {
    pub fn fraction(&self) -> f64 {
        if self.sampled == 0 {
            0.0
        } else {
            self.preferring as f64 / self.sampled as f64
        }
    }
}

/// For square pixels (at mask resolution) in the given scenes, compares the
/// mean mask weight over window neighbours of the same stripe context with
/// the mean over neighbours of the other context. Labels are subsampled to
/// the mask grid by taking the pixel at the centre of each cell; pixels
/// whose window lacks either context are skipped. `per_scene` caps the
/// number of pixels taken from one scene (evenly spaced in raster order).
pub fn mask_context_preference(model: &Model, scenes: &[Scene], per_scene: usize) -> Result<MaskPreference> {
    let mut result = MaskPreference {
        sampled: 0,
        preferring: 0,
    };
    for scene in scenes {
        let mask = model
            .shape_mask(&scene.image)?
            .ok_or_else(|| Error::invalid("mask_context_preference", "model has no shape mask"))?;
        let (_, h, w) = scene.image.chw()?;
        let (mh, mw) = (mask.height(), mask.width());
        let (sy, sx) = (h / mh, w / mw);
        let grid: Vec<u8> = (0..mh * mw)
            .map(|p| scene.labels[((p / mw) * sy + sy / 2) * w + (p % mw) * sx + sx / 2])
            .collect();
        let targets: Vec<usize> = (0..mh * mw)
            .filter(|&p| matches!(grid[p], crate::data::scene::H_SQUARE | crate::data::scene::V_SQUARE))
            .collect();
        let step = targets.len().div_ceil(per_scene.max(1)).max(1);
        let half = (mask.extent() / 2) as isize;
        for &p in targets.iter().step_by(step) {
            let (i, j) = (p / mw, p % mw);
            let own = context_of(grid[p]);
            let (mut same, mut ns, mut other, mut no) = (0.0, 0usize, 0.0, 0usize);
            for m in -half..=half {
                for n in -half..=half {
                    let (q, r) = (i as isize - m, j as isize - n);
                    if (m, n) == (0, 0) || q < 0 || r < 0 || q >= mh as isize || r >= mw as isize {
                        continue;
                    }
                    let ctx = context_of(grid[q as usize * mw + r as usize]);
                    let v = mask.at(i, j, m, n);
                    match ctx {
                        Some(c) if Some(c) == own => {
                            same += v;
                            ns += 1;
                        }
                        Some(_) => {
                            other += v;
                            no += 1;
                        }
                        None => {}
                    }
                }
            }
            if ns == 0 || no == 0 {
                continue;
            }
            result.sampled += 1;
            if same / ns as f64 > other / no as f64 {
                result.preferring += 1;
            }
        }
    }
    Ok(result)
}
