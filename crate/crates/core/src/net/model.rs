//! The toy segmentation network.
//!
//! ```text
//! x ─ conv3x3─BN─relu ─ f1 ─ down2 ─ conv─BN─relu ─ f2 ─ down2 ─ conv─BN─relu ─ f3
//!                                                                 │
//!                    paired conv ─ gaussian ─ mask ─┐             │
//!                                                   SV conv ─BN─relu ─ c
//! S^1 = head1(f1)   S^2 = head2(f2)   S3 = head3(c)
//! S2  = step(S3, S^2, t)   S1 = step(S2, S^1, 2t)      (S1 is the output)
//! ```
//!
//! `step` is plain, clamped or denoising skip aggregation (see
//! [`crate::denoise::SkipMode`]). Heads are 1x1 convolutions with bias.
//! The `none` variant feeds `f3` straight into the coarsest head; `sfc`
//! runs the same context layer with no mask.

use std::collections::BTreeMap;

use rand::Rng;

use super::config::{ContextKind, NetworkConfig};
use super::loss::{cross_entropy_loss, predict_labels, IGNORE_INDEX};
use super::params::Params;
use crate::denoise::{aggregate_step, aggregate_step_backward, SkipMode, StepCache};
use crate::error::{check_dim, Error, Result};
use crate::ops::{
    add_channel_bias, avg_down2, avg_down2_backward, batch_norm, batch_norm_backward, channel_sum,
    conv2d, conv2d_backward, relu, relu_backward, BatchNormCache, Mode, RunningStats,
};
use crate::paired::{
    gaussian_map, gaussian_map_backward, paired_conv_backward, paired_conv_forward,
    PairedConvParams, ShapeMask,
};
use crate::svconv::{SvConvLayer, SvKernelGrads, SvKernels};
use crate::tensor::Tensor;

const STAGES: [&str; 3] = ["stage1", "stage2", "stage3"];
const HEADS: [&str; 3] = ["head1", "head2", "head3"];
/// Penalty vectors, named after the level whose existence potential they scale.
pub const LD_DELTAS: [&str; 2] = ["ld.level3.delta", "ld.level2.delta"];

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: NetworkConfig,
    pub params: Params,
    /// Running batch-norm statistics keyed by block (`stage1`..`stage3`, `context`).
    pub stats: BTreeMap<String, RunningStats>,
    /// Per-channel mean removed by [`Model::preprocess`].
    pub input_mean: Tensor,
}

/// Outputs of a forward pass, one entry per image.
#[derive(Clone, Debug)]
pub struct Forward {
    /// Aggregated finest-level scores `[C,H,W]` at input resolution.
    pub scores: Vec<Tensor>,
    /// Raw per-level head outputs `[S^1, S^2, S3]`, finest first.
    pub levels: Vec<[Tensor; 3]>,
    /// Shape masks at stage-3 resolution; `None` unless the variant is SVC.
    pub masks: Vec<Option<ShapeMask>>,
}

struct BlockCache {
    inputs: Vec<Tensor>,
    /// Batch-norm outputs, i.e. the relu inputs.
    normed: Vec<Tensor>,
    bn: BatchNormCache,
}

struct ContextCache {
    inputs: Vec<Tensor>,
    disc: Vec<Option<Tensor>>,
    masks: Vec<Option<ShapeMask>>,
    normed: Vec<Tensor>,
    bn: BatchNormCache,
}

struct Cache {
    stages: Vec<BlockCache>,
    /// Stage outputs `f1, f2, f3`.
    features: Vec<Vec<Tensor>>,
    context: Option<ContextCache>,
    /// Inputs to the three heads.
    head_inputs: Vec<Vec<Tensor>>,
    /// Per image: raw lower-level scores and caches of the two steps.
    steps: Vec<[(Tensor, StepCache); 2]>,
}

impl Model {
    pub fn init<R: Rng + ?Sized>(config: &NetworkConfig, rng: &mut R) -> Result<Model> {
        config.validate()?;
        let c = config.classes;
        let mut params = Params::new();
        let mut stats = BTreeMap::new();
        let mut prev = config.in_channels;
        for (name, &width) in STAGES.iter().zip(&config.widths) {
            let std = (2.0 / (9.0 * prev as f64)).sqrt();
            params.insert(format!("{name}.weight"), Tensor::randn(&[width, prev, 3, 3], std, rng));
            params.insert(format!("{name}.gamma"), Tensor::ones(&[width]));
            params.insert(format!("{name}.beta"), Tensor::zeros(&[width]));
            stats.insert(name.to_string(), RunningStats::new(width));
            prev = width;
        }
        let w3 = config.widths[2];
        let k = config.context_kernel;
        if config.context == ContextKind::ShapeVariant {
            let p = PairedConvParams::random(k, w3, rng)?;
            params.insert("paired.center", p.center);
            params.insert("paired.offset", p.offset);
        }
        if config.context != ContextKind::None {
            let layer = SvConvLayer::random(k, w3, w3, config.separable, rng)?;
            match layer.kernels {
                SvKernels::Full(t) => params.insert("context.kernels", t),
                SvKernels::Separable {
                    depthwise,
                    pointwise,
                } => {
                    params.insert("context.depthwise", depthwise);
                    params.insert("context.pointwise", pointwise);
                }
            }
            params.insert("context.gamma", Tensor::ones(&[w3]));
            params.insert("context.beta", Tensor::zeros(&[w3]));
            stats.insert("context".to_string(), RunningStats::new(w3));
        }
        for (name, &width) in HEADS.iter().zip(&config.widths) {
            let std = (2.0 / width as f64).sqrt();
            params.insert(format!("{name}.weight"), Tensor::randn(&[c, width, 1, 1], std, rng));
            params.insert(format!("{name}.bias"), Tensor::zeros(&[c]));
        }
        if config.ld_enabled {
            for name in LD_DELTAS {
                params.insert(name, Tensor::ones(&[c]));
            }
        }
        let model = Model {
            config: config.clone(),
            params,
            stats,
            input_mean: Tensor::zeros(&[config.in_channels]),
        };
        model.validate()?;
        Ok(model)
    }

    /// Parameter names and shapes the configuration calls for.
    pub fn expected_shapes(config: &NetworkConfig) -> Vec<(String, Vec<usize>)> {
        let c = config.classes;
        let k = config.context_kernel;
        let w3 = config.widths[2];
        let mut out = Vec::new();
        let mut prev = config.in_channels;
        for (name, &width) in STAGES.iter().zip(&config.widths) {
            out.push((format!("{name}.weight"), vec![width, prev, 3, 3]));
            out.push((format!("{name}.gamma"), vec![width]));
            out.push((format!("{name}.beta"), vec![width]));
            prev = width;
        }
        if config.context == ContextKind::ShapeVariant {
            out.push(("paired.center".into(), vec![k * k, w3, 3, 3]));
            out.push(("paired.offset".into(), vec![k * k, w3, 3, 3]));
        }
        if config.context != ContextKind::None {
            if config.separable {
                out.push(("context.depthwise".into(), vec![w3, k, k]));
                out.push(("context.pointwise".into(), vec![w3, w3]));
            } else {
                out.push(("context.kernels".into(), vec![w3, w3, k, k]));
            }
            out.push(("context.gamma".into(), vec![w3]));
            out.push(("context.beta".into(), vec![w3]));
        }
        for (name, &width) in HEADS.iter().zip(&config.widths) {
            out.push((format!("{name}.weight"), vec![c, width, 1, 1]));
            out.push((format!("{name}.bias"), vec![c]));
        }
        if config.ld_enabled {
            for name in LD_DELTAS {
                out.push((name.into(), vec![c]));
            }
        }
        out.sort();
        out
    }

    /// Checks that parameters, statistics and mean match the configuration.
    pub fn validate(&self) -> Result<()> {
        let expected = Self::expected_shapes(&self.config);
        let actual: Vec<(String, Vec<usize>)> = self
            .params
            .iter()
            .map(|(n, t)| (n.clone(), t.shape().to_vec()))
            .collect();
        if expected != actual {
            let missing: Vec<String> = expected
                .iter()
                .filter(|e| !actual.contains(e))
                .map(|(n, s)| format!("{n}{s:?}"))
                .collect();
            let extra: Vec<String> = actual
                .iter()
                .filter(|a| !expected.contains(a))
                .map(|(n, s)| format!("{n}{s:?}"))
                .collect();
            return Err(Error::Config(format!(
                "parameters do not match the network config (variant {}): missing {missing:?}, unexpected {extra:?}",
                self.config.variant_name()
            )));
        }
        for (idx, name) in STAGES.iter().enumerate() {
            let s = self.stat(name)?;
            check_dim("model", "running stats length", s.mean.len(), self.config.widths[idx])?;
        }
        if self.config.context != ContextKind::None {
            self.stat("context")?;
        }
        check_dim("model", "input mean length", self.input_mean.len(), self.config.in_channels)
    }

    fn stat(&self, name: &str) -> Result<&RunningStats> {
        self.stats
            .get(name)
            .ok_or_else(|| Error::Config(format!("missing batch-norm statistics `{name}`")))
    }

    fn skip_mode(&self) -> SkipMode {
        if self.config.ld_enabled {
            SkipMode::Denoise
        } else if self.config.clamp_skip {
            SkipMode::Clamped
        } else {
            SkipMode::Plain
        }
    }

    /// Subtracts the stored per-channel input mean.
    pub fn preprocess(&self, image: &Tensor) -> Result<Tensor> {
        subtract_mean(image, &self.input_mean)
    }

    fn check_input(&self, image: &Tensor) -> Result<()> {
        let (c, h, w) = image.chw()?;
        check_dim("forward_network", "input channels", c, self.config.in_channels)?;
        if h % 4 != 0 || w % 4 != 0 {
            return Err(Error::invalid(
                "forward_network",
                format!("input {h}x{w} must be divisible by 4"),
            ));
        }
        Ok(())
    }

    fn forward_impl(
        &self,
        stats: &mut BTreeMap<String, RunningStats>,
        images: &[Tensor],
        mode: Mode,
    ) -> Result<(Forward, Cache)> {
        if images.is_empty() {
            return Err(Error::invalid("forward_network", "empty batch"));
        }
        for img in images {
            self.check_input(img)?;
        }
        let p = &self.params;
        let mut stage_caches = Vec::with_capacity(3);
        let mut features: Vec<Vec<Tensor>> = Vec::with_capacity(3);
        let mut x: Vec<Tensor> = images.to_vec();
        for (idx, name) in STAGES.iter().enumerate() {
            if idx > 0 {
                x = x.iter().map(avg_down2).collect::<Result<_>>()?;
            }
            let pre: Vec<Tensor> = x
                .iter()
                .map(|xi| conv2d(xi, p.tensor(&format!("{name}.weight"))?))
                .collect::<Result<_>>()?;
            let stats = stats.get_mut(*name).expect("validated");
            let (normed, bn) = batch_norm(
                &pre,
                p.tensor(&format!("{name}.gamma"))?,
                p.tensor(&format!("{name}.beta"))?,
                mode,
                stats,
            )?;
            let out: Vec<Tensor> = normed.iter().map(relu).collect();
            stage_caches.push(BlockCache {
                inputs: std::mem::take(&mut x),
                normed,
                bn,
            });
            x = out.clone();
            features.push(out);
        }

        let k = self.config.context_kernel;
        let sigma = self.config.sigma;
        let (context_out, context_cache) = match self.config.context {
            ContextKind::None => (features[2].clone(), None),
            kind => {
                let layer = context_layer(p, self.config.separable)?;
                let paired = match kind {
                    ContextKind::ShapeVariant => Some(PairedConvParams::new(
                        k,
                        p.tensor("paired.center")?.clone(),
                        p.tensor("paired.offset")?.clone(),
                    )?),
                    _ => None,
                };
                let mut disc = Vec::new();
                let mut masks = Vec::new();
                let mut pre = Vec::new();
                for f3 in &features[2] {
                    let (d, mask) = match &paired {
                        Some(pp) => {
                            let d = paired_conv_forward(f3, pp)?;
                            let mask = gaussian_map(&d, k, sigma)?;
                            (Some(d), Some(mask))
                        }
                        None => (None, None),
                    };
                    pre.push(layer.forward(f3, mask.as_ref())?);
                    disc.push(d);
                    masks.push(mask);
                }
                let stats = stats.get_mut("context").expect("validated");
                let (normed, bn) = batch_norm(
                    &pre,
                    p.tensor("context.gamma")?,
                    p.tensor("context.beta")?,
                    mode,
                    stats,
                )?;
                let out: Vec<Tensor> = normed.iter().map(relu).collect();
                (
                    out,
                    Some(ContextCache {
                        inputs: features[2].clone(),
                        disc,
                        masks,
                        normed,
                        bn,
                    }),
                )
            }
        };

        let head_inputs = vec![features[0].clone(), features[1].clone(), context_out];
        let skip = self.skip_mode();
        let t = self.config.base_threshold();
        let n = images.len();
        let mut scores = Vec::with_capacity(n);
        let mut levels = Vec::with_capacity(n);
        let mut steps = Vec::with_capacity(n);
        for b in 0..n {
            let head = |lvl: usize| -> Result<Tensor> {
                let name = HEADS[lvl];
                let s = conv2d(&head_inputs[lvl][b], p.tensor(&format!("{name}.weight"))?)?;
                add_channel_bias(&s, p.tensor(&format!("{name}.bias"))?)
            };
            let (s1_raw, s2_raw, s3) = (head(0)?, head(1)?, head(2)?);
            let delta = |i: usize| self.config.ld_enabled.then(|| p.get(LD_DELTAS[i])).flatten();
            let (s2, c2) = aggregate_step(skip, &s3, &s2_raw, 2, t, delta(0))?;
            let (s1, c1) = aggregate_step(skip, &s2, &s1_raw, 2, 2.0 * t, delta(1))?;
            scores.push(s1);
            steps.push([(s2_raw.clone(), c2), (s1_raw.clone(), c1)]);
            levels.push([s1_raw, s2_raw, s3]);
        }
        let masks = match &context_cache {
            Some(cc) => cc.masks.clone(),
            None => vec![None; n],
        };
        Ok((
            Forward {
                scores,
                levels,
                masks,
            },
            Cache {
                stages: stage_caches,
                features,
                context: context_cache,
                head_inputs,
                steps,
            },
        ))
    }

    /// Inference with running batch-norm statistics, on preprocessed images.
    pub fn forward(&self, images: &[Tensor]) -> Result<Forward> {
        let mut stats = self.stats.clone();
        Ok(self.forward_impl(&mut stats, images, Mode::Eval)?.0)
    }

    /// Training-mode forward (batch statistics) that also updates the
    /// running statistics.
    pub fn forward_train(&mut self, images: &[Tensor]) -> Result<Forward> {
        let mut stats = std::mem::take(&mut self.stats);
        let out = self.forward_impl(&mut stats, images, Mode::Train);
        self.stats = stats;
        Ok(out?.0)
    }

    /// Mean per-image cross-entropy of a training-mode forward, leaving
    /// the model untouched.
    pub fn loss(&self, images: &[Tensor], labels: &[Vec<u8>]) -> Result<f64> {
        check_dim("loss", "label maps", labels.len(), images.len())?;
        let mut stats = self.stats.clone();
        let (fwd, _) = self.forward_impl(&mut stats, images, Mode::Train)?;
        let mut total = 0.0;
        for (s, l) in fwd.scores.iter().zip(labels) {
            total += cross_entropy_loss(s, l, IGNORE_INDEX)?.0;
        }
        Ok(total / images.len() as f64)
    }

    /// Training-mode forward and backward on preprocessed images. Returns
    /// the mean per-image loss and its gradient for every parameter;
    /// running statistics are updated.
    pub fn loss_and_grads(&mut self, images: &[Tensor], labels: &[Vec<u8>]) -> Result<(f64, Params)> {
        check_dim("loss_and_grads", "label maps", labels.len(), images.len())?;
        let mut stats = std::mem::take(&mut self.stats);
        let out = self.forward_impl(&mut stats, images, Mode::Train);
        self.stats = stats;
        let (fwd, cache) = out?;
        let n = images.len() as f64;
        let mut total = 0.0;
        let mut upstream = Vec::with_capacity(images.len());
        for (s, l) in fwd.scores.iter().zip(labels) {
            let (loss, g) = cross_entropy_loss(s, l, IGNORE_INDEX)?;
            total += loss;
            upstream.push(g.scale(1.0 / n));
        }
        let grads = self.backward(&cache, upstream)?;
        Ok((total / n, grads))
    }

    fn backward(&self, cache: &Cache, g_scores: Vec<Tensor>) -> Result<Params> {
        let p = &self.params;
        let mut grads = Params::new();
        let n = g_scores.len();
        // Gradients w.r.t. the three head inputs.
        let mut g_heads: [Vec<Tensor>; 3] = Default::default();
        for (b, g1) in g_scores.into_iter().enumerate() {
            let [(s2_raw, c2), (s1_raw, c1)] = &cache.steps[b];
            let d = |i: usize| self.config.ld_enabled.then(|| p.get(LD_DELTAS[i])).flatten();
            let step1 = aggregate_step_backward(c1, s1_raw, d(1), &g1)?;
            let step2 = aggregate_step_backward(c2, s2_raw, d(0), &step1.higher)?;
            if let Some(gd) = &step1.delta {
                grads.accumulate(LD_DELTAS[1], gd)?;
            }
            if let Some(gd) = &step2.delta {
                grads.accumulate(LD_DELTAS[0], gd)?;
            }
            for (lvl, g) in [(0, &step1.lower), (1, &step2.lower), (2, &step2.higher)] {
                let name = HEADS[lvl];
                let weight = p.tensor(&format!("{name}.weight"))?;
                let (gx, gw) = conv2d_backward(&cache.head_inputs[lvl][b], weight, g)?;
                grads.accumulate(&format!("{name}.weight"), &gw)?;
                grads.accumulate(&format!("{name}.bias"), &channel_sum(g)?)?;
                g_heads[lvl].push(gx);
            }
        }
        let [g_f1, g_f2, g_top] = g_heads;

        let mut g_f3 = match &cache.context {
            None => g_top,
            Some(cc) => self.context_backward(cc, g_top, &mut grads)?,
        };
        let mut g_lower = [Some(g_f1), Some(g_f2)];
        for idx in (0..3).rev() {
            let name = STAGES[idx];
            let sc = &cache.stages[idx];
            let g_normed: Vec<Tensor> = sc
                .normed
                .iter()
                .zip(&g_f3)
                .map(|(x, g)| relu_backward(x, g))
                .collect::<Result<_>>()?;
            let gamma = p.tensor(&format!("{name}.gamma"))?;
            let (g_pre, g_gamma, g_beta) = batch_norm_backward(&sc.bn, gamma, &g_normed)?;
            grads.accumulate(&format!("{name}.gamma"), &g_gamma)?;
            grads.accumulate(&format!("{name}.beta"), &g_beta)?;
            let weight = p.tensor(&format!("{name}.weight"))?;
            let mut g_inputs = Vec::with_capacity(n);
            for (x, g) in sc.inputs.iter().zip(&g_pre) {
                let (gx, gw) = conv2d_backward(x, weight, g)?;
                grads.accumulate(&format!("{name}.weight"), &gw)?;
                g_inputs.push(gx);
            }
            if idx == 0 {
                break;
            }
            // Through the downsample into the previous stage's output, which
            // also fed a head.
            let mut g_prev = g_lower[idx - 1].take().expect("each level once");
            for (acc, g) in g_prev.iter_mut().zip(&g_inputs) {
                acc.add_assign(&avg_down2_backward(g)?)?;
            }
            g_f3 = g_prev;
        }
        debug_assert_eq!(cache.features.len(), 3);
        Ok(grads)
    }

    /// Backward through relu, batch norm, SV conv and (for SVC) the mask
    /// branch; returns the gradient w.r.t. the stage-3 features.
    fn context_backward(&self, cc: &ContextCache, g_out: Vec<Tensor>, grads: &mut Params) -> Result<Vec<Tensor>> {
        let p = &self.params;
        let g_normed: Vec<Tensor> = cc
            .normed
            .iter()
            .zip(&g_out)
            .map(|(x, g)| relu_backward(x, g))
            .collect::<Result<_>>()?;
        let (g_pre, g_gamma, g_beta) = batch_norm_backward(&cc.bn, p.tensor("context.gamma")?, &g_normed)?;
        grads.accumulate("context.gamma", &g_gamma)?;
        grads.accumulate("context.beta", &g_beta)?;
        let layer = context_layer(p, self.config.separable)?;
        let paired = match self.config.context {
            ContextKind::ShapeVariant => Some(PairedConvParams::new(
                self.config.context_kernel,
                p.tensor("paired.center")?.clone(),
                p.tensor("paired.offset")?.clone(),
            )?),
            _ => None,
        };
        let mut g_features = Vec::with_capacity(g_pre.len());
        for (b, g) in g_pre.iter().enumerate() {
            let x = &cc.inputs[b];
            let sv = layer.backward(x, cc.masks[b].as_ref(), g)?;
            match &sv.kernels {
                SvKernelGrads::Full(t) => grads.accumulate("context.kernels", t)?,
                SvKernelGrads::Separable {
                    depthwise,
                    pointwise,
                } => {
                    grads.accumulate("context.depthwise", depthwise)?;
                    grads.accumulate("context.pointwise", pointwise)?;
                }
            }
            let mut gx = sv.features;
            if let (Some(pp), Some(disc), Some(g_mask)) = (&paired, &cc.disc[b], &sv.mask) {
                let g_disc = gaussian_map_backward(disc, self.config.sigma, g_mask)?;
                let pg = paired_conv_backward(x, pp, &g_disc)?;
                grads.accumulate("paired.center", &pg.center)?;
                grads.accumulate("paired.offset", &pg.offset)?;
                gx.add_assign(&pg.features)?;
            }
            g_features.push(gx);
        }
        Ok(g_features)
    }

    /// Eval-mode class map for a raw (not mean-subtracted) image.
    pub fn segment(&self, image: &Tensor) -> Result<Vec<u8>> {
        let fwd = self.forward(&[self.preprocess(image)?])?;
        predict_labels(&fwd.scores[0])
    }

    /// Eval-mode shape mask for a raw image; `None` unless the variant is SVC.
    pub fn shape_mask(&self, image: &Tensor) -> Result<Option<ShapeMask>> {
        let mut fwd = self.forward(&[self.preprocess(image)?])?;
        Ok(fwd.masks.pop().flatten())
    }
}

fn context_layer(p: &Params, separable: bool) -> Result<SvConvLayer> {
    if separable {
        SvConvLayer::separable(
            p.tensor("context.depthwise")?.clone(),
            p.tensor("context.pointwise")?.clone(),
        )
    } else {
        SvConvLayer::full(p.tensor("context.kernels")?.clone())
    }
}

pub(crate) fn subtract_mean(image: &Tensor, mean: &Tensor) -> Result<Tensor> {
    let (c, h, w) = image.chw()?;
    check_dim("preprocess", "mean length", mean.len(), c)?;
    let plane = h * w;
    let mut out = image.clone();
    for (ci, chunk) in out.data_mut().chunks_mut(plane).enumerate() {
        let m = mean.data()[ci];
        chunk.iter_mut().for_each(|v| *v -= m);
    }
    Ok(out)
}
