//! Central finite-difference checks for every hand-written backward pass.
//!
//! Each check draws a random instance, contracts the operator output with
//! a fixed random weight tensor to get a scalar, and compares the analytic
//! gradient of that scalar against `(f(x + h) - f(x - h)) / 2h` for every
//! argument. Instances whose inputs sit within a small margin of a kink
//! (ReLU zero, max-pool ties) are redrawn.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::denoise::{self, SkipMode};
use crate::error::{Error, Result};
use crate::net::loss::{cross_entropy_loss, IGNORE_INDEX};
use crate::net::{self, NetworkConfig};
use crate::ops::{self, Mode, RunningStats};
use crate::paired::{self, PairedConvParams, ShapeMask};
use crate::svconv::{SvConvLayer, SvKernelGrads, SvKernels};
use crate::tensor::Tensor;

pub const STEP: f64 = 1e-5;
/// Relative tolerance for single operators.
pub const TOLERANCE: f64 = 1e-5;
/// Relative tolerance for the assembled network.
pub const NETWORK_TOLERANCE: f64 = 1e-4;
/// Gradients smaller than this are compared on an absolute scale.
pub const MAGNITUDE_FLOOR: f64 = 1e-4;
/// Kink-avoidance margin used when drawing instances.
const KINK_MARGIN: f64 = 1e-3;

pub const OPS: &[&str] = &[
    "conv2d",
    "relu",
    "softmax",
    "global_max_pool",
    "bilinear",
    "batch_norm",
    "paired_conv",
    "gaussian_map",
    "paired_mask",
    "sv_conv",
    "sv_conv_separable",
    "denoise",
    "loss",
    "network",
];

/// `|a - n| / max(|a|, |n|, MAGNITUDE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR)
}

/// Central differences of `f` at every entry of `x`.
pub fn numeric_gradient(x: &Tensor, mut f: impl FnMut(&Tensor) -> f64) -> Tensor {
    let indices: Vec<usize> = (0..x.len()).collect();
    let values = numeric_gradient_at(x, &indices, &mut f);
    Tensor::from_vec(x.shape(), values).expect("same shape as x")
}

/// Central differences of `f` at the listed entries of `x`.
pub fn numeric_gradient_at(
    x: &Tensor,
    indices: &[usize],
    mut f: impl FnMut(&Tensor) -> f64,
) -> Vec<f64> {
    let mut probe = x.clone();
    indices
        .iter()
        .map(|&i| {
            let orig = probe.data()[i];
            probe.data_mut()[i] = orig + STEP;
            let plus = f(&probe);
            probe.data_mut()[i] = orig - STEP;
            let minus = f(&probe);
            probe.data_mut()[i] = orig;
            (plus - minus) / (2.0 * STEP)
        })
        .collect()
}

/// Largest [`relative_error`] between two gradients of equal shape.
pub fn max_relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArgReport {
    pub name: String,
    pub max_rel_error: f64,
    pub checked: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpReport {
    pub op: String,
    pub trials: usize,
    pub tolerance: f64,
    pub args: Vec<ArgReport>,
}

impl OpReport {
    pub fn passed(&self) -> bool {
        self.args.iter().all(|a| a.max_rel_error < self.tolerance)
    }

    pub fn worst(&self) -> f64 {
        self.args.iter().map(|a| a.max_rel_error).fold(0.0, f64::max)
    }

    fn merge(&mut self, name: &str, err: f64, checked: usize) {
        match self.args.iter_mut().find(|a| a.name == name) {
            Some(a) => {
                a.max_rel_error = a.max_rel_error.max(err);
                a.checked += checked;
            }
            None => self.args.push(ArgReport {
                name: name.to_string(),
                max_rel_error: err,
                checked,
            }),
        }
    }
}

/// Runs `trials` random instances of the named operator.
pub fn check_op(op: &str, trials: usize, seed: u64) -> Result<OpReport> {
    if !OPS.contains(&op) {
        return Err(Error::invalid(
            "gradcheck",
            format!("unknown op `{op}`; expected one of {}", OPS.join(", ")),
        ));
    }
    let tolerance = if op == "network" { NETWORK_TOLERANCE } else { TOLERANCE };
    let mut report = OpReport {
        op: op.to_string(),
        trials,
        tolerance,
        args: Vec::new(),
    };
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let results = match op {
            "conv2d" => check_conv2d(&mut rng)?,
            "relu" => check_relu(&mut rng)?,
            "softmax" => check_softmax(&mut rng)?,
            "global_max_pool" => check_global_max_pool(&mut rng)?,
            "bilinear" => check_bilinear(&mut rng)?,
            "batch_norm" => check_batch_norm(&mut rng)?,
            "paired_conv" => check_paired_conv(&mut rng)?,
            "gaussian_map" => check_gaussian_map(&mut rng)?,
            "paired_mask" => check_paired_mask(&mut rng)?,
            "sv_conv" => check_sv_conv(&mut rng, false)?,
            "sv_conv_separable" => check_sv_conv(&mut rng, true)?,
            "denoise" => check_denoise(&mut rng)?,
            "loss" => check_loss(&mut rng)?,
            "network" => check_network(&mut rng)?,
            _ => unreachable!(),
        };
        for (name, err, checked) in results {
            report.merge(&name, err, checked);
        }
    }
    Ok(report)
}

type ArgErrors = Vec<(String, f64, usize)>;

fn entry(name: &str, analytic: &Tensor, numeric: &Tensor) -> (String, f64, usize) {
    (
        name.to_string(),
        max_relative_error(analytic, numeric),
        analytic.len(),
    )
}

fn dims<R: Rng>(rng: &mut R, lo: usize, hi: usize) -> usize {
    rng.random_range(lo..=hi)
}

/// Normal draws with every entry at least `KINK_MARGIN` away from zero.
fn randn_off_zero<R: Rng>(shape: &[usize], rng: &mut R) -> Tensor {
    let mut t = Tensor::randn(shape, 1.0, rng);
    for v in t.data_mut() {
        if v.abs() < KINK_MARGIN {
            *v = if *v < 0.0 { -KINK_MARGIN * 10.0 } else { KINK_MARGIN * 10.0 };
        }
    }
    t
}

fn check_conv2d(rng: &mut ChaCha8Rng) -> Result<ArgErrors> {
    let (d, f, h, w) = (dims(rng, 1, 3), dims(rng, 1, 3), dims(rng, 3, 7), dims(rng, 3, 7));
    let k = [1, 3, 5][rng.random_range(0..3)];
    let x = Tensor::randn(&[d, h, w], 1.0, rng);
    let kern = Tensor::randn(&[f, d, k, k], 1.0, rng);
    let wt = Tensor::randn(&[f, h, w], 1.0, rng);
    let (gx, gk) = ops::conv2d_backward(&x, &kern, &wt)?;
    let nx = numeric_gradient(&x, |x| ops::conv2d(x, &kern).unwrap().dot(&wt).unwrap());
    let nk = numeric_gradient(&kern, |k| ops::conv2d(&x, k).unwrap().dot(&wt).unwrap());
    Ok(vec![entry("input", &gx, &nx), entry("kernels", &gk, &nk)])
}

fn check_relu(rng: &mut ChaCha8Rng) -> Result<ArgErrors> {
    let x = randn_off_zero(&[2, dims(rng, 2, 6), dims(rng, 2, 6)], rng);
    let wt = Tensor::randn(x.shape(), 1.0, rng);
    let g = ops::relu_backward(&x, &wt)?;
    let n = numeric_gradient(&x, |x| ops::relu(x).dot(&wt).unwrap());
    Ok(vec![entry("x", &g, &n)])
}

fn check_softmax(rng: &mut ChaCha8Rng) -> Result<ArgErrors> {
    let x = Tensor::randn(&[dims(rng, 2, 5), dims(rng, 1, 5), dims(rng, 1, 5)], 2.0, rng);
    let wt = Tensor::randn(x.shape(), 1.0, rng);
    let y = ops::softmax_channels(&x)?;
    let g = ops::softmax_channels_backward(&y, &wt)?;
    let n = numeric_gradient(&x, |x| ops::softmax_channels(x).unwrap().dot(&wt).unwrap());
    Ok(vec![entry("x", &g, &n)])
}

/// Redraws until every channel's top two values differ by the margin.
fn distinct_maxima<R: Rng>(shape: &[usize], rng: &mut R) -> Tensor {
    loop {
        let x = Tensor::randn(shape, 1.0, rng);
        let plane = shape[1] * shape[2];
        let separated = x.data().chunks(plane).all(|c| {
            let mut v = c.to_vec();
            v.sort_by(|a, b| b.partial_cmp(a).unwrap());
            v.len() < 2 || v[0] - v[1] > KINK_MARGIN
        });
        if separated {
            return x;
        }
    }
}

fn check_global_max_pool(rng: &mut ChaCha8Rng) -> Result<ArgErrors> {
    let shape = [dims(rng, 1, 4), dims(rng, 1, 5), dims(rng, 1, 5)];
    let x = distinct_maxima(&shape, rng);
    let wt = Tensor::randn(&[shape[0]], 1.0, rng);
    let (_, arg) = ops::global_max_pool(&x)?;
    let g = ops::global_max_pool_backward((shape[0], shape[1], shape[2]), &arg, &wt)?;
    let n = numeric_gradient(&x, |x| ops::global_max_pool(x).unwrap().0.dot(&wt).unwrap());
    Ok(vec![entry("x", &g, &n)])
}

fn check_bilinear(rng: &mut ChaCha8Rng) -> Result<ArgErrors> {
    let factor = dims(rng, 1, 4);
    let x = Tensor::randn(&[dims(rng, 1, 3), dims(rng, 1, 4), dims(rng, 1, 4)], 1.0, rng);
    let y = ops::bilinear_upsample(&x, factor)?;
    let wt = Tensor::randn(y.shape(), 1.0, rng);
    let g = ops::bilinear_upsample_backward(&wt, factor)?;
    let n = numeric_gradient(&x, |x| ops::bilinear_upsample(x, factor).unwrap().dot(&wt).unwrap());
    Ok(vec![entry("x", &g, &n)])
}

fn check_batch_norm(rng: &mut ChaCha8Rng) -> Result<ArgErrors> {
    let (n_img, c, h, w) = (dims(rng, 1, 3), dims(rng, 1, 3), dims(rng, 2, 4), dims(rng, 2, 4));
    let xs: Vec<Tensor> = (0..n_img)
        .map(|_| Tensor::randn(&[c, h, w], 1.5, rng))
        .collect();
    let gamma = Tensor::rand_uniform(&[c], 0.5, 2.0, rng);
    let beta = Tensor::randn(&[c], 1.0, rng);
    let wts: Vec<Tensor> = (0..n_img)
        .map(|_| Tensor::randn(&[c, h, w], 1.0, rng))
        .collect();
    let mut out = Vec::new();
    for mode in [Mode::Train, Mode::Eval] {
        let mut stats = RunningStats {
            mean: Tensor::randn(&[c], 0.5, rng),
            var: Tensor::rand_uniform(&[c], 0.5, 2.0, rng),
        };
        let frozen = stats.clone();
        let scalar = |xs: &[Tensor], g: &Tensor, b: &Tensor| -> f64 {
            let mut s = frozen.clone();
            let (ys, _) = ops::batch_norm(xs, g, b, mode, &mut s).unwrap();
            ys.iter().zip(&wts).map(|(y, w)| y.dot(w).unwrap()).sum()
        };
        let (_, cache) = ops::batch_norm(&xs, &gamma, &beta, mode, &mut stats)?;
        let (gxs, gg, gb) = ops::batch_norm_backward(&cache, &gamma, &wts)?;
        let tag = if mode == Mode::Train { "train" } else { "eval" };
        for (idx, gx) in gxs.iter().enumerate() {
            let n = numeric_gradient(&xs[idx], |x| {
                let mut probe = xs.clone();
                probe[idx] = x.clone();
                scalar(&probe, &gamma, &beta)
            });
            out.push(entry(&format!("x[{tag}]"), gx, &n));
        }
        let ng = numeric_gradient(&gamma, |g| scalar(&xs, g, &beta));
        let nb = numeric_gradient(&beta, |b| scalar(&xs, &gamma, b));
        out.push(entry(&format!("gamma[{tag}]"), &gg, &ng));
        out.push(entry(&format!("beta[{tag}]"), &gb, &nb));
    }
    Ok(out)
}

fn random_paired(rng: &mut ChaCha8Rng) -> Result<(Tensor, PairedConvParams)> {
    let k = [1, 3, 5][rng.random_range(0..3)];
    let d = dims(rng, 1, 3);
    let x = Tensor::randn(&[d, dims(rng, 3, 7), dims(rng, 3, 7)], 1.0, rng);
    let params = PairedConvParams::new(
        k,
        Tensor::randn(&[k * k, d, 3, 3], 0.5, rng),
        Tensor::randn(&[k * k, d, 3, 3], 0.5, rng),
    )?;
    Ok((x, params))
}

fn check_paired_conv(rng: &mut ChaCha8Rng) -> Result<ArgErrors> {
    let (x, params) = random_paired(rng)?;
    let (_, h, w) = x.chw()?;
    let k = params.extent();
    let wt = Tensor::randn(&[k * k, h, w], 1.0, rng);
    let g = paired::paired_conv_backward(&x, &params, &wt)?;
    let nx = numeric_gradient(&x, |x| {
        paired::paired_conv_forward(x, &params).unwrap().dot(&wt).unwrap()
    });
    let nc = numeric_gradient(&params.center, |c| {
        let p = PairedConvParams::new(k, c.clone(), params.offset.clone()).unwrap();
        paired::paired_conv_forward(&x, &p).unwrap().dot(&wt).unwrap()
    });
    let no = numeric_gradient(&params.offset, |o| {
        let p = PairedConvParams::new(k, params.center.clone(), o.clone()).unwrap();
        paired::paired_conv_forward(&x, &p).unwrap().dot(&wt).unwrap()
    });
    Ok(vec![
        entry("features", &g.features, &nx),
        entry("center", &g.center, &nc),
        entry("offset", &g.offset, &no),
    ])
}

fn check_gaussian_map(rng: &mut ChaCha8Rng) -> Result<ArgErrors> {
    let k = 3;
    let disc = Tensor::randn(&[k * k, dims(rng, 1, 4), dims(rng, 1, 4)], 3.0, rng);
    let sigma = rng.random_range(0.5..4.0);
    let wt = Tensor::randn(disc.shape(), 1.0, rng);
    let g = paired::gaussian_map_backward(&disc, sigma, &wt)?;
    let n = numeric_gradient(&disc, |d| {
        paired::gaussian_map(d, k, sigma).unwrap().planes().dot(&wt).unwrap()
    });
    Ok(vec![entry("disc", &g, &n)])
}

/// Paired convolution followed by the Gaussian mapping.
fn check_paired_mask(rng: &mut ChaCha8Rng) -> Result<ArgErrors> {
    let (x, params) = random_paired(rng)?;
    let (_, h, w) = x.chw()?;
    let k = params.extent();
    let sigma = paired::DEFAULT_SIGMA;
    let wt = Tensor::randn(&[k * k, h, w], 1.0, rng);
    let mask_of = |x: &Tensor, p: &PairedConvParams| -> f64 {
        let disc = paired::paired_conv_forward(x, p).unwrap();
        paired::gaussian_map(&disc, k, sigma).unwrap().planes().dot(&wt).unwrap()
    };
    let disc = paired::paired_conv_forward(&x, &params)?;
    let g_disc = paired::gaussian_map_backward(&disc, sigma, &wt)?;
    let g = paired::paired_conv_backward(&x, &params, &g_disc)?;
    let nx = numeric_gradient(&x, |x| mask_of(x, &params));
    let nc = numeric_gradient(&params.center, |c| {
        mask_of(&x, &PairedConvParams::new(k, c.clone(), params.offset.clone()).unwrap())
    });
    let no = numeric_gradient(&params.offset, |o| {
        mask_of(&x, &PairedConvParams::new(k, params.center.clone(), o.clone()).unwrap())
    });
    Ok(vec![
        entry("features", &g.features, &nx),
        entry("center", &g.center, &nc),
        entry("offset", &g.offset, &no),
    ])
}

fn check_sv_conv(rng: &mut ChaCha8Rng, separable: bool) -> Result<ArgErrors> {
    let k = [1, 3, 5, 7][rng.random_range(0..4)];
    let (d, f) = (dims(rng, 1, 3), dims(rng, 1, 4));
    let (h, w) = (dims(rng, 3, 9), dims(rng, 3, 9));
    let layer = SvConvLayer::random(k, d, f, separable, rng)?;
    let x = Tensor::randn(&[d, h, w], 1.0, rng);
    let mask = ShapeMask::from_planes(k, Tensor::rand_uniform(&[k * k, h, w], 0.05, 1.0, rng), 3.0)?;
    let wt = Tensor::randn(&[f, h, w], 1.0, rng);
    let grads = layer.backward(&x, Some(&mask), &wt)?;
    let scalar = |x: &Tensor, m: &ShapeMask, l: &SvConvLayer| l.forward(x, Some(m)).unwrap().dot(&wt).unwrap();
    let nx = numeric_gradient(&x, |x| scalar(x, &mask, &layer));
    let nm = numeric_gradient(mask.planes(), |p| {
        scalar(&x, &ShapeMask::from_planes(k, p.clone(), 3.0).unwrap(), &layer)
    });
    let mut out = vec![
        entry("features", &grads.features, &nx),
        entry("mask", grads.mask.as_ref().expect("mask supplied"), &nm),
    ];
    match (&layer.kernels, &grads.kernels) {
        (SvKernels::Full(theta), SvKernelGrads::Full(g)) => {
            let n = numeric_gradient(theta, |t| scalar(&x, &mask, &SvConvLayer::full(t.clone()).unwrap()));
            out.push(entry("kernels", g, &n));
        }
        (
            SvKernels::Separable { depthwise, pointwise },
            SvKernelGrads::Separable { depthwise: gd, pointwise: gp },
        ) => {
            let nd = numeric_gradient(depthwise, |t| {
                scalar(&x, &mask, &SvConvLayer::separable(t.clone(), pointwise.clone()).unwrap())
            });
            let np = numeric_gradient(pointwise, |t| {
                scalar(&x, &mask, &SvConvLayer::separable(depthwise.clone(), t.clone()).unwrap())
            });
            out.push(entry("depthwise", gd, &nd));
            out.push(entry("pointwise", gp, &np));
        }
        _ => unreachable!("gradient variant follows the layer variant"),
    }
    Ok(out)
}

/// Existence potential -> penalty -> denoised aggregation, end to end.
fn check_denoise(rng: &mut ChaCha8Rng) -> Result<ArgErrors> {
    let c = dims(rng, 2, 5);
    let (h, w) = (dims(rng, 1, 4), dims(rng, 1, 4));
    let threshold = rng.random_range(1.0..3.0) / c as f64;
    loop {
        let higher = Tensor::randn(&[c, h, w], 1.5, rng);
        let lower = Tensor::randn(&[c, 2 * h, 2 * w], 1.0, rng);
        let delta = Tensor::randn(&[c], 1.0, rng);
        let (e, _) = denoise::existence_potential(&higher)?;
        let probs = ops::softmax_channels(&higher)?;
        let pen = denoise::penalty(&e, threshold, &delta)?;
        let near_kink = e.data().iter().any(|v| (threshold - v).abs() < KINK_MARGIN)
            || lower.data().chunks(4 * h * w).zip(pen.data()).any(|(ch, p)| {
                ch.iter().any(|l| (l - p).abs() < KINK_MARGIN)
            })
            || probs.data().chunks(h * w).any(|ch| {
                let mut v = ch.to_vec();
                v.sort_by(|a, b| b.partial_cmp(a).unwrap());
                v.len() > 1 && v[0] - v[1] < KINK_MARGIN
            });
        if near_kink {
            continue;
        }
        let wt = Tensor::randn(lower.shape(), 1.0, rng);
        let scalar = |hi: &Tensor, lo: &Tensor, de: &Tensor| {
            denoise::aggregate_step(SkipMode::Denoise, hi, lo, 2, threshold, Some(de))
                .unwrap()
                .0
                .dot(&wt)
                .unwrap()
        };
        let (_, cache) = denoise::aggregate_step(SkipMode::Denoise, &higher, &lower, 2, threshold, Some(&delta))?;
        let g = denoise::aggregate_step_backward(&cache, &lower, Some(&delta), &wt)?;
        let nh = numeric_gradient(&higher, |t| scalar(t, &lower, &delta));
        let nl = numeric_gradient(&lower, |t| scalar(&higher, t, &delta));
        let nd = numeric_gradient(&delta, |t| scalar(&higher, &lower, t));
        return Ok(vec![
            entry("higher_scores", &g.higher, &nh),
            entry("lower_scores", &g.lower, &nl),
            entry("delta", g.delta.as_ref().expect("denoise mode"), &nd),
        ]);
    }
}

fn check_loss(rng: &mut ChaCha8Rng) -> Result<ArgErrors> {
    let c = dims(rng, 2, 5);
    let (h, w) = (dims(rng, 2, 6), dims(rng, 2, 6));
    let scores = Tensor::randn(&[c, h, w], 2.0, rng);
    let labels: Vec<u8> = (0..h * w)
        .map(|_| {
            if rng.random_bool(0.1) {
                IGNORE_INDEX
            } else {
                rng.random_range(0..c as u8)
            }
        })
        .collect();
    let (_, g) = cross_entropy_loss(&scores, &labels, IGNORE_INDEX)?;
    let n = numeric_gradient(&scores, |s| cross_entropy_loss(s, &labels, IGNORE_INDEX).unwrap().0);
    Ok(vec![entry("scores", &g, &n)])
}

/// Whole network on a 2-class 16x16 image: every parameter group is
/// probed at a random subset of coordinates.
fn check_network(rng: &mut ChaCha8Rng) -> Result<ArgErrors> {
    let variant = ["svc_separable", "svc_full", "sfc", "none"][rng.random_range(0..4)];
    let mut config = NetworkConfig::gradcheck_defaults();
    config.set("network.context", variant)?;
    let mut model = net::Model::init(&config, rng)?;
    // Zero head biases put dead-feature pixels exactly on the relu kink of
    // the skip aggregation; move them off it.
    for (name, p) in model.params.iter_mut() {
        if name.ends_with(".bias") {
            *p = Tensor::randn(p.shape(), 0.5, rng);
        }
    }
    let image = Tensor::rand_uniform(&[3, 16, 16], -1.0, 1.0, rng);
    let labels: Vec<u8> = (0..256).map(|_| rng.random_range(0..2u8)).collect();
    let batch = [labels.clone()];
    let loss_of = |m: &net::Model| -> f64 { m.loss(std::slice::from_ref(&image), &batch).unwrap() };
    let mut trained = model.clone();
    let (_, grads) = trained.loss_and_grads(std::slice::from_ref(&image), &[labels.clone()])?;
    let mut out = Vec::new();
    for (name, param) in model.params.named() {
        let g = grads.get(&name).expect("gradient for every parameter");
        let picks: Vec<usize> = if param.len() <= 12 {
            (0..param.len()).collect()
        } else {
            (0..12).map(|_| rng.random_range(0..param.len())).collect()
        };
        let numeric = numeric_gradient_at(param, &picks, |p| {
            let mut probe = model.clone();
            *probe.params.get_mut(&name).unwrap() = p.clone();
            loss_of(&probe)
        });
        let err = picks
            .iter()
            .zip(&numeric)
            .map(|(&i, &n)| relative_error(g.data()[i], n))
            .fold(0.0, f64::max);
        out.push((name.clone(), err, picks.len()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((relative_error(1e-9, 0.0) - 1e-5).abs() < 1e-15);
    }

    #[test]
    fn numeric_gradient_of_a_quadratic() {
        let x = Tensor::from_vec(&[2], vec![1.0, -2.0]).unwrap();
        let g = numeric_gradient(&x, |x| x.data()[0] * x.data()[0] + 3.0 * x.data()[1]);
        assert!((g.data()[0] - 2.0).abs() < 1e-8);
        assert!((g.data()[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn unknown_op_and_zero_trials() {
        assert!(check_op("nonsense", 1, 0).is_err());
        let r = check_op("sv_conv", 0, 0).unwrap();
        assert!(r.args.is_empty() && r.passed());
    }
}
