//! Synthetic scenes where identical squares are told apart only by the
//! stripe texture around them.
//!
//! A random rectangle is cut in two; one half is filled with horizontal
//! stripes and the other with vertical stripes, both drawn from the same
//! two colours. Each half holds a square of one flat colour placed close to
//! the cut, so the other texture is in view of anything that looks around
//! the square. Everything outside the rectangle is flat background.
//!
//! | class | meaning                   |
//! |-------|---------------------------|
//! | 0     | background                |
//! | 1     | horizontal-stripe region  |
//! | 2     | vertical-stripe region    |
//! | 3     | square inside class 1     |
//! | 4     | square inside class 2     |

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::net::config::parse;
use crate::tensor::Tensor;

pub const CLASSES: usize = 5;
pub const BACKGROUND: u8 = 0;
pub const H_REGION: u8 = 1;
pub const V_REGION: u8 = 2;
pub const H_SQUARE: u8 = 3;
pub const V_SQUARE: u8 = 4;

const BACKGROUND_RGB: [f64; 3] = [0.5, 0.5, 0.5];
const STRIPE_RGB: [[f64; 3]; 2] = [[0.15, 0.35, 0.75], [0.75, 0.65, 0.2]];
const SQUARE_RGB: [f64; 3] = [0.9, 0.15, 0.2];

/// Stripe orientation group of a class; `None` for background.
pub fn context_of(label: u8) -> Option<u8> {
    match label {
        H_REGION | H_SQUARE => Some(H_REGION),
        V_REGION | V_SQUARE => Some(V_REGION),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub size: usize,
    pub object_min: usize,
    pub object_max: usize,
    /// Largest distance in pixels between a square and the cut.
    pub max_gap: usize,
    /// Stripe period in pixels; each colour band is half of it.
    pub stripe_period: usize,
    /// Probability that a half receives a square (at least one is always placed).
    pub object_prob: f64,
    pub noise: f64,
    pub seed: u64,
    pub train_count: usize,
    pub val_count: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            size: 48,
            object_min: 8,
            object_max: 12,
            max_gap: 2,
            stripe_period: 4,
            object_prob: 0.85,
            noise: 0.05,
            seed: 1,
            train_count: 400,
            val_count: 100,
        }
    }
}

impl SceneSpec {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let full = format!("data.{key}");
        match key {
            "size" => self.size = parse(&full, value)?,
            "object_min" => self.object_min = parse(&full, value)?,
            "object_max" => self.object_max = parse(&full, value)?,
            "max_gap" => self.max_gap = parse(&full, value)?,
            "stripe_period" => self.stripe_period = parse(&full, value)?,
            "object_prob" => self.object_prob = parse(&full, value)?,
            "noise" => self.noise = parse(&full, value)?,
            "seed" => self.seed = parse(&full, value)?,
            "train_count" => self.train_count = parse(&full, value)?,
            "val_count" => self.val_count = parse(&full, value)?,
            _ => return Err(Error::UnknownKey(full)),
        }
        Ok(())
    }

    pub(crate) fn write(&self, out: &mut String) {
        use std::fmt::Write;
        let _ = writeln!(out, "data.size = {}", self.size);
        let _ = writeln!(out, "data.object_min = {}", self.object_min);
        let _ = writeln!(out, "data.object_max = {}", self.object_max);
        let _ = writeln!(out, "data.max_gap = {}", self.max_gap);
        let _ = writeln!(out, "data.stripe_period = {}", self.stripe_period);
        let _ = writeln!(out, "data.object_prob = {}", self.object_prob);
        let _ = writeln!(out, "data.noise = {}", self.noise);
        let _ = writeln!(out, "data.seed = {}", self.seed);
        let _ = writeln!(out, "data.train_count = {}", self.train_count);
        let _ = writeln!(out, "data.val_count = {}", self.val_count);
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.size % 4 != 0 || self.size < 16 {
            return bad(format!("data.size must be a multiple of 4 and >= 16, got {}", self.size));
        }
        if self.object_min == 0 || self.object_min > self.object_max {
            return bad("data.object_min must be in 1..=data.object_max".into());
        }
        if 2 * (self.object_max + self.max_gap + 2) > self.size {
            return bad(format!(
                "squares up to {} px with gap {} do not fit a {} px scene",
                self.object_max, self.max_gap, self.size
            ));
        }
        if self.stripe_period < 2 {
            return bad("data.stripe_period must be >= 2".into());
        }
        if !(0.0..=1.0).contains(&self.object_prob) {
            return bad("data.object_prob must be in [0, 1]".into());
        }
        if !(self.noise >= 0.0) {
            return bad("data.noise must be nonnegative".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    /// `[3, size, size]`, values roughly in `[0, 1]`.
    pub image: Tensor,
    /// Row-major class indices.
    pub labels: Vec<u8>,
}

/// Axis-aligned box `[top, top+height) x [left, left+width)`.
#[derive(Clone, Copy, Debug)]
struct Rect {
    top: usize,
    left: usize,
    height: usize,
    width: usize,
}

impl Rect {
    fn contains(&self, i: usize, j: usize) -> bool {
        i >= self.top && i < self.top + self.height && j >= self.left && j < self.left + self.width
    }
}

pub fn gen_scene<R: Rng + ?Sized>(spec: &SceneSpec, rng: &mut R) -> Scene {
    let s = spec.size;
    let min_half = spec.object_max + spec.max_gap + 2;
    // Region rectangle, cut across `vertical_cut ? columns : rows`.
    let height = rng.random_range(2 * min_half..=s);
    let width = rng.random_range(2 * min_half..=s);
    let region = Rect {
        top: rng.random_range(0..=s - height),
        left: rng.random_range(0..=s - width),
        height,
        width,
    };
    let vertical_cut = rng.random_bool(0.5);
    let span = if vertical_cut { width } else { height };
    let cut = rng.random_range(min_half..=span - min_half);
    let (first, second) = if vertical_cut {
        (
            Rect { width: cut, ..region },
            Rect { left: region.left + cut, width: width - cut, ..region },
        )
    } else {
        (
            Rect { height: cut, ..region },
            Rect { top: region.top + cut, height: height - cut, ..region },
        )
    };
    let first_horizontal = rng.random_bool(0.5);
    let halves = [(first, first_horizontal), (second, !first_horizontal)];

    let mut want = [rng.random_bool(spec.object_prob), rng.random_bool(spec.object_prob)];
    if !want[0] && !want[1] {
        want[rng.random_range(0..2)] = true;
    }
    let mut squares: Vec<(Rect, bool)> = Vec::new();
    for (idx, &(half, horizontal)) in halves.iter().enumerate() {
        if !want[idx] {
            continue;
        }
        let side = rng.random_range(spec.object_min..=spec.object_max);
        let gap = rng.random_range(0..=spec.max_gap);
        // Distance from the cut, measured inside the half.
        let (top, left) = if vertical_cut {
            let left = if idx == 0 { half.left + half.width - gap - side } else { half.left + gap };
            (rng.random_range(half.top..=half.top + half.height - side), left)
        } else {
            let top = if idx == 0 { half.top + half.height - gap - side } else { half.top + gap };
            (top, rng.random_range(half.left..=half.left + half.width - side))
        };
        squares.push((Rect { top, left, height: side, width: side }, horizontal));
    }
    let phases = [
        rng.random_range(0..spec.stripe_period),
        rng.random_range(0..spec.stripe_period),
    ];

    let plane = s * s;
    let mut image = vec![0.0; 3 * plane];
    let mut labels = vec![BACKGROUND; plane];
    let band = spec.stripe_period / 2;
    for i in 0..s {
        for j in 0..s {
            let mut rgb = BACKGROUND_RGB;
            let mut label = BACKGROUND;
            for (idx, &(half, horizontal)) in halves.iter().enumerate() {
                if half.contains(i, j) {
                    let coord = if horizontal { i } else { j };
                    let colour = ((coord + phases[idx]) / band) % 2;
                    rgb = STRIPE_RGB[colour];
                    label = if horizontal { H_REGION } else { V_REGION };
                }
            }
            for &(sq, horizontal) in &squares {
                if sq.contains(i, j) {
                    rgb = SQUARE_RGB;
                    label = if horizontal { H_SQUARE } else { V_SQUARE };
                }
            }
            labels[i * s + j] = label;
            for c in 0..3 {
                image[c * plane + i * s + j] = rgb[c];
            }
        }
    }
    // clamped so that images survive a PPM round trip up to quantization
    if spec.noise > 0.0 {
        let normal = Normal::new(0.0, spec.noise).expect("validated noise");
        for v in &mut image {
            *v = (*v + normal.sample(rng)).clamp(0.0, 1.0);
        }
    }
    Scene {
        image: Tensor::from_vec(&[3, s, s], image).expect("positive extents"),
        labels,
    }
}

/// Generates `count` scenes, scene `n` seeded from `(seed, n)` so the
/// result does not depend on thread scheduling.
pub fn gen_scenes(spec: &SceneSpec, seed: u64, count: usize) -> Vec<Scene> {
    (0..count)
        .into_par_iter()
        .map(|n| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(n as u64 + 1);
            gen_scene(spec, &mut rng)
        })
        .collect()
}

/// Train and validation splits from `spec.seed`, drawn from disjoint streams.
pub fn gen_splits(spec: &SceneSpec) -> (Vec<Scene>, Vec<Scene>) {
    let train = gen_scenes(spec, spec.seed, spec.train_count);
    let val = gen_scenes(spec, spec.seed ^ 0x5eed_0000_0000_0001, spec.val_count);
    (train, val)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_seed_equal_scene() {
        let spec = SceneSpec::default();
        let a = gen_scenes(&spec, 7, 3);
        let b = gen_scenes(&spec, 7, 3);
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn labels_in_range_and_squares_near_the_cut() {
        let spec = SceneSpec::default();
        for scene in gen_scenes(&spec, 3, 50) {
            assert!(scene.labels.iter().all(|&l| (l as usize) < CLASSES));
            assert!(scene.labels.iter().any(|&l| l == H_SQUARE || l == V_SQUARE));
            assert!(scene.labels.contains(&H_REGION));
            assert!(scene.labels.contains(&V_REGION));
        }
    }

    #[test]
    fn noiseless_square_pixels_are_identical() {
        let spec = SceneSpec { noise: 0.0, ..Default::default() };
        let scene = &gen_scenes(&spec, 11, 1)[0];
        let plane = spec.size * spec.size;
        for (p, &l) in scene.labels.iter().enumerate() {
            if l == H_SQUARE || l == V_SQUARE {
                let px: Vec<f64> = (0..3).map(|c| scene.image.data()[c * plane + p]).collect();
                assert_eq!(px, SQUARE_RGB.to_vec());
            }
        }
    }
}
