//! Synthetic scenes, image files, manifests and segmentation metrics.

pub mod maskviz;
pub mod metrics;
pub mod pnm;
pub mod scene;

use std::path::{Path, PathBuf};

use crate::error::{check_dim, Error, Result};
use crate::tensor::Tensor;

pub use maskviz::{export_mask_image, mask_overlay_image, mask_window_image};
pub use metrics::{confusion, ConfusionMatrix, Metrics};
pub use pnm::GrayImage;
pub use scene::{gen_scene, gen_scenes, gen_splits, Scene, SceneSpec};

/// Images `[3,H,W]` with row-major label maps of the same size.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub images: Vec<Tensor>,
    pub labels: Vec<Vec<u8>>,
}

impl Dataset {
    pub fn from_scenes(scenes: Vec<Scene>) -> Self {
        let (images, labels) = scenes.into_iter().map(|s| (s.image, s.labels)).unzip();
        Dataset { images, labels }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Per-channel mean over every pixel of every image.
    pub fn channel_mean(&self) -> Result<Tensor> {
        let first = self
            .images
            .first()
            .ok_or_else(|| Error::invalid("channel_mean", "empty dataset"))?;
        let (c, h, w) = first.chw()?;
        let plane = h * w;
        let mut mean = vec![0.0; c];
        for img in &self.images {
            first.expect_same_shape("channel_mean", img)?;
            for (ci, m) in mean.iter_mut().enumerate() {
                *m += img.data()[ci * plane..(ci + 1) * plane].iter().sum::<f64>();
            }
        }
        let n = (self.images.len() * plane) as f64;
        Tensor::from_vec(&[c], mean.into_iter().map(|m| m / n).collect())
    }

    /// Reads `<image.ppm> <labels.pgm>` lines; relative paths resolve
    /// against the manifest's directory.
    pub fn load_manifest(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut out = Dataset::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [image, labels] = parts[..] else {
                return Err(Error::invalid(
                    "manifest",
                    format!("{}:{}: expected `<image.ppm> <labels.pgm>`", path.display(), lineno + 1),
                ));
            };
            let image = pnm::read_ppm(base.join(image))?;
            let gray = pnm::read_pgm(base.join(labels))?;
            let (_, h, w) = image.chw()?;
            check_dim("manifest", "label height", gray.height, h)?;
            check_dim("manifest", "label width", gray.width, w)?;
            out.images.push(image);
            out.labels.push(gray.pixels);
        }
        if out.is_empty() {
            return Err(Error::invalid("manifest", format!("{} lists no samples", path.display())));
        }
        Ok(out)
    }

    /// Writes `<prefix>_NNNN.ppm` / `<prefix>_NNNN.pgm` into `dir` and a
    /// manifest `<prefix>.txt` listing them; returns the manifest path.
    pub fn save(&self, dir: impl AsRef<Path>, prefix: &str) -> Result<PathBuf> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = String::new();
        for (n, (image, labels)) in self.images.iter().zip(&self.labels).enumerate() {
            let (_, h, w) = image.chw()?;
            let img_name = format!("{prefix}_{n:04}.ppm");
            let lbl_name = format!("{prefix}_{n:04}.pgm");
            pnm::write_ppm(image, dir.join(&img_name))?;
            let gray = GrayImage {
                width: w,
                height: h,
                pixels: labels.clone(),
            };
            pnm::write_pgm(&gray, dir.join(&lbl_name))?;
            manifest.push_str(&format!("{img_name} {lbl_name}\n"));
        }
        let path = dir.join(format!("{prefix}.txt"));
        std::fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
