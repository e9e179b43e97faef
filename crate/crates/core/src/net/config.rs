//! Flat `key = value` configuration.
//!
//! Keys are namespaced (`network.*`, `optim.*`, `train.*`, `data.*`),
//! `#` starts a comment and blank lines are ignored. Unknown keys are
//! errors. [`Config::to_text`] writes every key so a saved config fully
//! determines a run.

use std::fmt;
use std::path::{Path, PathBuf};

use crate::data::scene::SceneSpec;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContextKind {
    /// No context layer: a plain FCN.
    None,
    /// Shape-variant context: the layer runs under the inferred mask.
    ShapeVariant,
    /// Shape-fixed context: same layer under a constant all-ones mask.
    ShapeFixed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    pub in_channels: usize,
    pub classes: usize,
    pub widths: [usize; 3],
    pub context: ContextKind,
    pub separable: bool,
    pub context_kernel: usize,
    pub sigma: f64,
    pub ld_enabled: bool,
    /// With LD disabled, clamp lower-level scores at zero before the skip sum.
    pub clamp_skip: bool,
    /// Base penalty threshold `t`; defaults to `1 / classes`.
    pub ld_threshold: Option<f64>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            in_channels: 3,
            classes: 5,
            widths: [16, 32, 64],
            context: ContextKind::ShapeVariant,
            separable: true,
            context_kernel: 7,
            sigma: crate::paired::DEFAULT_SIGMA,
            ld_enabled: true,
            clamp_skip: false,
            ld_threshold: None,
        }
    }
}

impl NetworkConfig {
    /// Small network used by the finite-difference checks.
    pub fn gradcheck_defaults() -> Self {
        NetworkConfig {
            classes: 2,
            widths: [3, 4, 5],
            context_kernel: 3,
            ..Default::default()
        }
    }

    pub fn base_threshold(&self) -> f64 {
        self.ld_threshold.unwrap_or(1.0 / self.classes as f64)
    }

    /// Name used in reports, e.g. `svc_separable` or `none`.
    pub fn variant_name(&self) -> String {
        let form = if self.separable { "separable" } else { "full" };
        match self.context {
            ContextKind::None => "none".into(),
            ContextKind::ShapeVariant => format!("svc_{form}"),
            ContextKind::ShapeFixed => format!("sfc_{form}"),
        }
    }

    /// Sets one key (without the `network.` prefix also accepted).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.strip_prefix("network.").unwrap_or(key);
        match key {
            "in_channels" => self.in_channels = parse(key, value)?,
            "classes" => self.classes = parse(key, value)?,
            "widths" => {
                let parts: Vec<usize> = value
                    .split(',')
                    .map(|p| parse("network.widths", p.trim()))
                    .collect::<Result<_>>()?;
                self.widths = parts.try_into().map_err(|_| {
                    Error::Config(format!("network.widths needs three values, got `{value}`"))
                })?;
            }
            "context" => match value {
                "none" => self.context = ContextKind::None,
                "svc" => self.context = ContextKind::ShapeVariant,
                "sfc" => self.context = ContextKind::ShapeFixed,
                "svc_full" | "svc_separable" | "sfc_full" | "sfc_separable" => {
                    self.context = if value.starts_with("svc") {
                        ContextKind::ShapeVariant
                    } else {
                        ContextKind::ShapeFixed
                    };
                    self.separable = value.ends_with("separable");
                }
                _ => {
                    return Err(Error::Config(format!(
                        "network.context: unknown variant `{value}`"
                    )))
                }
            },
            "context_form" => match value {
                "full" => self.separable = false,
                "separable" => self.separable = true,
                _ => return Err(Error::Config(format!("network.context_form: `{value}`"))),
            },
            "context_kernel" => self.context_kernel = parse(key, value)?,
            "sigma" => self.sigma = parse(key, value)?,
            "ld_enabled" => self.ld_enabled = parse(key, value)?,
            "clamp_skip" => self.clamp_skip = parse(key, value)?,
            "ld_threshold" => {
                self.ld_threshold = match value {
                    "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            _ => return Err(Error::UnknownKey(format!("network.{key}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.context_kernel % 2 == 0 || self.context_kernel == 0 {
            return Err(Error::Config(format!(
                "network.context_kernel must be odd and >= 1, got {}",
                self.context_kernel
            )));
        }
        if self.classes < 2 {
            return Err(Error::Config("network.classes must be >= 2".into()));
        }
        if self.in_channels == 0 || self.widths.contains(&0) {
            return Err(Error::Config("channel counts must be positive".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::Config("network.sigma must be positive".into()));
        }
        if let Some(t) = self.ld_threshold {
            if !(t > 0.0) {
                return Err(Error::Config("network.ld_threshold must be positive".into()));
            }
        }
        Ok(())
    }

    /// `network.*` lines in config-file syntax.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write(&mut out);
        out
    }

    fn write(&self, out: &mut String) {
        use fmt::Write;
        let w = self.widths;
        let _ = writeln!(out, "network.in_channels = {}", self.in_channels);
        let _ = writeln!(out, "network.classes = {}", self.classes);
        let _ = writeln!(out, "network.widths = {},{},{}", w[0], w[1], w[2]);
        let _ = writeln!(out, "network.context = {}", self.variant_name());
        let _ = writeln!(out, "network.context_kernel = {}", self.context_kernel);
        let _ = writeln!(out, "network.sigma = {}", self.sigma);
        let _ = writeln!(out, "network.ld_enabled = {}", self.ld_enabled);
        let _ = writeln!(out, "network.clamp_skip = {}", self.clamp_skip);
        let t = self.ld_threshold.map_or("auto".to_string(), |t| t.to_string());
        let _ = writeln!(out, "network.ld_threshold = {t}");
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimConfig {
    pub base_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub power: f64,
    pub max_iter: usize,
    pub batch_size: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            base_lr: 5e-3,
            momentum: 0.9,
            weight_decay: 5e-4,
            power: 0.9,
            max_iter: 3000,
            batch_size: 4,
        }
    }
}

impl OptimConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "base_lr" => self.base_lr = parse(key, value)?,
            "momentum" => self.momentum = parse(key, value)?,
            "weight_decay" => self.weight_decay = parse(key, value)?,
            "power" => self.power = parse(key, value)?,
            "max_iter" => self.max_iter = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            _ => return Err(Error::UnknownKey(format!("optim.{key}"))),
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Validation interval in iterations; the final iteration is always evaluated.
    pub eval_every: usize,
    /// Random horizontal flips during training.
    pub flip: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eval_every: 500,
            flip: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub scene: SceneSpec,
    /// When set, training data is read from this manifest instead of generated.
    pub train_manifest: Option<PathBuf>,
    pub val_manifest: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            scene: SceneSpec::default(),
            train_manifest: None,
            val_manifest: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    pub network: NetworkConfig,
    pub optim: OptimConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Config::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got `{raw}`", lineno + 1))
            })?;
            config.set(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (section, rest) = key
            .split_once('.')
            .ok_or_else(|| Error::UnknownKey(key.to_string()))?;
        match section {
            "network" => self.network.set(rest, value),
            "optim" => self.optim.set(rest, value),
            "train" => match rest {
                "eval_every" => {
                    self.train.eval_every = parse(key, value)?;
                    Ok(())
                }
                "flip" => {
                    self.train.flip = parse(key, value)?;
                    Ok(())
                }
                _ => Err(Error::UnknownKey(key.to_string())),
            },
            "data" => match rest {
                "train_manifest" => {
                    self.data.train_manifest = Some(PathBuf::from(value));
                    Ok(())
                }
                "val_manifest" => {
                    self.data.val_manifest = Some(PathBuf::from(value));
                    Ok(())
                }
                _ => self.data.scene.set(rest, value),
            },
            _ => Err(Error::UnknownKey(key.to_string())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if self.optim.max_iter == 0 {
            return Err(Error::Config("optim.max_iter must be positive".into()));
        }
        if self.optim.batch_size == 0 {
            return Err(Error::Config("optim.batch_size must be positive".into()));
        }
        if self.train.eval_every == 0 {
            return Err(Error::Config("train.eval_every must be positive".into()));
        }
        self.data.scene.validate()
    }

    pub fn to_text(&self) -> String {
        use fmt::Write;
        let mut out = String::new();
        self.network.write(&mut out);
        let o = &self.optim;
        let _ = writeln!(out, "optim.base_lr = {}", o.base_lr);
        let _ = writeln!(out, "optim.momentum = {}", o.momentum);
        let _ = writeln!(out, "optim.weight_decay = {}", o.weight_decay);
        let _ = writeln!(out, "optim.power = {}", o.power);
        let _ = writeln!(out, "optim.max_iter = {}", o.max_iter);
        let _ = writeln!(out, "optim.batch_size = {}", o.batch_size);
        let _ = writeln!(out, "train.eval_every = {}", self.train.eval_every);
        let _ = writeln!(out, "train.flip = {}", self.train.flip);
        self.data.scene.write(&mut out);
        if let Some(p) = &self.data.train_manifest {
            let _ = writeln!(out, "data.train_manifest = {}", p.display());
        }
        if let Some(p) = &self.data.val_manifest {
            let _ = writeln!(out, "data.val_manifest = {}", p.display());
        }
        out
    }
}

pub(crate) fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{value}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_training_recipe() {
        let c = Config::default();
        assert_eq!(c.optim.base_lr, 5e-3);
        assert_eq!(c.optim.momentum, 0.9);
        assert_eq!(c.optim.weight_decay, 5e-4);
        assert_eq!(c.optim.power, 0.9);
        assert_eq!(c.network.sigma, 3.0);
        assert_eq!(c.network.widths, [16, 32, 64]);
        assert!((c.network.base_threshold() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn parse_with_comments_and_round_trip() {
        let text = "# toy run\nnetwork.context = sfc_full\noptim.max_iter = 10 # short\n\nnetwork.widths = 4, 6, 8\n";
        let c = Config::parse(text).unwrap();
        assert_eq!(c.network.context, ContextKind::ShapeFixed);
        assert!(!c.network.separable);
        assert_eq!(c.optim.max_iter, 10);
        assert_eq!(c.network.widths, [4, 6, 8]);
        assert_eq!(Config::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = Config::parse("optim.learning_rate = 1").unwrap_err();
        assert!(err.to_string().contains("optim.learning_rate"), "{err}");
        assert!(Config::parse("network.context_kernel = 4").is_err());
        assert!(Config::parse("just words").is_err());
    }
}
