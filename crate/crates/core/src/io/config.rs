//! `key = value` run configuration. Blank lines and `#` comments are
//! skipped; unknown keys are an error.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{read_image, IoError};
use crate::image::Image;
use crate::model::{synthetic_images, ModelConfig, TrainConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "f32" => Ok(Self::F32),
            "f64" => Ok(Self::F64),
            other => Err(format!("unknown precision `{other}`")),
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::F32 => "f32",
            Self::F64 => "f64",
        })
    }
}

/// `synthetic:N` or a directory of `.pgm`/`.ppm` files (read in name order).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DatasetSource {
    Synthetic { count: usize },
    Directory(PathBuf),
}

impl FromStr for DatasetSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.strip_prefix("synthetic:") {
            Some(n) => match n.parse() {
                Ok(count) if count > 0 => Ok(Self::Synthetic { count }),
                _ => Err(format!("bad synthetic dataset size `{n}`")),
            },
            None if !s.is_empty() => Ok(Self::Directory(PathBuf::from(s))),
            None => Err("empty dataset".into()),
        }
    }
}

impl fmt::Display for DatasetSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Synthetic { count } => write!(f, "synthetic:{count}"),
            Self::Directory(p) => write!(f, "{}", p.display()),
        }
    }
}

/// Resolves a dataset to images of the given shape. Synthetic data is
/// grayscale and generated from `data_seed`.
pub fn load_dataset(
    source: &DatasetSource,
    width: usize,
    height: usize,
    channels: usize,
    data_seed: u64,
) -> Result<Vec<Image>, IoError> {
    let images = match source {
        DatasetSource::Synthetic { count } => {
            if channels != 1 {
                return Err(IoError::Dataset("synthetic images are grayscale; set image_channels = 1".into()));
            }
            synthetic_images(*count, width, height, data_seed)
        }
        DatasetSource::Directory(dir) => {
            let mut paths: Vec<PathBuf> = fs::read_dir(dir)
                .map_err(|e| IoError::from_std(dir, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("pgm" | "ppm")))
                .collect();
            paths.sort();
            if paths.is_empty() {
                return Err(IoError::Dataset(format!("no .pgm/.ppm files in {}", dir.display())));
            }
            paths.iter().map(|p| read_image(p)).collect::<Result<Vec<_>, _>>()?
        }
    };
    if let Some(bad) = images.iter().find(|i| i.shape() != (width, height, channels)) {
        return Err(IoError::Dataset(format!(
            "image shape {:?} does not match configured {:?}",
            bad.shape(),
            (width, height, channels)
        )));
    }
    Ok(images)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub dataset: DatasetSource,
    pub data_seed: u64,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for RunConfig {
    /// Desk-scale run: C = 16, one path, 512 synthetic 16×16 images.
    fn default() -> Self {
        Self {
            model: ModelConfig::desk(16, 1),
            train: TrainConfig::desk(),
            dataset: DatasetSource::Synthetic { count: 512 },
            data_seed: 2024,
            seed: 0,
            precision: Precision::F32,
        }
    }
}

fn parse_value<V: FromStr>(line: usize, key: &str, value: &str) -> Result<V, IoError>
where
    V::Err: fmt::Display,
{
    value.parse().map_err(|e: V::Err| IoError::Config {
        line,
        message: format!("`{key}`: {e}"),
    })
}

impl RunConfig {
    /// Applies `key = value` lines on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, IoError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| IoError::Config {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            cfg.set(line, key.trim(), value.trim())?;
        }
        cfg.model.validate().map_err(|e| IoError::Config {
            line: 0,
            message: e.to_string(),
        })?;
        cfg.train.validate().map_err(|e| IoError::Config {
            line: 0,
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        Self::parse(&fs::read_to_string(path).map_err(|e| IoError::from_std(path, e))?)
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<(), IoError> {
        let (m, t) = (&mut self.model, &mut self.train);
        match key {
            "channels" => m.channels = parse_value(line, key, value)?,
            "paths" => m.paths = parse_value(line, key, value)?,
            "placement" => m.placement = parse_value(line, key, value)?,
            "image_width" => m.image_width = parse_value(line, key, value)?,
            "image_height" => m.image_height = parse_value(line, key, value)?,
            "image_channels" => m.image_channels = parse_value(line, key, value)?,
            "map_width" => m.map_width = parse_value(line, key, value)?,
            "map_height" => m.map_height = parse_value(line, key, value)?,
            "ordering" => m.order = parse_value(line, key, value)?,
            "constraint" => m.constraint = parse_value(line, key, value)?,
            "epsilon" => m.epsilon = parse_value(line, key, value)?,
            "encoder" => {
                m.encoder_widths = value
                    .split(',')
                    .map(|w| parse_value(line, key, w.trim()))
                    .collect::<Result<_, _>>()?
            }
            "decoder" => m.decoder = parse_value(line, key, value)?,
            "base_lr" => t.base_lr = parse_value(line, key, value)?,
            "weight_decay" => t.weight_decay = parse_value(line, key, value)?,
            "batch_size" => t.batch_size = parse_value(line, key, value)?,
            "warmup_epochs" => t.warmup_epochs = parse_value(line, key, value)?,
            "epochs" => t.total_epochs = parse_value(line, key, value)?,
            "beta1" => t.beta1 = parse_value(line, key, value)?,
            "beta2" => t.beta2 = parse_value(line, key, value)?,
            "adam_epsilon" => t.adam_epsilon = parse_value(line, key, value)?,
            "dataset" => self.dataset = parse_value(line, key, value)?,
            "data_seed" => self.data_seed = parse_value(line, key, value)?,
            "seed" => self.seed = parse_value(line, key, value)?,
            "precision" => self.precision = parse_value(line, key, value)?,
            other => {
                return Err(IoError::Config {
                    line,
                    message: format!("unknown key `{other}`"),
                })
            }
        }
        Ok(())
    }

    /// Every setting as `(key, value)`, in a fixed order; feeding these back
    /// through [`RunConfig::parse`] reproduces the config.
    pub fn entries(&self) -> Vec<(String, String)> {
        let (m, t) = (&self.model, &self.train);
        let widths = m.encoder_widths.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(",");
        [
            ("channels", m.channels.to_string()),
            ("paths", m.paths.to_string()),
            ("placement", m.placement.to_string()),
            ("image_width", m.image_width.to_string()),
            ("image_height", m.image_height.to_string()),
            ("image_channels", m.image_channels.to_string()),
            ("map_width", m.map_width.to_string()),
            ("map_height", m.map_height.to_string()),
            ("ordering", m.order.to_string()),
            ("constraint", m.constraint.to_string()),
            ("epsilon", format!("{:?}", m.epsilon)),
            ("encoder", widths),
            ("decoder", m.decoder.to_spec_string()),
            ("base_lr", format!("{:?}", t.base_lr)),
            ("weight_decay", format!("{:?}", t.weight_decay)),
            ("batch_size", t.batch_size.to_string()),
            ("warmup_epochs", t.warmup_epochs.to_string()),
            ("epochs", t.total_epochs.to_string()),
            ("beta1", format!("{:?}", t.beta1)),
            ("beta2", format!("{:?}", t.beta2)),
            ("adam_epsilon", format!("{:?}", t.adam_epsilon)),
            ("dataset", self.dataset.to_string()),
            ("data_seed", self.data_seed.to_string()),
            ("seed", self.seed.to_string()),
            ("precision", self.precision.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
