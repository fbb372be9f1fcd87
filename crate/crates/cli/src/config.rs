//! Typed `key = value` files: run configuration, dataset generation spec
//! and checkpoint metadata. Every key is optional and unknown keys are
//! rejected.

use std::fmt::Write as _;

use fdmask::disentangle::LossConfig;
use fdmask::sampler::{SamplerConfig, SelectMode, WeightRule};
use fdmask::synth::{Activation, BackboneConfig, DatasetConfig, TrainConfig};

use crate::text::{key_values, parse_bool, parse_positive, parse_rate, parse_value, Assignment, ParseError};

fn unknown(a: &Assignment<'_>) -> ParseError {
    ParseError::new(a.line, format!("unknown key {:?}", a.key))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub lambda_mask: f64,
    pub normalize_mask: bool,
    pub sampler_mode: SelectMode,
    pub strict_paper_weights: bool,
    pub seed: u64,
    /// Segments per video (`T`).
    pub segments: usize,
    pub frames_per_segment: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let data = DatasetConfig::default();
        RunConfig {
            lambda_mask: train.loss.lambda_mask,
            normalize_mask: train.loss.normalize_mask,
            sampler_mode: SelectMode::Argmax,
            strict_paper_weights: false,
            seed: train.seed,
            segments: data.segments,
            frames_per_segment: data.frames_per_segment,
            lr: train.lr,
            momentum: train.momentum,
            weight_decay: train.weight_decay,
            epochs: train.epochs,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut cfg = RunConfig::default();
        for a in key_values(text)? {
            match a.key {
                "lambda_mask" => cfg.lambda_mask = parse_rate(&a)?,
                "normalize_mask" => cfg.normalize_mask = parse_bool(&a)?,
                "sampler_mode" => {
                    cfg.sampler_mode = match a.value {
                        "argmax" => SelectMode::Argmax,
                        "argmin" => SelectMode::Argmin,
                        other => {
                            return Err(ParseError::new(
                                a.line,
                                format!("sampler_mode must be argmax or argmin, got {other:?}"),
                            ))
                        }
                    }
                }
                "strict_paper_weights" => cfg.strict_paper_weights = parse_bool(&a)?,
                "seed" => cfg.seed = parse_value(&a)?,
                "T" => cfg.segments = parse_positive(&a)?,
                "frames_per_segment" => cfg.frames_per_segment = parse_positive(&a)?,
                "lr" => cfg.lr = parse_rate(&a)?,
                "momentum" => cfg.momentum = parse_rate(&a)?,
                "weight_decay" => cfg.weight_decay = parse_rate(&a)?,
                "epochs" => cfg.epochs = parse_value(&a)?,
                _ => return Err(unknown(&a)),
            }
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mode = match self.sampler_mode {
            SelectMode::Argmax => "argmax",
            SelectMode::Argmin => "argmin",
        };
        let mut s = String::new();
        let _ = writeln!(s, "lambda_mask = {}", self.lambda_mask);
        let _ = writeln!(s, "normalize_mask = {}", self.normalize_mask);
        let _ = writeln!(s, "sampler_mode = {mode}");
        let _ = writeln!(s, "strict_paper_weights = {}", self.strict_paper_weights);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "T = {}", self.segments);
        let _ = writeln!(s, "frames_per_segment = {}", self.frames_per_segment);
        let _ = writeln!(s, "lr = {}", self.lr);
        let _ = writeln!(s, "momentum = {}", self.momentum);
        let _ = writeln!(s, "weight_decay = {}", self.weight_decay);
        let _ = writeln!(s, "epochs = {}", self.epochs);
        s
    }

    pub fn loss(&self) -> LossConfig {
        LossConfig {
            lambda_mask: self.lambda_mask,
            normalize_mask: self.normalize_mask,
            ..LossConfig::default()
        }
    }

    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            mode: self.sampler_mode,
            weights: if self.strict_paper_weights {
                WeightRule::StrictPaper
            } else {
                WeightRule::Balanced
            },
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            loss: self.loss(),
            epochs: self.epochs,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }
}

/// Parameters of `fdmask gen`.
pub fn parse_dataset_spec(text: &str) -> Result<DatasetConfig, ParseError> {
    let mut cfg = DatasetConfig::default();
    for a in key_values(text)? {
        match a.key {
            "num_train" => cfg.num_train = parse_value(&a)?,
            "num_eval" => cfg.num_eval = parse_value(&a)?,
            "T" => cfg.segments = parse_positive(&a)?,
            "frames_per_segment" => cfg.frames_per_segment = parse_positive(&a)?,
            "height" => cfg.height = parse_positive(&a)?,
            "width" => cfg.width = parse_positive(&a)?,
            "noise_sigma" => cfg.noise_sigma = parse_rate(&a)?,
            "seed" => cfg.seed = parse_value(&a)?,
            _ => return Err(unknown(&a)),
        }
    }
    Ok(cfg)
}

pub fn format_dataset_spec(cfg: &DatasetConfig) -> String {
    format!(
        "num_train = {}\nnum_eval = {}\nT = {}\nframes_per_segment = {}\nheight = {}\nwidth = {}\nnoise_sigma = {}\nseed = {}\n",
        cfg.num_train,
        cfg.num_eval,
        cfg.segments,
        cfg.frames_per_segment,
        cfg.height,
        cfg.width,
        cfg.noise_sigma,
        cfg.seed
    )
}

/// Everything needed to rebuild a backbone from a flat parameter vector
/// and to check it against a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointMeta {
    pub backbone: BackboneConfig,
    pub segments: usize,
    pub height: usize,
    pub width: usize,
    pub param_count: usize,
}

fn parse_triple(a: &Assignment<'_>) -> Result<[usize; 3], ParseError> {
    let parts: Vec<&str> = a.value.split(',').map(str::trim).collect();
    let bad = || ParseError::new(a.line, format!("{} must be three positive integers", a.key));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut out = [0; 3];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = p.parse().ok().filter(|&v| v > 0).ok_or_else(bad)?;
    }
    Ok(out)
}

impl CheckpointMeta {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut backbone = BackboneConfig::default();
        let (mut segments, mut height, mut width, mut params) = (None, None, None, None);
        for a in key_values(text)? {
            match a.key {
                "in_channels" => backbone.in_channels = parse_positive(&a)?,
                "widths" => backbone.widths = parse_triple(&a)?,
                "num_classes" => backbone.num_classes = parse_positive(&a)?,
                "spatial_strides" => backbone.spatial_strides = parse_triple(&a)?,
                "activation" => {
                    backbone.activation = match a.value {
                        "tanh" => Activation::Tanh,
                        "relu" => Activation::Relu,
                        other => return Err(ParseError::new(a.line, format!("unknown activation {other:?}"))),
                    }
                }
                "T" => segments = Some(parse_positive(&a)?),
                "height" => height = Some(parse_positive(&a)?),
                "width" => width = Some(parse_positive(&a)?),
                "param_count" => params = Some(parse_positive(&a)?),
                _ => return Err(unknown(&a)),
            }
        }
        let missing = |k: &str| ParseError::new(0, format!("checkpoint metadata lacks {k}"));
        Ok(CheckpointMeta {
            backbone,
            segments: segments.ok_or_else(|| missing("T"))?,
            height: height.ok_or_else(|| missing("height"))?,
            width: width.ok_or_else(|| missing("width"))?,
            param_count: params.ok_or_else(|| missing("param_count"))?,
        })
    }

    pub fn to_text(&self) -> String {
        let b = &self.backbone;
        let triple = |v: [usize; 3]| format!("{},{},{}", v[0], v[1], v[2]);
        let activation = match b.activation {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        };
        format!(
            "in_channels = {}\nwidths = {}\nnum_classes = {}\nspatial_strides = {}\nactivation = {activation}\nT = {}\nheight = {}\nwidth = {}\nparam_count = {}\n",
            b.in_channels,
            triple(b.widths),
            b.num_classes,
            triple(b.spatial_strides),
            self.segments,
            self.height,
            self.width,
            self.param_count
        )
    }
}
