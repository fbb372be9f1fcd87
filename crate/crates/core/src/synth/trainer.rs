use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::backbone::ToyBackbone;
use super::dataset::{Dataset, Sample};
use crate::disentangle::{self, LossConfig};
use crate::error::{Error, Result};
use crate::sampler::{self, SamplerConfig, VideoSegments};
use crate::tape::{softmax, Tape};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub loss: LossConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Offset of the uniform frame inside each segment.
    pub uniform_offset: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.01,
            momentum: 0.9,
            weight_decay: 0.0005,
            loss: LossConfig::default(),
            epochs: 30,
            batch_size: 8,
            seed: 0,
            uniform_offset: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        for (name, v) in [
            ("lr", self.lr),
            ("momentum", self.momentum),
            ("weight_decay", self.weight_decay),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// SGD with heavy-ball momentum and coupled L2 weight decay:
/// `v = momentum * v + (g + wd * p); p -= lr * v`.
#[derive(Clone, Debug)]
pub struct Sgd {
    lr: f64,
    momentum: f64,
    weight_decay: f64,
    velocity: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64, weight_decay: f64) -> Self {
        Sgd {
            lr,
            momentum,
            weight_decay,
            velocity: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        if self.velocity.is_empty() {
            self.velocity = params.iter().map(|p| vec![0.0; p.len()]).collect();
        }
        for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.velocity) {
            let data = p
                .data()
                .iter()
                .zip(g.data())
                .zip(v.iter_mut())
                .map(|((&w, &gw), vel)| {
                    *vel = self.momentum * *vel + gw + self.weight_decay * w;
                    w - self.lr * *vel
                })
                .collect();
            *p = Tensor::new(p.dims(), data)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub ce: f64,
    pub lmask: f64,
    pub acc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochMetrics>,
}

/// Uniformly sampled clip `[T, C, H, W]` of a sample's video.
pub fn uniform_clip(sample: &Sample, segments: usize, offset: usize) -> Result<Tensor> {
    let n = sample.video.dims()[0];
    sample
        .video
        .select_axis0(&sampler::uniform_sample(n, segments, offset)?)
}

struct StepOutput {
    ce: f64,
    lmask: f64,
    grads: Vec<Tensor>,
}

fn sample_gradients(backbone: &ToyBackbone, clip: &Tensor, label: usize, loss: &LossConfig) -> Result<StepOutput> {
    let mut tape = Tape::new();
    let params = backbone.register(&mut tape);
    let x = tape.constant(clip.clone());
    let taps = backbone.forward(&mut tape, x, &params)?;
    let ce = tape.cross_entropy(taps.logits, label)?;
    let lmask = disentangle::identity_loss(&mut tape, taps.mid, taps.penultimate, loss)?;
    let total = tape.add(ce, lmask)?;
    let grads = tape.backward(total)?;
    Ok(StepOutput {
        ce: tape.value(ce).item().unwrap_or(f64::NAN),
        lmask: tape.value(lmask).item().unwrap_or(f64::NAN),
        grads: params.iter().map(|&p| grads.wrt(p)).collect(),
    })
}

/// Mini-batch SGD on cross-entropy plus the identity loss. Each epoch's
/// accuracy is measured on the held-out split with uniform clips.
pub fn train(dataset: &Dataset, backbone: &mut ToyBackbone, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if dataset.train.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let segments = dataset.config.segments;
    let clips = dataset
        .train
        .iter()
        .map(|s| uniform_clip(s, segments, cfg.uniform_offset))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Sgd::new(cfg.lr, cfg.momentum, cfg.weight_decay);
    let mut order: Vec<usize> = (0..clips.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let (mut ce_sum, mut lmask_sum) = (0.0, 0.0);
        for (step, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut acc: Option<Vec<Tensor>> = None;
            for &idx in batch {
                let out = sample_gradients(backbone, &clips[idx], dataset.train[idx].label, &cfg.loss)?;
                if !out.ce.is_finite() || !out.lmask.is_finite() {
                    return Err(Error::Divergence {
                        epoch,
                        step,
                        detail: format!("ce={} lmask={} on sample {idx}", out.ce, out.lmask),
                    });
                }
                ce_sum += out.ce;
                lmask_sum += out.lmask;
                acc = Some(match acc {
                    None => out.grads,
                    Some(a) => a.iter().zip(&out.grads).map(|(x, y)| x.add(y)).collect::<Result<_>>()?,
                });
            }
            let grads: Vec<Tensor> = acc
                .expect("chunks are non-empty")
                .iter()
                .map(|g| g.scale(1.0 / batch.len() as f64))
                .collect();
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    step,
                    detail: "non-finite gradient".into(),
                });
            }
            let mut params = backbone.params().to_vec();
            opt.step(&mut params, &grads)?;
            backbone.set_params(params)?;
        }
        let n = clips.len() as f64;
        let acc = if dataset.eval.is_empty() {
            f64::NAN
        } else {
            evaluate(
                backbone,
                &dataset.eval,
                segments,
                &EvalConfig::uniform(cfg.uniform_offset),
            )?
            .top1_uniform
        };
        history.push(EpochMetrics {
            epoch,
            ce: ce_sum / n,
            lmask: lmask_sum / n,
            acc,
        });
    }
    Ok(TrainReport { history })
}

/// Where the per-frame features for mask-guided sampling come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingFeatures {
    Raw,
    Level1,
}

/// What gets summed when ensembling uniform and sampled predictions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnsembleInput {
    Softmax,
    Logits,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalConfig {
    pub uniform_offset: usize,
    pub ensemble: bool,
    pub sampler: SamplerConfig,
    pub features: SamplingFeatures,
    pub ensemble_input: EnsembleInput,
}

impl EvalConfig {
    pub fn uniform(uniform_offset: usize) -> Self {
        EvalConfig {
            uniform_offset,
            ensemble: false,
            sampler: SamplerConfig::default(),
            features: SamplingFeatures::Level1,
            ensemble_input: EnsembleInput::Softmax,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub top1_uniform: f64,
    /// Present when ensembling was requested.
    pub top1_ensemble: Option<f64>,
    /// Mask-sampled frame indices per sample, when ensembling.
    pub sampled: Vec<Vec<usize>>,
}

/// Mask-guided frame indices for one video.
pub fn sampled_frames(backbone: &ToyBackbone, video: &Tensor, segments: usize, cfg: &EvalConfig) -> Result<Vec<usize>> {
    let features = match cfg.features {
        SamplingFeatures::Raw => video.clone(),
        SamplingFeatures::Level1 => backbone.level1_features(video)?,
    };
    let frames = (0..features.dims()[0])
        .map(|i| features.index_axis0(i))
        .collect::<Result<Vec<_>>>()?;
    let seg = VideoSegments::new(frames, segments, cfg.uniform_offset)?;
    let mask = seg.sampling_mask()?;
    sampler::select_frames(&seg, &mask, &cfg.sampler)
}

fn prediction_vector(backbone: &ToyBackbone, clip: &Tensor, input: EnsembleInput) -> Result<Vec<f64>> {
    let logits = backbone.logits(clip)?;
    Ok(match input {
        EnsembleInput::Softmax => softmax(&logits),
        EnsembleInput::Logits => logits,
    })
}

pub fn evaluate(backbone: &ToyBackbone, samples: &[Sample], segments: usize, cfg: &EvalConfig) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::arg("evaluation needs at least one sample"));
    }
    let (mut hits_u, mut hits_e) = (0usize, 0usize);
    let mut sampled = Vec::new();
    for s in samples {
        let clip = uniform_clip(s, segments, cfg.uniform_offset)?;
        let pred_u = prediction_vector(backbone, &clip, cfg.ensemble_input)?;
        let top_u = sampler::argmax(&pred_u).expect("non-empty predictions");
        hits_u += usize::from(top_u == s.label);
        if cfg.ensemble {
            let picks = sampled_frames(backbone, &s.video, segments, cfg)?;
            let clip_s = s.video.select_axis0(&picks)?;
            let pred_s = prediction_vector(backbone, &clip_s, cfg.ensemble_input)?;
            hits_e += usize::from(sampler::ensemble(&pred_u, &pred_s)? == s.label);
            sampled.push(picks);
        }
    }
    let n = samples.len() as f64;
    Ok(EvalReport {
        top1_uniform: hits_u as f64 / n,
        top1_ensemble: cfg.ensemble.then(|| hits_e as f64 / n),
        sampled,
    })
}
