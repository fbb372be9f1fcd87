//! Command implementations. Each returns the text meant for standard
//! output; files are written as a side effect.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fdmask::gradcheck::{self, GradcheckConfig};
use fdmask::masks::{self, MaskKind};
use fdmask::sampler::{self, VideoSegments};
use fdmask::synth::{
    self, BackboneConfig, Dataset, DatasetConfig, EnsembleInput, EvalConfig, Sample, SamplingFeatures, ToyBackbone,
    NUM_CLASSES,
};
use fdmask::Tensor;

use crate::config::{format_dataset_spec, parse_dataset_spec, CheckpointMeta, RunConfig};
use crate::container::{self, Container};
use crate::error::{CliError, CliResult};
use crate::text::{self, ManifestEntry};

pub const MANIFEST: &str = "manifest.txt";
pub const DATASET_SPEC: &str = "dataset.cfg";
pub const CHECKPOINT: &str = "checkpoint.fvt";
pub const CHECKPOINT_META: &str = "checkpoint.meta";
pub const METRICS: &str = "metrics.txt";

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::write(path, e))
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::write(path, e))
}

pub fn read_run_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => RunConfig::parse(&read_text(p)?).map_err(|e| CliError::Mismatch(format!("{}: {e}", p.display()))),
    }
}

pub fn read_dataset_spec(path: Option<&Path>) -> CliResult<DatasetConfig> {
    match path {
        None => Ok(DatasetConfig::default()),
        Some(p) => parse_dataset_spec(&read_text(p)?).map_err(|e| CliError::Mismatch(format!("{}: {e}", p.display()))),
    }
}

/// Writes `train/NNNN.fvt`, `eval/NNNN.fvt`, a manifest and the spec used.
pub fn gen(spec: &DatasetConfig, out: &Path) -> CliResult<String> {
    let ds = synth::motion_classes(spec)?;
    let mut entries = Vec::with_capacity(ds.train.len() + ds.eval.len());
    for (split, samples) in [("train", &ds.train), ("eval", &ds.eval)] {
        create_dir(&out.join(split))?;
        for (i, s) in samples.iter().enumerate() {
            let rel = format!("{split}/{i:04}.fvt");
            container::write(&out.join(&rel), &Container::f64(s.video.clone()))?;
            entries.push(ManifestEntry {
                path: rel,
                label: s.label,
            });
        }
    }
    write_text(&out.join(MANIFEST), &text::format_manifest(&entries))?;
    write_text(&out.join(DATASET_SPEC), &format_dataset_spec(spec))?;
    Ok(format!("train={} eval={}\n", ds.train.len(), ds.eval.len()))
}

/// Reads a directory written by [`gen`].
pub fn load_dataset(dir: &Path) -> CliResult<Dataset> {
    let spec_path = dir.join(DATASET_SPEC);
    let config = parse_dataset_spec(&read_text(&spec_path)?)
        .map_err(|e| CliError::Format(format!("{}: {e}", spec_path.display())))?;
    let manifest_path = dir.join(MANIFEST);
    let entries = text::parse_manifest(&read_text(&manifest_path)?)
        .map_err(|e| CliError::Format(format!("{}: {e}", manifest_path.display())))?;
    let want = [config.frames(), 1, config.height, config.width];
    let (mut train, mut eval) = (Vec::new(), Vec::new());
    for e in entries {
        let split = match e.path.split('/').next() {
            Some("train") => &mut train,
            Some("eval") => &mut eval,
            _ => {
                return Err(CliError::Format(format!(
                    "{}: {} is in neither train/ nor eval/",
                    manifest_path.display(),
                    e.path
                )))
            }
        };
        if e.label >= NUM_CLASSES {
            return Err(CliError::Format(format!("{}: label {} out of range", e.path, e.label)));
        }
        let video = container::read(&dir.join(&e.path))?.tensor;
        if video.dims() != want {
            return Err(CliError::Format(format!(
                "{}: expected dims {want:?}, got {:?}",
                e.path,
                video.dims()
            )));
        }
        split.push(Sample { video, label: e.label });
    }
    Ok(Dataset { config, train, eval })
}

fn check_layout(cfg: &RunConfig, ds: &DatasetConfig) -> CliResult<()> {
    if cfg.segments != ds.segments || cfg.frames_per_segment != ds.frames_per_segment {
        return Err(CliError::Mismatch(format!(
            "config expects T={} frames_per_segment={}, dataset has T={} frames_per_segment={}",
            cfg.segments, cfg.frames_per_segment, ds.segments, ds.frames_per_segment
        )));
    }
    Ok(())
}

pub fn mask(input: &Path, out: &Path, kind: MaskKind, normalize: bool) -> CliResult<String> {
    let x = container::read(input)?.tensor;
    if x.rank() != 4 {
        return Err(CliError::Format(format!(
            "{}: mask input must be rank 4 [T, C, H, W], got shape {:?}",
            input.display(),
            x.dims()
        )));
    }
    let m = masks::mask_of_kind(&x, kind, normalize)?;
    let summary = format!("mean={} max={}\n", m.mean(), m.values().max());
    container::write(out, &Container::f64(m.into_values()))?;
    Ok(summary)
}

pub fn frame_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("frame_{index:04}.fvt"))
}

/// Mask-guided frame selection over `frame_NNNN.fvt` files in `dir`.
pub fn sample(dir: &Path, cfg: &RunConfig, out: &Path) -> CliResult<String> {
    let n = cfg.segments * cfg.frames_per_segment;
    let mut frames: Vec<Tensor> = Vec::with_capacity(n);
    for i in 0..n {
        let path = frame_path(dir, i);
        let frame = container::read(&path)?.tensor;
        if frame.rank() != 3 {
            return Err(CliError::Format(format!(
                "{}: frames must be [C, H, W], got {:?}",
                path.display(),
                frame.dims()
            )));
        }
        if let Some(first) = frames.first() {
            if first.dims() != frame.dims() {
                return Err(CliError::Format(format!(
                    "{}: shape {:?} differs from frame 0 {:?}",
                    path.display(),
                    frame.dims(),
                    first.dims()
                )));
            }
        }
        frames.push(frame);
    }
    let seg = VideoSegments::new(frames, cfg.segments, 0)?;
    let m = seg.sampling_mask()?;
    let picks = sampler::select_frames(&seg, &m, &cfg.sampler())?;
    let listing = text::format_index_list(&picks);
    write_text(out, &listing)?;
    Ok(listing)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckArgs {
    pub seed: u64,
    pub frames: usize,
    pub mid_channels: usize,
    pub pen_channels: usize,
    pub mid_size: usize,
    pub pen_size: usize,
    pub lambda_mask: f64,
    pub inject_fault: bool,
}

impl Default for GradcheckArgs {
    fn default() -> Self {
        let d = GradcheckConfig::default();
        GradcheckArgs {
            seed: d.seed,
            frames: d.frames,
            mid_channels: d.mid_channels,
            pen_channels: d.pen_channels,
            mid_size: d.mid_size,
            pen_size: d.pen_size,
            lambda_mask: d.loss.lambda_mask,
            inject_fault: false,
        }
    }
}

pub fn gradcheck(args: &GradcheckArgs) -> CliResult<String> {
    let mut cfg = GradcheckConfig {
        seed: args.seed,
        frames: args.frames,
        mid_channels: args.mid_channels,
        pen_channels: args.pen_channels,
        mid_size: args.mid_size,
        pen_size: args.pen_size,
        inject_fault: args.inject_fault,
        ..GradcheckConfig::default()
    };
    cfg.loss.lambda_mask = args.lambda_mask;
    cfg.loss.validate()?;
    let r = gradcheck::run(&cfg)?;
    let report = format!(
        "x_p={:e} x_mid={:e} weights={:e} max={:e}\n",
        r.x_p,
        r.x_mid,
        r.weights,
        r.max()
    );
    if r.passes(gradcheck::TOLERANCE) {
        Ok(report)
    } else {
        Err(CliError::Gradcheck(format!(
            "gradient check failed (tolerance {:e}): {}",
            gradcheck::TOLERANCE,
            report.trim_end()
        )))
    }
}

/// Trains the default backbone and writes checkpoint, metadata and metrics
/// into `out`.
pub fn train(cfg: &RunConfig, data: &Path, out: &Path) -> CliResult<String> {
    let ds = load_dataset(data)?;
    check_layout(cfg, &ds.config)?;
    let mut backbone = ToyBackbone::new(BackboneConfig::default(), cfg.seed)?;
    let report = synth::train(&ds, &mut backbone, &cfg.train())?;
    create_dir(out)?;
    let flat = Tensor::new(&[backbone.param_count()], backbone.flat_params())?;
    container::write(&out.join(CHECKPOINT), &Container::f64(flat))?;
    let meta = CheckpointMeta {
        backbone: backbone.config().clone(),
        segments: ds.config.segments,
        height: ds.config.height,
        width: ds.config.width,
        param_count: backbone.param_count(),
    };
    write_text(&out.join(CHECKPOINT_META), &meta.to_text())?;
    let mut metrics = String::new();
    for m in &report.history {
        let _ = writeln!(metrics, "{}", text::format_metrics(m));
    }
    write_text(&out.join(METRICS), &metrics)?;
    Ok(metrics)
}

pub fn load_checkpoint(dir: &Path) -> CliResult<(ToyBackbone, CheckpointMeta)> {
    let meta_path = dir.join(CHECKPOINT_META);
    let meta = CheckpointMeta::parse(&read_text(&meta_path)?)
        .map_err(|e| CliError::Mismatch(format!("{}: {e}", meta_path.display())))?;
    let params = container::read(&dir.join(CHECKPOINT))?.tensor;
    let mut backbone = ToyBackbone::new(meta.backbone.clone(), 0)?;
    if params.rank() != 1 || params.len() != meta.param_count || params.len() != backbone.param_count() {
        return Err(CliError::Mismatch(format!(
            "checkpoint holds {:?} values, metadata says {} and the backbone needs {}",
            params.dims(),
            meta.param_count,
            backbone.param_count()
        )));
    }
    backbone.set_flat_params(params.data())?;
    Ok((backbone, meta))
}

/// Top-1 on the eval split with uniform clips, plus the ensemble with
/// mask-sampled clips when `ensemble` is set.
pub fn eval(cfg: &RunConfig, data: &Path, checkpoint: &Path, ensemble: bool) -> CliResult<String> {
    let ds = load_dataset(data)?;
    check_layout(cfg, &ds.config)?;
    let (backbone, meta) = load_checkpoint(checkpoint)?;
    let c = &ds.config;
    if (meta.segments, meta.height, meta.width) != (c.segments, c.height, c.width)
        || meta.backbone.num_classes != NUM_CLASSES
        || meta.backbone.in_channels != 1
    {
        return Err(CliError::Mismatch(format!(
            "checkpoint was trained on T={} {}x{} with {} classes, dataset is T={} {}x{}",
            meta.segments, meta.height, meta.width, meta.backbone.num_classes, c.segments, c.height, c.width
        )));
    }
    if ds.eval.is_empty() {
        return Err(CliError::Missing("dataset has no eval samples".into()));
    }
    let eval_cfg = EvalConfig {
        uniform_offset: 0,
        ensemble,
        sampler: cfg.sampler(),
        features: SamplingFeatures::Level1,
        ensemble_input: EnsembleInput::Softmax,
    };
    let r = synth::evaluate(&backbone, &ds.eval, c.segments, &eval_cfg)?;
    let mut out = format!("top1={}\n", r.top1_uniform);
    if let Some(e) = r.top1_ensemble {
        let _ = writeln!(out, "top1_ensemble={e}");
    }
    Ok(out)
}
