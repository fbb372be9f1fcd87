//! Uniform and mask-guided frame sampling, and prediction ensembling.
//!
//! A video of `n` frames is cut into `T` segments of `s = n / T` frames
//! (the remainder at the tail is dropped). Uniform sampling takes a fixed
//! offset `k*` from every segment. Mask-guided sampling scores every
//! candidate frame `j` of segment `i` against the uniform frames of the
//! other segments:
//!
//! ```text
//! C_p = sum_{k<i} (T - i + k)/T * msd(M⊙x_{i,j}, M⊙x_{U-k})
//! C_f = sum_{k>i} (T + i - k)/T * msd(M⊙x_{i,j}, M⊙x_{U-k})
//! net = w_p C_p + w_f C_f,  w_p = C_p/(C_p+C_f) i,  w_f = C_f/(C_p+C_f) (T-i)
//! ```
//!
//! where `msd` is the mean squared elementwise difference. Segment and frame
//! indices in this module's cost API are 1-based to match those sums.

use crate::error::{Error, Result};
use crate::masks::{self, SaliencyMap};
use crate::tensor::{self, Tensor};

/// `i * s + k*` for each of `segments` segments, `s = floor(num_frames / segments)`.
pub fn uniform_sample(num_frames: usize, segments: usize, offset: usize) -> Result<Vec<usize>> {
    if segments == 0 {
        return Err(Error::arg("need at least one segment"));
    }
    if segments > num_frames {
        return Err(Error::arg(format!(
            "cannot take {segments} segments from {num_frames} frames"
        )));
    }
    let s = num_frames / segments;
    if offset >= s {
        return Err(Error::arg(format!(
            "uniform offset {offset} must be below the segment length {s}"
        )));
    }
    Ok((0..segments).map(|i| i * s + offset).collect())
}

/// Per-frame features of one video, grouped into equal segments.
#[derive(Clone, Debug)]
pub struct VideoSegments {
    frames: Vec<Tensor>,
    segments: usize,
    per_segment: usize,
    uniform_offset: usize,
}

impl VideoSegments {
    /// Groups `frames` (each `[C, H, W]` or any fixed shape) into `segments`
    /// segments; tail frames beyond `segments * floor(n / segments)` are dropped.
    pub fn new(mut frames: Vec<Tensor>, segments: usize, uniform_offset: usize) -> Result<Self> {
        let uniform = uniform_sample(frames.len(), segments, uniform_offset)?;
        debug_assert_eq!(uniform.len(), segments);
        let per_segment = frames.len() / segments;
        frames.truncate(segments * per_segment);
        if let Some(bad) = frames.iter().find(|f| f.dims() != frames[0].dims()) {
            return Err(Error::shape("VideoSegments", frames[0].dims(), bad.dims()));
        }
        Ok(VideoSegments {
            frames,
            segments,
            per_segment,
            uniform_offset,
        })
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn frames_per_segment(&self) -> usize {
        self.per_segment
    }

    pub fn uniform_offset(&self) -> usize {
        self.uniform_offset
    }

    pub fn frames(&self) -> &[Tensor] {
        &self.frames
    }

    /// Global index of frame `j` of segment `i` (both 1-based).
    pub fn frame_index(&self, i: usize, j: usize) -> Result<usize> {
        if !(1..=self.segments).contains(&i) || !(1..=self.per_segment).contains(&j) {
            return Err(Error::arg(format!(
                "segment/frame ({i}, {j}) outside 1..={} x 1..={}",
                self.segments, self.per_segment
            )));
        }
        Ok((i - 1) * self.per_segment + (j - 1))
    }

    pub fn uniform_indices(&self) -> Vec<usize> {
        (0..self.segments)
            .map(|i| i * self.per_segment + self.uniform_offset)
            .collect()
    }

    /// The uniform frames stacked into a `[T, ...]` volume.
    pub fn uniform_volume(&self) -> Result<Tensor> {
        let picked: Vec<Tensor> = self
            .uniform_indices()
            .into_iter()
            .map(|i| self.frames[i].clone())
            .collect();
        tensor::stack(&picked)
    }

    /// Normalized combined mask of the uniform volume, used to weight every
    /// candidate frame of this video.
    pub fn sampling_mask(&self) -> Result<SaliencyMap> {
        masks::combined_mask(&self.uniform_volume()?, true)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentCosts {
    pub prior: f64,
    pub future: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetCost {
    pub prior_weight: f64,
    pub future_weight: f64,
    pub net: f64,
}

/// How the future-cost weight is formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WeightRule {
    /// `w_f = C_f / (C_p + C_f) * (T - i)`.
    #[default]
    Balanced,
    /// `w_f = C_p / (C_p + C_f) * (T - i)`, the formula as printed.
    StrictPaper,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SelectMode {
    #[default]
    Argmax,
    Argmin,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SamplerConfig {
    pub mode: SelectMode,
    pub weights: WeightRule,
}

fn mean_squared_difference(a: &Tensor, b: &Tensor) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64
}

fn masked(m: &SaliencyMap, frame: &Tensor) -> Result<Tensor> {
    let md = m.values().dims();
    let fd = frame.dims();
    if md.len() > fd.len() || fd[fd.len() - md.len()..] != *md {
        return Err(Error::shape("sampling mask", md, fd));
    }
    frame.mul(m.values())
}

/// Prior/future costs from precomputed masked frames.
fn costs_from_masked(masked_frames: &[Tensor], uniform: &[usize], candidate: usize, i: usize) -> SegmentCosts {
    let t = uniform.len();
    let tf = t as f64;
    let cand = &masked_frames[candidate];
    let mut prior = 0.0;
    for k in 1..i {
        let w = (tf - i as f64 + k as f64) / tf;
        prior += w * mean_squared_difference(cand, &masked_frames[uniform[k - 1]]);
    }
    let mut future = 0.0;
    for k in i + 1..=t {
        let w = (tf + i as f64 - k as f64) / tf;
        future += w * mean_squared_difference(cand, &masked_frames[uniform[k - 1]]);
    }
    SegmentCosts { prior, future }
}

/// Costs of frame `j` in segment `i` (1-based) under mask `m`.
pub fn segment_costs(seg: &VideoSegments, m: &SaliencyMap, i: usize, j: usize) -> Result<SegmentCosts> {
    let candidate = seg.frame_index(i, j)?;
    let uniform = seg.uniform_indices();
    let mut masked_frames = vec![Tensor::scalar(0.0); seg.frames.len()];
    for &idx in uniform.iter().chain(std::iter::once(&candidate)) {
        masked_frames[idx] = masked(m, &seg.frames[idx])?;
    }
    Ok(costs_from_masked(&masked_frames, &uniform, candidate, i))
}

/// Combines prior and future costs for segment `i` (1-based) of `segments`.
pub fn net_cost(entry: &SegmentCosts, i: usize, segments: usize, rule: WeightRule) -> NetCost {
    let total = entry.prior + entry.future;
    if total == 0.0 {
        return NetCost {
            prior_weight: 0.0,
            future_weight: 0.0,
            net: 0.0,
        };
    }
    let prior_weight = entry.prior / total * i as f64;
    let future_share = match rule {
        WeightRule::Balanced => entry.future,
        WeightRule::StrictPaper => entry.prior,
    };
    let future_weight = future_share / total * (segments - i) as f64;
    NetCost {
        prior_weight,
        future_weight,
        net: prior_weight * entry.prior + future_weight * entry.future,
    }
}

/// Net cost of every candidate, indexed `[segment][frame]` (0-based).
pub fn cost_table(seg: &VideoSegments, m: &SaliencyMap, rule: WeightRule) -> Result<Vec<Vec<f64>>> {
    let masked_frames = seg.frames.iter().map(|f| masked(m, f)).collect::<Result<Vec<_>>>()?;
    let uniform = seg.uniform_indices();
    Ok((1..=seg.segments)
        .map(|i| {
            (1..=seg.per_segment)
                .map(|j| {
                    let cand = (i - 1) * seg.per_segment + (j - 1);
                    let c = costs_from_masked(&masked_frames, &uniform, cand, i);
                    net_cost(&c, i, seg.segments, rule).net
                })
                .collect()
        })
        .collect())
}

/// One frame per segment, picking the extreme net cost; ties go to the
/// earliest frame. Returns global frame indices.
pub fn select_frames(seg: &VideoSegments, m: &SaliencyMap, cfg: &SamplerConfig) -> Result<Vec<usize>> {
    let table = cost_table(seg, m, cfg.weights)?;
    Ok(table
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                let better = match cfg.mode {
                    SelectMode::Argmax => v > row[best],
                    SelectMode::Argmin => v < row[best],
                };
                if better {
                    best = j;
                }
            }
            i * seg.per_segment + best
        })
        .collect())
}

/// Index of the largest entry of `values`; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Sums two prediction vectors and returns the winning class.
pub fn ensemble(pred_uniform: &[f64], pred_sampled: &[f64]) -> Result<usize> {
    if pred_uniform.len() != pred_sampled.len() {
        return Err(Error::shape("ensemble", &[pred_uniform.len()], &[pred_sampled.len()]));
    }
    let summed: Vec<f64> = pred_uniform.iter().zip(pred_sampled).map(|(a, b)| a + b).collect();
    argmax(&summed).ok_or_else(|| Error::arg("ensemble of empty predictions"))
}
