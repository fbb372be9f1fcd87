//! Static, dynamic and combined temporal-frequency saliency masks.
//!
//! For a `[T, C, H, W]` volume with temporal spectrum `X_k` and bin
//! frequencies `f_k`:
//!
//! * dynamic: `sum_k |X_k|^2 f_k^2`
//! * static:  `sum_k |X_k|^2 / (1 + f_k^2)`
//! * combined: dynamic + static, optionally divided by `mean + 1e-8`.
//!
//! Every mask is `[C, H, W]` and broadcasts over time when applied.

use crate::error::{Error, Result};
use crate::spectral::{self, FrequencyVector};
use crate::tape::{Tape, Var};
use crate::tensor::{Axis, ReduceOp, Tensor};

/// Guard added to the mask mean before normalizing.
pub const NORMALIZE_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskKind {
    Dynamic,
    Static,
    Combined,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap {
    values: Tensor,
    kind: MaskKind,
    normalized: bool,
}

impl SaliencyMap {
    pub fn new(values: Tensor, kind: MaskKind, normalized: bool) -> Result<Self> {
        if values.data().iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::arg("saliency values must be finite and non-negative"));
        }
        Ok(SaliencyMap {
            values,
            kind,
            normalized,
        })
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn into_values(self) -> Tensor {
        self.values
    }

    pub fn kind(&self) -> MaskKind {
        self.kind
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn mean(&self) -> f64 {
        self.values.mean_all()
    }
}

fn check_volume(dims: &[usize]) -> Result<usize> {
    match dims {
        &[t, _, _, _] => Ok(t),
        _ => Err(Error::arg(format!("mask input must be [T, C, H, W], got {dims:?}"))),
    }
}

fn dynamic_weights(freqs: &FrequencyVector) -> Tensor {
    freqs.weights(|f| f * f)
}

fn static_weights(freqs: &FrequencyVector) -> Tensor {
    // 1/(1+f^2) with f^2 >= 0, never singular
    let f2 = freqs.weights(|f| f * f);
    f2.shifted_reciprocal().expect("f^2 is non-negative")
}

fn weighted_sum(power: &Tensor, weights: &Tensor) -> Result<Tensor> {
    power.mul(weights)?.reduce(ReduceOp::Sum, Axis::Index(0))
}

pub fn dynamic_mask(x: &Tensor) -> Result<SaliencyMap> {
    let frames = check_volume(x.dims())?;
    let power = spectral::temporal_power(x)?;
    let values = weighted_sum(&power, &dynamic_weights(&spectral::frequency_vector(frames)?))?;
    SaliencyMap::new(values, MaskKind::Dynamic, false)
}

pub fn static_mask(x: &Tensor) -> Result<SaliencyMap> {
    let frames = check_volume(x.dims())?;
    let power = spectral::temporal_power(x)?;
    let values = weighted_sum(&power, &static_weights(&spectral::frequency_vector(frames)?))?;
    SaliencyMap::new(values, MaskKind::Static, false)
}

pub fn combined_mask(x: &Tensor, normalize: bool) -> Result<SaliencyMap> {
    let frames = check_volume(x.dims())?;
    let freqs = spectral::frequency_vector(frames)?;
    let power = spectral::temporal_power(x)?;
    let dynamic = weighted_sum(&power, &dynamic_weights(&freqs))?;
    let stat = weighted_sum(&power, &static_weights(&freqs))?;
    let mut values = dynamic.add(&stat)?;
    if normalize {
        let denom = values.mean_all() + NORMALIZE_EPS;
        values = values.map(|v| v / denom);
    }
    SaliencyMap::new(values, MaskKind::Combined, normalize)
}

/// Computes the mask of the requested kind; `normalize` only affects
/// [`MaskKind::Combined`].
pub fn mask_of_kind(x: &Tensor, kind: MaskKind, normalize: bool) -> Result<SaliencyMap> {
    match kind {
        MaskKind::Dynamic => dynamic_mask(x),
        MaskKind::Static => static_mask(x),
        MaskKind::Combined => combined_mask(x, normalize),
    }
}

/// `m ⊙ x`, broadcasting the map over time (and channels when collapsed).
pub fn apply_mask(m: &SaliencyMap, x: &Tensor) -> Result<Tensor> {
    let md = m.values.dims();
    let xd = x.dims();
    if md.len() > xd.len() || md.len() < 2 || xd[xd.len() - md.len()..] != *md {
        return Err(Error::shape("apply_mask", md, xd));
    }
    x.mul(&m.values)
}

/// Records the combined mask of a `[T, C, H, W]` tape value, keeping the
/// dependence on `x` differentiable.
pub fn record_combined_mask(tape: &mut Tape, x: Var, normalize: bool) -> Result<Var> {
    let frames = check_volume(tape.dims(x))?;
    let freqs = spectral::frequency_vector(frames)?;
    // f^2 + 1/(1+f^2), folded into one weight per bin
    let weights = dynamic_weights(&freqs).add(&static_weights(&freqs))?;
    let power = tape.temporal_power(x)?;
    let w = tape.constant(weights);
    let weighted = tape.mul(power, w)?;
    let mask = tape.reduce(weighted, ReduceOp::Sum, Axis::Index(0))?;
    if !normalize {
        return Ok(mask);
    }
    let mean = tape.mean(mask);
    let denom = tape.add_scalar(mean, NORMALIZE_EPS);
    tape.div(mask, denom)
}
