//! Identity disentanglement loss.
//!
//! The combined mask of the mid-level features is collapsed over channels,
//! resized to the penultimate spatial grid, and the penultimate features
//! are pulled toward their own masked version:
//!
//! `L_mask = lambda * mean((x_p - M(x_mid) ⊙ x_p)^2)`
//!
//! Gradients reach both `x_p` and, through the mask, `x_mid`.

use crate::error::{Error, Result};
use crate::masks::{self, MaskKind, SaliencyMap};
use crate::tape::{Tape, Var};
use crate::tensor::{self, Axis, ReduceOp};

#[derive(Clone, Debug, PartialEq)]
pub struct LossConfig {
    pub lambda_mask: f64,
    pub normalize_mask: bool,
    /// Treat the mask as a constant. Ablation only.
    pub stop_mask_gradient: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda_mask: 0.1,
            normalize_mask: true,
            stop_mask_gradient: false,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lambda_mask.is_finite() || self.lambda_mask < 0.0 {
            return Err(Error::Config(format!(
                "lambda_mask must be a finite non-negative number, got {}",
                self.lambda_mask
            )));
        }
        Ok(())
    }
}

/// Collapses a `[C, H, W]` map to `[H, W]` by channel mean and resizes it
/// to `target`'s spatial extents (`target` is `[C_p, H_p, W_p]`).
pub fn transfer_mask(m: &SaliencyMap, target: [usize; 3]) -> Result<SaliencyMap> {
    let values = m.values();
    let collapsed = match values.rank() {
        3 => values.reduce(ReduceOp::Mean, Axis::Index(0))?,
        2 => values.clone(),
        _ => {
            return Err(Error::arg(format!(
                "mask must be [C, H, W] or [H, W], got {:?}",
                values.dims()
            )))
        }
    };
    let resized = tensor::resize_bilinear(&collapsed, target[1], target[2])?;
    SaliencyMap::new(resized, m.kind(), m.is_normalized())
}

fn record_transfer(tape: &mut Tape, m: Var, out_h: usize, out_w: usize) -> Result<Var> {
    let collapsed = tape.reduce(m, ReduceOp::Mean, Axis::Index(0))?;
    tape.resize_bilinear(collapsed, out_h, out_w)
}

/// Records `L_mask` for `x_mid: [T, C_mid, H_mid, W_mid]` and
/// `x_p: [T', C_p, H_p, W_p]`.
pub fn identity_loss(tape: &mut Tape, x_mid: Var, x_p: Var, cfg: &LossConfig) -> Result<Var> {
    cfg.validate()?;
    let &[_, _, h_p, w_p] = tape.dims(x_p) else {
        return Err(Error::arg(format!(
            "penultimate features must be [T, C, H, W], got {:?}",
            tape.dims(x_p)
        )));
    };
    let mut mask = masks::record_combined_mask(tape, x_mid, cfg.normalize_mask)?;
    if cfg.stop_mask_gradient {
        mask = tape.detach(mask);
    }
    let mask = record_transfer(tape, mask, h_p, w_p)?;
    let masked = tape.mul(x_p, mask)?;
    let diff = tape.sub(x_p, masked)?;
    let sq = tape.square(diff);
    let mse = tape.mean(sq);
    Ok(tape.scale(mse, cfg.lambda_mask))
}

/// Cross-entropy on `logits` plus [`identity_loss`].
pub fn total_loss(tape: &mut Tape, logits: Var, label: usize, x_mid: Var, x_p: Var, cfg: &LossConfig) -> Result<Var> {
    let ce = tape.cross_entropy(logits, label)?;
    let lmask = identity_loss(tape, x_mid, x_p, cfg)?;
    tape.add(ce, lmask)
}

/// Eager evaluation of the identity loss, for inspection outside training.
pub fn identity_loss_value(x_mid: &tensor::Tensor, x_p: &tensor::Tensor, cfg: &LossConfig) -> Result<f64> {
    cfg.validate()?;
    let &[_, c_p, h_p, w_p] = x_p.dims() else {
        return Err(Error::arg("penultimate features must be rank 4"));
    };
    let m = masks::mask_of_kind(x_mid, MaskKind::Combined, cfg.normalize_mask)?;
    let m = transfer_mask(&m, [c_p, h_p, w_p])?;
    let masked = masks::apply_mask(&m, x_p)?;
    Ok(cfg.lambda_mask * x_p.sub(&masked)?.square().mean_all())
}
