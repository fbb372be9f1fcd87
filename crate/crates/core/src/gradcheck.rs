//! Central finite-difference verification of the tape's gradients through
//! the identity loss and the toy backbone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::disentangle::{self, LossConfig};
use crate::error::Result;
use crate::synth::backbone::{Activation, BackboneConfig, ToyBackbone};
use crate::tape::Tape;
use crate::tensor::Tensor;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn central_difference(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> Result<f64>) -> Result<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe)?;
        probe[i] = x[i] - h;
        let down = f(&probe)?;
        probe[i] = x[i];
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// Largest elementwise relative error. Entries are compared relative to
/// their own magnitude, but never to less than 1% of the largest entry,
/// so near-zero components do not dominate.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let scale = analytic.iter().chain(numeric).fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let floor = 1e-2 * scale;
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckConfig {
    pub seed: u64,
    pub frames: usize,
    pub mid_channels: usize,
    pub pen_channels: usize,
    pub mid_size: usize,
    pub pen_size: usize,
    pub loss: LossConfig,
    pub step: f64,
    /// Perturbs the analytic gradients by 1%; negative control only.
    pub inject_fault: bool,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            seed: 0,
            frames: 4,
            mid_channels: 2,
            pen_channels: 3,
            mid_size: 6,
            pen_size: 3,
            loss: LossConfig::default(),
            step: DEFAULT_STEP,
            inject_fault: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradcheckReport {
    pub x_p: f64,
    pub x_mid: f64,
    pub weights: f64,
}

impl GradcheckReport {
    pub fn max(&self) -> f64 {
        self.x_p.max(self.x_mid).max(self.weights)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max() < tolerance
    }
}

fn random_tensor(rng: &mut ChaCha8Rng, dims: &[usize]) -> Result<Tensor> {
    Tensor::from_fn(dims, |_| rng.gen_range(-1.0..1.0))
}

/// Backbone used for the weight check: small enough for exhaustive finite
/// differences, with a spatial stride between the two taps so the mask is
/// resized on its way to the penultimate features.
pub fn gradcheck_backbone_config() -> BackboneConfig {
    BackboneConfig {
        in_channels: 1,
        widths: [2, 3, 3],
        num_classes: 3,
        spatial_strides: [1, 1, 2],
        activation: Activation::Tanh,
    }
}

pub fn run(cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fault = if cfg.inject_fault { 1.01 } else { 1.0 };

    // identity loss with respect to both feature taps
    let mid_dims = [cfg.frames, cfg.mid_channels, cfg.mid_size, cfg.mid_size];
    let pen_dims = [cfg.frames, cfg.pen_channels, cfg.pen_size, cfg.pen_size];
    let x_mid = random_tensor(&mut rng, &mid_dims)?;
    let x_p = random_tensor(&mut rng, &pen_dims)?;
    let mut tape = Tape::new();
    let vm = tape.leaf(x_mid.clone());
    let vp = tape.leaf(x_p.clone());
    let loss = disentangle::identity_loss(&mut tape, vm, vp, &cfg.loss)?;
    let grads = tape.backward(loss)?;
    let scaled = |t: Tensor| t.scale(fault).into_data();
    let (g_mid, g_p) = (scaled(grads.wrt(vm)), scaled(grads.wrt(vp)));

    let num_mid = central_difference(x_mid.data(), cfg.step, |v| {
        disentangle::identity_loss_value(&Tensor::new(&mid_dims, v.to_vec())?, &x_p, &cfg.loss)
    })?;
    let num_p = central_difference(x_p.data(), cfg.step, |v| {
        disentangle::identity_loss_value(&x_mid, &Tensor::new(&pen_dims, v.to_vec())?, &cfg.loss)
    })?;

    // full objective with respect to backbone weights
    let bcfg = gradcheck_backbone_config();
    let classes = bcfg.num_classes;
    let backbone = ToyBackbone::new(bcfg, rng.gen())?;
    let clip = random_tensor(&mut rng, &[cfg.frames, 1, 8, 8])?;
    let label = rng.gen_range(0..classes);
    let objective = |b: &ToyBackbone| -> Result<(f64, Vec<f64>)> {
        let mut tape = Tape::new();
        let params = b.register(&mut tape);
        let x = tape.constant(clip.clone());
        let taps = b.forward(&mut tape, x, &params)?;
        let loss = disentangle::total_loss(&mut tape, taps.logits, label, taps.mid, taps.penultimate, &cfg.loss)?;
        let value = tape.value(loss).item().expect("scalar loss");
        let grads = tape.backward(loss)?;
        let flat = params.iter().flat_map(|&p| grads.wrt(p).into_data()).collect();
        Ok((value, flat))
    };
    let (_, g_w) = objective(&backbone)?;
    let g_w: Vec<f64> = g_w.into_iter().map(|v| v * fault).collect();
    let mut probe = backbone.clone();
    let num_w = central_difference(&backbone.flat_params(), cfg.step, |w| {
        probe.set_flat_params(w)?;
        let mut tape = Tape::new();
        let params = probe.register_frozen(&mut tape);
        let x = tape.constant(clip.clone());
        let taps = probe.forward(&mut tape, x, &params)?;
        let loss = disentangle::total_loss(&mut tape, taps.logits, label, taps.mid, taps.penultimate, &cfg.loss)?;
        Ok(tape.value(loss).item().expect("scalar loss"))
    })?;

    Ok(GradcheckReport {
        x_p: relative_error(&g_p, &num_p),
        x_mid: relative_error(&g_mid, &num_mid),
        weights: relative_error(&g_w, &num_w),
    })
}
