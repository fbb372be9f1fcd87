use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tape::{softmax, Tape, Var};
use crate::tensor::{Axis, Conv3dParams, ReduceOp, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BackboneConfig {
    pub in_channels: usize,
    /// Output channels of the three blocks.
    pub widths: [usize; 3],
    pub num_classes: usize,
    /// Spatial stride of each block; time is never strided.
    pub spatial_strides: [usize; 3],
    pub activation: Activation,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        BackboneConfig {
            in_channels: 1,
            widths: [8, 8, 16],
            num_classes: 4,
            spatial_strides: [1, 2, 2],
            activation: Activation::Relu,
        }
    }
}

const KERNEL: usize = 3;

/// Three 3x3x3 convolution blocks with mid-level (block 2) and penultimate
/// (block 3) taps, followed by global average pooling and a linear head.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyBackbone {
    config: BackboneConfig,
    /// kernel/bias per block, then head weight `[classes, C]` and bias.
    params: Vec<Tensor>,
}

/// Tape handles for one forward pass.
#[derive(Clone, Copy, Debug)]
pub struct Taps {
    pub level1: Var,
    pub mid: Var,
    pub penultimate: Var,
    pub logits: Var,
}

impl ToyBackbone {
    pub fn new(config: BackboneConfig, seed: u64) -> Result<Self> {
        if config.in_channels == 0
            || config.num_classes == 0
            || config.widths.contains(&0)
            || config.spatial_strides.contains(&0)
        {
            return Err(Error::Config(format!("degenerate backbone config {config:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // He scaling for rectifiers, LeCun otherwise
        let gain = match config.activation {
            Activation::Tanh => 3.0,
            Activation::Relu => 6.0,
        };
        let mut params = Vec::with_capacity(8);
        let mut c_in = config.in_channels;
        for &c_out in &config.widths {
            let fan_in = c_in * KERNEL * KERNEL * KERNEL;
            let bound = (gain / fan_in as f64).sqrt();
            let dims = [c_out, c_in, KERNEL, KERNEL, KERNEL];
            params.push(Tensor::from_fn(&dims, |_| rng.gen_range(-bound..bound))?);
            params.push(Tensor::zeros(&[c_out, 1, 1])?);
            c_in = c_out;
        }
        let bound = (3.0 / c_in as f64).sqrt();
        params.push(Tensor::from_fn(&[config.num_classes, c_in], |_| {
            rng.gen_range(-bound..bound)
        })?);
        params.push(Tensor::zeros(&[config.num_classes])?);
        Ok(ToyBackbone { config, params })
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.config
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Replaces all parameters; shapes must match the current ones.
    pub fn set_params(&mut self, params: Vec<Tensor>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::arg("parameter count mismatch"));
        }
        for (old, new) in self.params.iter().zip(&params) {
            if old.dims() != new.dims() {
                return Err(Error::shape("set_params", old.dims(), new.dims()));
            }
        }
        self.params = params;
        Ok(())
    }

    /// All parameters concatenated in a fixed order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.params.iter().flat_map(|p| p.data().iter().copied()).collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::arg(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for p in &mut self.params {
            let n = p.len();
            *p = Tensor::new(p.dims(), flat[offset..offset + n].to_vec())?;
            offset += n;
        }
        Ok(())
    }

    /// Parameters as differentiable leaves on `tape`.
    pub fn register(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.iter().map(|p| tape.leaf(p.clone())).collect()
    }

    /// Parameters as constants on `tape`, for inference.
    pub fn register_frozen(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.iter().map(|p| tape.constant(p.clone())).collect()
    }

    fn block(&self, tape: &mut Tape, x: Var, params: &[Var], index: usize) -> Result<Var> {
        let s = self.config.spatial_strides[index];
        let conv = tape.conv3d(
            x,
            params[2 * index],
            Conv3dParams {
                stride: [1, s, s],
                padding: [1, 1, 1],
            },
        )?;
        let pre = tape.add(conv, params[2 * index + 1])?;
        Ok(match self.config.activation {
            Activation::Tanh => tape.tanh(pre),
            Activation::Relu => tape.relu(pre),
        })
    }

    /// Forward pass of a `[T, C_in, H, W]` clip.
    pub fn forward(&self, tape: &mut Tape, clip: Var, params: &[Var]) -> Result<Taps> {
        if params.len() != self.params.len() {
            return Err(Error::arg("wrong number of parameter handles"));
        }
        let level1 = self.block(tape, clip, params, 0)?;
        let mid = self.block(tape, level1, params, 1)?;
        let penultimate = self.block(tape, mid, params, 2)?;
        // global average pool over time, then height, then width
        let pooled = tape.reduce(penultimate, ReduceOp::Mean, Axis::Index(0))?;
        let pooled = tape.reduce(pooled, ReduceOp::Mean, Axis::Index(1))?;
        let pooled = tape.reduce(pooled, ReduceOp::Mean, Axis::Index(1))?;
        let head = tape.matvec(params[6], pooled)?;
        let logits = tape.add(head, params[7])?;
        Ok(Taps {
            level1,
            mid,
            penultimate,
            logits,
        })
    }

    pub fn logits(&self, clip: &Tensor) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let params = self.register_frozen(&mut tape);
        let x = tape.constant(clip.clone());
        let taps = self.forward(&mut tape, x, &params)?;
        Ok(tape.value(taps.logits).data().to_vec())
    }

    pub fn probabilities(&self, clip: &Tensor) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(clip)?))
    }

    /// Block-1 features of every frame of a `[N, C_in, H, W]` video, computed
    /// in one pass over the whole video.
    pub fn level1_features(&self, video: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let params = self.register_frozen(&mut tape);
        let x = tape.constant(video.clone());
        let out = self.block(&mut tape, x, &params, 0)?;
        Ok(tape.value(out).clone())
    }
}
