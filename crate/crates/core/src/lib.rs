//! Differentiable static-dynamic temporal-frequency masks for video
//! features.
//!
//! * [`tensor`] and [`tape`]: dense `f64` arrays and reverse-mode gradients.
//! * [`spectral`]: temporal DFT (radix-2 and Bluestein) and bin frequencies.
//! * [`masks`]: dynamic, static and combined saliency masks.
//! * [`disentangle`]: the identity loss tying penultimate features to the
//!   mask of mid-level features.
//! * [`sampler`]: uniform and mask-guided frame selection, and ensembling.
//! * [`synth`]: synthetic scenes, a toy 3D-conv backbone and its trainer.
//! * [`gradcheck`]: finite-difference verification of the whole pipeline.

pub mod disentangle;
pub mod error;
pub mod gradcheck;
pub mod masks;
pub mod sampler;
pub mod spectral;
pub mod synth;
pub mod tape;
pub mod tensor;

pub use error::{Error, Result};
pub use masks::{MaskKind, SaliencyMap};
pub use tape::{Gradients, Tape, Var};
pub use tensor::{ComplexTensor, Tensor};
