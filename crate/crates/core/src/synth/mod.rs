//! Synthetic scenes with ground-truth region types, a 4-class motion
//! dataset, a three-block 3D-convolution backbone and its trainer.

pub mod backbone;
pub mod dataset;
pub mod scene;
pub mod trainer;

pub use backbone::{Activation, BackboneConfig, Taps, ToyBackbone};
pub use dataset::{class_motion, motion_classes, ClassMotion, Dataset, DatasetConfig, Sample, NUM_CLASSES};
pub use scene::{generate_scene, random_scene_spec, BoundingBox, LabelMap, Region, RegionKind, Scene, SceneSpec};
pub use trainer::{
    evaluate, train, EnsembleInput, EpochMetrics, EvalConfig, EvalReport, SamplingFeatures, Sgd, TrainConfig,
    TrainReport,
};
