use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scene::{box_in_quadrant, generate_scene, Region, RegionKind, SceneSpec};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const NUM_CLASSES: usize = 4;

/// Spatial period of the class gratings, in pixels.
const GRATING_PERIOD: f64 = 8.0;

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetConfig {
    pub num_train: usize,
    pub num_eval: usize,
    /// Segments per video, i.e. frames per network clip.
    pub segments: usize,
    pub frames_per_segment: usize,
    pub height: usize,
    pub width: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            num_train: 200,
            num_eval: 50,
            segments: 8,
            frames_per_segment: 4,
            height: 16,
            width: 16,
            noise_sigma: 0.05,
            seed: 7,
        }
    }
}

impl DatasetConfig {
    pub fn frames(&self) -> usize {
        self.segments * self.frames_per_segment
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments < 8 {
            // the slow/fast class bins 1 and 3 must sit below Nyquist
            return Err(Error::Config("dataset needs at least 8 segments".into()));
        }
        if self.frames_per_segment == 0 || self.height < 8 || self.width < 8 {
            return Err(Error::Config("dataset grid or segment length too small".into()));
        }
        if self.num_train == 0 {
            return Err(Error::Config("dataset needs training samples".into()));
        }
        Ok(())
    }
}

/// Motion signature of one class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassMotion {
    /// DFT bin of the grating's temporal frequency on a clip of `segments` frames.
    pub clip_bin: usize,
    /// +1 for rightward travel, -1 for leftward.
    pub direction: f64,
}

/// Classes pair a slow (bin 1) or fast (bin 3) temporal frequency with a
/// rightward or leftward travel direction.
pub fn class_motion(label: usize) -> ClassMotion {
    assert!(label < NUM_CLASSES, "label {label} out of range");
    ClassMotion {
        clip_bin: if label < 2 { 1 } else { 3 },
        direction: if label.is_multiple_of(2) { 1.0 } else { -1.0 },
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// `[N, 1, H, W]` with `N = segments * frames_per_segment`.
    pub video: Tensor,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub train: Vec<Sample>,
    pub eval: Vec<Sample>,
}

/// Scene layout for one sample: a travelling grating carrying the class,
/// a static salient block, and a weak distractor grating with random
/// motion, each in its own quadrant.
pub fn sample_spec(cfg: &DatasetConfig, label: usize, seed: u64) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let motion = class_motion(label);
    let n = cfg.frames();
    let mut quadrants = [0usize, 1, 2, 3];
    for i in (1..4).rev() {
        quadrants.swap(i, rng.gen_range(0..=i));
    }
    let (h, w) = (cfg.height, cfg.width);
    let side = h.min(w) / 2;
    // bin b on the strided clip is b / n cycles per full-rate frame
    let freq = |bin: usize| bin as f64 / n as f64;

    let actor = Region {
        kind: RegionKind::DynamicSalient,
        bbox: box_in_quadrant(&mut rng, h, w, quadrants[0], side * 3 / 4, side),
        amplitude: rng.gen_range(0.8..=1.2),
        frequency: freq(motion.clip_bin),
        phase: rng.gen_range(0.0..2.0 * PI),
        wave: [0.0, -motion.direction / GRATING_PERIOD],
    };
    let context = Region::new(
        RegionKind::StaticSalient,
        box_in_quadrant(&mut rng, h, w, quadrants[1], side / 2, side * 3 / 4),
        rng.gen_range(0.6..=1.0),
        0.0,
    );
    let distractor_bin = rng.gen_range(1..=3);
    let distractor_dir = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let distractor = Region {
        kind: RegionKind::DynamicBackground,
        bbox: box_in_quadrant(&mut rng, h, w, quadrants[2], side / 2, side * 3 / 4),
        amplitude: rng.gen_range(0.1..=0.25),
        frequency: freq(distractor_bin),
        phase: rng.gen_range(0.0..2.0 * PI),
        wave: [distractor_dir / GRATING_PERIOD, 0.0],
    };
    SceneSpec {
        height: h,
        width: w,
        frames: n,
        regions: vec![actor, context, distractor],
        noise_sigma: cfg.noise_sigma,
        seed: seed ^ 0x9e37_79b9_7f4a_7c15,
    }
}

/// Balanced, seeded 4-way motion classification data.
pub fn motion_classes(cfg: &DatasetConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut make = |count: usize| -> Result<Vec<Sample>> {
        (0..count)
            .map(|i| {
                let label = i % NUM_CLASSES;
                let scene = generate_scene(&sample_spec(cfg, label, rng.gen()))?;
                Ok(Sample {
                    video: scene.video,
                    label,
                })
            })
            .collect()
    };
    let train = make(cfg.num_train)?;
    let eval = make(cfg.num_eval)?;
    Ok(Dataset {
        config: cfg.clone(),
        train,
        eval,
    })
}
