use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RegionKind {
    DynamicSalient,
    StaticSalient,
    DynamicBackground,
    StaticBackground,
}

impl RegionKind {
    pub const ALL: [RegionKind; 4] = [
        RegionKind::DynamicSalient,
        RegionKind::StaticSalient,
        RegionKind::DynamicBackground,
        RegionKind::StaticBackground,
    ];

    pub fn is_dynamic(self) -> bool {
        matches!(self, RegionKind::DynamicSalient | RegionKind::DynamicBackground)
    }

    pub fn is_salient(self) -> bool {
        matches!(self, RegionKind::DynamicSalient | RegionKind::StaticSalient)
    }

    fn label_priority(self) -> u8 {
        match self {
            RegionKind::DynamicSalient | RegionKind::StaticSalient => 2,
            RegionKind::DynamicBackground => 1,
            RegionKind::StaticBackground => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundingBox {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl BoundingBox {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.top..self.top + self.height).contains(&row) && (self.left..self.left + self.width).contains(&col)
    }

    pub fn overlaps(&self, other: &BoundingBox) -> bool {
        self.top < other.top + other.height
            && other.top < self.top + self.height
            && self.left < other.left + other.width
            && other.left < self.left + self.width
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub kind: RegionKind,
    pub bbox: BoundingBox,
    pub amplitude: f64,
    /// Temporal frequency in cycles per frame; zero for static regions.
    pub frequency: f64,
    /// Phase offset in radians.
    pub phase: f64,
    /// Spatial wave vector in cycles per pixel along (rows, cols). A
    /// non-zero vector turns a flicker into a travelling grating.
    pub wave: [f64; 2],
}

impl Region {
    pub fn new(kind: RegionKind, bbox: BoundingBox, amplitude: f64, frequency: f64) -> Self {
        Region {
            kind,
            bbox,
            amplitude,
            frequency,
            phase: 0.0,
            wave: [0.0, 0.0],
        }
    }

    fn value(&self, t: usize, row: usize, col: usize) -> f64 {
        if !self.kind.is_dynamic() {
            return self.amplitude;
        }
        let spatial = self.wave[0] * row as f64 + self.wave[1] * col as f64;
        self.amplitude * (2.0 * PI * (self.frequency * t as f64 + spatial) + self.phase).sin()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    pub regions: Vec<Region>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.frames == 0 {
            return Err(Error::Spec("grid and frame count must be positive".into()));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::Spec(format!("noise sigma {} is invalid", self.noise_sigma)));
        }
        for (n, r) in self.regions.iter().enumerate() {
            let b = r.bbox;
            if b.height == 0 || b.width == 0 || b.top + b.height > self.height || b.left + b.width > self.width {
                return Err(Error::Spec(format!("region {n} box {b:?} leaves the grid")));
            }
            if !r.amplitude.is_finite() || !r.phase.is_finite() || !r.frequency.is_finite() {
                return Err(Error::Spec(format!("region {n} has non-finite parameters")));
            }
            if r.kind.is_dynamic() && r.frequency <= 0.0 {
                return Err(Error::Spec(format!("dynamic region {n} needs frequency > 0")));
            }
            if !r.kind.is_dynamic() && r.frequency != 0.0 {
                return Err(Error::Spec(format!("static region {n} must have frequency 0")));
            }
        }
        for (a, ra) in self.regions.iter().enumerate() {
            for (b, rb) in self.regions.iter().enumerate().skip(a + 1) {
                if ra.kind.is_salient() && rb.kind.is_salient() && ra.bbox.overlaps(&rb.bbox) {
                    return Err(Error::Spec(format!("salient regions {a} and {b} overlap")));
                }
            }
        }
        Ok(())
    }
}

/// Per-pixel ground-truth region type.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMap {
    pub height: usize,
    pub width: usize,
    kinds: Vec<RegionKind>,
}

impl LabelMap {
    pub fn at(&self, row: usize, col: usize) -> RegionKind {
        self.kinds[row * self.width + col]
    }

    pub fn kinds(&self) -> &[RegionKind] {
        &self.kinds
    }

    /// Mean of a `[H, W]`-shaped slice of values over pixels matching `pred`;
    /// `None` when no pixel matches.
    pub fn mean_over(&self, values: &[f64], pred: impl Fn(RegionKind) -> bool) -> Option<f64> {
        let (sum, n) = self
            .kinds
            .iter()
            .zip(values)
            .filter(|(k, _)| pred(**k))
            .fold((0.0, 0usize), |(s, n), (_, v)| (s + v, n + 1));
        (n > 0).then(|| sum / n as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    /// `[T, 1, H, W]`.
    pub video: Tensor,
    pub labels: LabelMap,
}

pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    let mut kinds = vec![RegionKind::StaticBackground; h * w];
    for r in &spec.regions {
        for row in r.bbox.top..r.bbox.top + r.bbox.height {
            for col in r.bbox.left..r.bbox.left + r.bbox.width {
                let slot = &mut kinds[row * w + col];
                if r.kind.label_priority() >= slot.label_priority() {
                    *slot = r.kind;
                }
            }
        }
    }
    let mut data = vec![0.0; spec.frames * h * w];
    for t in 0..spec.frames {
        for r in &spec.regions {
            for row in r.bbox.top..r.bbox.top + r.bbox.height {
                for col in r.bbox.left..r.bbox.left + r.bbox.width {
                    data[(t * h + row) * w + col] += r.value(t, row, col);
                }
            }
        }
    }
    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Spec(format!("noise distribution: {e}")))?;
        data.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }
    Ok(Scene {
        video: Tensor::new(&[spec.frames, 1, h, w], data)?,
        labels: LabelMap {
            height: h,
            width: w,
            kinds,
        },
    })
}

/// Picks a box of side `min_side..=max_side` inside quadrant `q` of the grid.
pub(crate) fn box_in_quadrant(
    rng: &mut ChaCha8Rng,
    height: usize,
    width: usize,
    q: usize,
    min_side: usize,
    max_side: usize,
) -> BoundingBox {
    let (qh, qw) = (height / 2, width / 2);
    let (top0, left0) = ((q / 2) * qh, (q % 2) * qw);
    let bh = rng.gen_range(min_side..=max_side).min(qh);
    let bw = rng.gen_range(min_side..=max_side).min(qw);
    BoundingBox {
        top: top0 + rng.gen_range(0..=qh - bh),
        left: left0 + rng.gen_range(0..=qw - bw),
        height: bh,
        width: bw,
    }
}

/// A noise-free scene with one region of each of the four kinds, each in
/// its own quadrant. Dynamic regions oscillate on exact DFT bins strictly
/// between DC and Nyquist; salient amplitudes lie in `[0.9, 1.1]` and
/// background amplitudes in `[0.1, 0.3]`.
pub fn random_scene_spec(seed: u64, frames: usize, height: usize, width: usize) -> SceneSpec {
    assert!(frames >= 3, "need a bin strictly between DC and Nyquist");
    assert!(height >= 4 && width >= 4, "grid too small for quadrants");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut quadrants = [0usize, 1, 2, 3];
    for i in (1..4).rev() {
        quadrants.swap(i, rng.gen_range(0..=i));
    }
    let max_bin = (frames - 1) / 2;
    let regions = RegionKind::ALL
        .iter()
        .zip(quadrants)
        .map(|(&kind, q)| {
            let side_max = (height.min(width) / 2).max(2);
            let bbox = box_in_quadrant(&mut rng, height, width, q, 2.min(side_max), side_max);
            let amplitude = if kind.is_salient() {
                rng.gen_range(0.9..=1.1)
            } else {
                rng.gen_range(0.1..=0.3)
            };
            let frequency = if kind.is_dynamic() {
                rng.gen_range(1..=max_bin) as f64 / frames as f64
            } else {
                0.0
            };
            Region {
                kind,
                bbox,
                amplitude,
                frequency,
                phase: rng.gen_range(0.0..2.0 * PI),
                wave: [0.0, 0.0],
            }
        })
        .collect();
    SceneSpec {
        height,
        width,
        frames,
        regions,
        noise_sigma: 0.0,
        seed,
    }
}
