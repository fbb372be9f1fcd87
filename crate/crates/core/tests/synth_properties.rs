use fdmask::masks::{combined_mask, dynamic_mask, static_mask};
use fdmask::synth::{
    class_motion, generate_scene, motion_classes, random_scene_spec, train, BackboneConfig, BoundingBox, DatasetConfig,
    Region, RegionKind, SceneSpec, ToyBackbone, TrainConfig, NUM_CLASSES,
};
use fdmask::Error;

#[test]
fn salient_regions_outrank_static_background() {
    for seed in 0..50 {
        let scene = generate_scene(&random_scene_spec(seed, 8, 16, 16)).unwrap();
        let labels = &scene.labels;
        let combined = combined_mask(&scene.video, true).unwrap();
        let dynamic = dynamic_mask(&scene.video).unwrap();
        let stat = static_mask(&scene.video).unwrap();
        let mean = |v: &[f64], k: &dyn Fn(RegionKind) -> bool| labels.mean_over(v, k).unwrap();

        let salient = mean(combined.values().data(), &|k| k.is_salient());
        let background = mean(combined.values().data(), &|k| k == RegionKind::StaticBackground);
        assert!(salient > background, "seed {seed}: {salient} <= {background}");

        let dyn_on_dynamic = mean(dynamic.values().data(), &|k| k == RegionKind::DynamicSalient);
        let dyn_on_static = mean(dynamic.values().data(), &|k| k == RegionKind::StaticSalient);
        assert!(dyn_on_dynamic > dyn_on_static, "seed {seed}");

        let stat_on_static = mean(stat.values().data(), &|k| k == RegionKind::StaticSalient);
        let stat_on_dynamic = mean(stat.values().data(), &|k| k == RegionKind::DynamicSalient);
        assert!(stat_on_static > stat_on_dynamic, "seed {seed}");
    }
}

fn bbox(top: usize, left: usize, height: usize, width: usize) -> BoundingBox {
    BoundingBox {
        top,
        left,
        height,
        width,
    }
}

#[test]
fn scene_construction_examples() {
    let empty = SceneSpec {
        height: 5,
        width: 4,
        frames: 3,
        regions: vec![],
        noise_sigma: 0.0,
        seed: 1,
    };
    let scene = generate_scene(&empty).unwrap();
    assert_eq!(scene.video.dims(), &[3, 1, 5, 4]);
    assert_eq!(scene.video.max_abs(), 0.0);
    assert!(scene.labels.kinds().iter().all(|&k| k == RegionKind::StaticBackground));

    let noisy = SceneSpec {
        noise_sigma: 0.1,
        ..random_scene_spec(4, 8, 16, 16)
    };
    assert_eq!(generate_scene(&noisy).unwrap(), generate_scene(&noisy).unwrap());
    let reseeded = SceneSpec {
        seed: 5,
        ..noisy.clone()
    };
    assert_ne!(
        generate_scene(&noisy).unwrap().video,
        generate_scene(&reseeded).unwrap().video
    );
}

#[test]
fn invalid_specs_are_rejected() {
    let base = SceneSpec {
        height: 8,
        width: 8,
        frames: 4,
        regions: vec![],
        noise_sigma: 0.0,
        seed: 0,
    };
    let overlapping = SceneSpec {
        regions: vec![
            Region::new(RegionKind::StaticSalient, bbox(0, 0, 4, 4), 1.0, 0.0),
            Region::new(RegionKind::DynamicSalient, bbox(2, 2, 4, 4), 1.0, 0.25),
        ],
        ..base.clone()
    };
    assert!(matches!(generate_scene(&overlapping), Err(Error::Spec(_))));
    let outside = SceneSpec {
        regions: vec![Region::new(RegionKind::StaticSalient, bbox(6, 6, 4, 4), 1.0, 0.0)],
        ..base.clone()
    };
    assert!(generate_scene(&outside).is_err());
    let still = SceneSpec {
        regions: vec![Region::new(RegionKind::DynamicBackground, bbox(0, 0, 2, 2), 1.0, 0.0)],
        ..base.clone()
    };
    assert!(generate_scene(&still).is_err());
    let moving = SceneSpec {
        regions: vec![Region::new(RegionKind::StaticBackground, bbox(0, 0, 2, 2), 1.0, 0.1)],
        ..base
    };
    assert!(generate_scene(&moving).is_err());
}

#[test]
fn dataset_is_balanced_and_seeded() {
    let cfg = DatasetConfig::default();
    let ds = motion_classes(&cfg).unwrap();
    assert_eq!((ds.train.len(), ds.eval.len()), (200, 50));
    let mut counts = [0usize; NUM_CLASSES];
    for s in &ds.train {
        counts[s.label] += 1;
        assert_eq!(s.video.dims(), &[32, 1, 16, 16]);
    }
    assert_eq!(counts, [50; 4]);
    let mut eval_counts = [0usize; NUM_CLASSES];
    ds.eval.iter().for_each(|s| eval_counts[s.label] += 1);
    assert!(eval_counts.iter().all(|&c| c == 12 || c == 13));
    assert_eq!(motion_classes(&cfg).unwrap(), ds);

    // same class, different draws: different pixels, same kind of motion
    let (a, b) = (&ds.train[0], &ds.train[4]);
    assert_eq!(a.label, b.label);
    assert_ne!(a.video, b.video);
}

#[test]
fn distinct_class_frequencies_are_two_bins_apart() {
    let segments = DatasetConfig::default().segments;
    let motions: Vec<_> = (0..NUM_CLASSES).map(class_motion).collect();
    for (i, a) in motions.iter().enumerate() {
        assert!(a.clip_bin >= 1 && 2 * a.clip_bin < segments, "bin below Nyquist");
        for b in &motions[i + 1..] {
            assert_ne!((a.clip_bin, a.direction), (b.clip_bin, b.direction));
            if a.clip_bin != b.clip_bin {
                assert!(a.clip_bin.abs_diff(b.clip_bin) >= 2);
            }
        }
    }
}

#[test]
fn class_energy_sits_in_the_class_bin() {
    let cfg = DatasetConfig {
        noise_sigma: 0.0,
        num_train: 8,
        num_eval: 0,
        ..DatasetConfig::default()
    };
    let ds = motion_classes(&cfg).unwrap();
    for s in &ds.train {
        let clip = fdmask::synth::trainer::uniform_clip(s, cfg.segments, 0).unwrap();
        let power = fdmask::spectral::temporal_power(&clip).unwrap();
        let per_bin: Vec<f64> = (0..cfg.segments)
            .map(|k| power.index_axis0(k).unwrap().sum_all())
            .collect();
        let bin = class_motion(s.label).clip_bin;
        // the distractor moves at bins 1..=3, so compare against the actor's bin only
        assert!(per_bin[bin] > 0.0);
        let dc_free: f64 = per_bin[1..].iter().sum();
        assert!(
            per_bin[bin] + per_bin[cfg.segments - bin] > 0.5 * dc_free,
            "label {}",
            s.label
        );
    }
}

#[test]
fn single_sample_is_memorized() {
    let mut ds = motion_classes(&DatasetConfig {
        num_train: 1,
        num_eval: 1,
        ..DatasetConfig::default()
    })
    .unwrap();
    ds.eval = ds.train.clone();
    let mut b = ToyBackbone::new(BackboneConfig::default(), 3).unwrap();
    let cfg = TrainConfig {
        epochs: 60,
        batch_size: 1,
        ..TrainConfig::default()
    };
    let report = train(&ds, &mut b, &cfg).unwrap();
    let last = report.history.last().unwrap();
    assert!(last.ce < 0.01, "ce {}", last.ce);
    assert_eq!(last.acc, 1.0);
}

#[test]
fn training_is_bit_reproducible() {
    let ds = motion_classes(&DatasetConfig {
        num_train: 12,
        num_eval: 4,
        ..DatasetConfig::default()
    })
    .unwrap();
    let run = || {
        let mut b = ToyBackbone::new(BackboneConfig::default(), 17).unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 4,
            seed: 5,
            ..TrainConfig::default()
        };
        let r = train(&ds, &mut b, &cfg).unwrap();
        (b.flat_params(), r.history)
    };
    let (p1, h1) = run();
    let (p2, h2) = run();
    assert_eq!(h1, h2);
    assert!(p1.iter().zip(&p2).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn early_training_loss_mostly_decreases() {
    let ds = motion_classes(&DatasetConfig {
        num_eval: 0,
        ..DatasetConfig::default()
    })
    .unwrap();
    let mut b = ToyBackbone::new(BackboneConfig::default(), 0).unwrap();
    let cfg = TrainConfig {
        epochs: 6,
        ..TrainConfig::default()
    };
    let h = train(&ds, &mut b, &cfg).unwrap().history;
    let total: Vec<f64> = h.iter().map(|m| m.ce + m.lmask).collect();
    let down = total.windows(2).filter(|w| w[1] <= w[0]).count();
    assert!(down >= 4, "losses {total:?}");
}
