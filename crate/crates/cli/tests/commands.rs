mod common;

use std::fs;

use common::*;
use fdmask::Tensor;
use fdmask_cli::container;
use fdmask_cli::text::{parse_index_list, parse_manifest, parse_metrics};
use tempfile::tempdir;

#[test]
fn gen_default_writes_250_samples() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("data");
    assert_eq!(ok(&["gen", "--out", arg(&out)]), "train=200 eval=50\n");
    let manifest = parse_manifest(&fs::read_to_string(out.join("manifest.txt")).unwrap()).unwrap();
    assert_eq!(manifest.len(), 250);
    let count = |sub: &str| fs::read_dir(out.join(sub)).unwrap().count();
    assert_eq!(count("train") + count("eval"), 250);
    let first = container::read(&out.join(&manifest[0].path)).unwrap();
    assert_eq!(first.tensor.dims(), &[32, 1, 16, 16]);
}

#[test]
fn gen_is_reproducible() {
    let dir = tempdir().unwrap();
    let spec = dir.path().join("spec.cfg");
    fs::write(&spec, SMALL_SPEC).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["gen", "--spec", arg(&spec), "--out", arg(&a)]);
    ok(&["gen", "--spec", arg(&spec), "--out", arg(&b)]);
    assert_eq!(hash_tree(&a), hash_tree(&b));
    ok(&["gen", "--spec", arg(&spec), "--out", arg(&a)]);
    assert_eq!(hash_tree(&a), hash_tree(&b));
}

#[test]
fn unwritable_output_is_io_error() {
    let dir = tempdir().unwrap();
    let file = dir.path().join("plain");
    fs::write(&file, "x").unwrap();
    let out = file.join("data");
    assert_eq!(code(&["gen", "--out", arg(&out)]), 2);

    let input = dir.path().join("v.fvt");
    write_container(&input, Tensor::zeros(&[8, 1, 2, 2]).unwrap());
    assert_eq!(code(&["mask", arg(&input), "--out", arg(&out)]), 2);
}

#[test]
fn constant_video_has_zero_dynamic_mask() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("v.fvt");
    let out = dir.path().join("m.fvt");
    write_container(&input, Tensor::full(&[8, 2, 3, 4], 0.7).unwrap());
    let summary = ok(&["mask", arg(&input), "--out", arg(&out), "--kind", "dynamic"]);
    assert_eq!(summary, "mean=0 max=0\n");
    let m = container::read(&out).unwrap().tensor;
    assert_eq!(m.dims(), &[2, 3, 4]);
    assert!(m.data().iter().all(|&v| v == 0.0));
}

#[test]
fn unnormalized_combined_mask_of_constant() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("v.fvt");
    let out = dir.path().join("m.fvt");
    let c = 1.5;
    write_container(&input, Tensor::full(&[8, 1, 3, 3], c).unwrap());
    ok(&["mask", arg(&input), "--out", arg(&out), "--no-normalize"]);
    let m = container::read(&out).unwrap().tensor;
    for &v in m.data() {
        assert!((v - 64.0 * c * c).abs() <= 1e-9 * 64.0 * c * c);
    }
    let normalized = dir.path().join("n.fvt");
    let summary = ok(&["mask", arg(&input), "--out", arg(&normalized)]);
    assert!(summary.starts_with("mean=0.99999999"), "{summary}");
}

#[test]
fn mask_rejects_malformed_input() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("m.fvt");
    let bad = dir.path().join("bad.fvt");
    fs::write(&bad, b"FVT2\x01\x01\x00\x00\x01\x00\x00\x00\0\0\0\0\0\0\0\0").unwrap();
    assert_eq!(code(&["mask", arg(&bad), "--out", arg(&out)]), 3);

    let rank3 = dir.path().join("r3.fvt");
    write_container(&rank3, Tensor::zeros(&[8, 4, 4]).unwrap());
    let o = fdmask(&["mask", arg(&rank3), "--out", arg(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[8, 4, 4]"));

    let missing = dir.path().join("nope.fvt");
    assert_eq!(code(&["mask", arg(&missing), "--out", arg(&out)]), 4);
    assert!(!out.exists());
}

#[test]
fn sample_finds_the_burst() {
    let dir = tempdir().unwrap();
    let burst = burst_fixture(0);
    write_frames(dir.path(), &burst.frames);
    let listing = ok(&["sample", arg(dir.path())]);
    let picks = parse_index_list(&listing).unwrap();
    assert_eq!(picks.len(), 8);
    assert_eq!(picks[1], burst.planted);
    assert_eq!(fs::read_to_string(dir.path().join("indices.txt")).unwrap(), listing);
}

#[test]
fn sample_outputs_match_golden_files() {
    let dir = tempdir().unwrap();
    write_frames(dir.path(), &burst_fixture(0).frames);
    let strict = dir.path().join("strict.cfg");
    fs::write(&strict, "strict_paper_weights = true\n").unwrap();
    let balanced = ok(&["sample", arg(dir.path())]);
    let strict_listing = ok(&["sample", arg(dir.path()), "--config", arg(&strict)]);
    assert_eq!(balanced, include_str!("golden/burst_balanced.txt"));
    assert_eq!(strict_listing, include_str!("golden/burst_strict.txt"));
}

#[test]
fn identical_frames_pick_segment_starts() {
    let dir = tempdir().unwrap();
    let frame = Tensor::from_fn(&[2, 3, 3], |i| (i[0] + 2 * i[1] + 3 * i[2]) as f64).unwrap();
    write_frames(dir.path(), &vec![frame; 32]);
    let picks = parse_index_list(&ok(&["sample", arg(dir.path())])).unwrap();
    assert_eq!(picks, (0..8).map(|k| 4 * k).collect::<Vec<_>>());
}

#[test]
fn sample_reports_missing_and_malformed_frames() {
    let dir = tempdir().unwrap();
    let frames = burst_fixture(1).frames;
    write_frames(dir.path(), &frames[..31]);
    assert_eq!(code(&["sample", arg(dir.path())]), 4);
    write_container(&dir.path().join("frame_0031.fvt"), Tensor::zeros(&[1, 4, 4]).unwrap());
    assert_eq!(code(&["sample", arg(dir.path())]), 3);
    let unknown = dir.path().join("bad.cfg");
    fs::write(&unknown, "sampler = fast\n").unwrap();
    assert_eq!(code(&["sample", arg(dir.path()), "--config", arg(&unknown)]), 6);
}

#[test]
fn gradcheck_exit_codes() {
    let report = ok(&["gradcheck"]);
    assert!(report.starts_with("x_p="), "{report}");
    let report = ok(&["gradcheck", "--lambda-mask", "0"]);
    assert!(report.starts_with("x_p=0e0 x_mid=0e0"), "{report}");
    assert_eq!(code(&["gradcheck", "--inject-gradient-fault"]), 5);
}

struct Trained {
    _dir: tempfile::TempDir,
    data: std::path::PathBuf,
    run: std::path::PathBuf,
    ckpt: std::path::PathBuf,
}

fn small_trained(spec: &str, run_text: &str) -> Trained {
    let dir = tempdir().unwrap();
    let spec_path = dir.path().join("spec.cfg");
    let run = dir.path().join("run.cfg");
    fs::write(&spec_path, spec).unwrap();
    fs::write(&run, run_text).unwrap();
    let data = dir.path().join("data");
    let ckpt = dir.path().join("ckpt");
    ok(&["gen", "--spec", arg(&spec_path), "--out", arg(&data)]);
    ok(&[
        "train",
        "--config",
        arg(&run),
        "--data",
        arg(&data),
        "--out",
        arg(&ckpt),
    ]);
    Trained {
        _dir: dir,
        data,
        run,
        ckpt,
    }
}

#[test]
fn train_and_eval_are_deterministic() {
    let a = small_trained(SMALL_SPEC, SMALL_RUN);
    let b = small_trained(SMALL_SPEC, SMALL_RUN);
    assert_eq!(hash_tree(&a.ckpt), hash_tree(&b.ckpt));
    let metrics = parse_metrics(&fs::read_to_string(a.ckpt.join("metrics.txt")).unwrap()).unwrap();
    assert_eq!(metrics.len(), 2);
    assert_eq!(metrics[1].epoch, 2);

    let eval = |t: &Trained| {
        ok(&[
            "eval",
            "--config",
            arg(&t.run),
            "--data",
            arg(&t.data),
            "--checkpoint",
            arg(&t.ckpt),
            "--ensemble",
        ])
    };
    let report = eval(&a);
    assert_eq!(report, eval(&b));
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("top1=") && lines[1].starts_with("top1_ensemble="));
}

#[test]
fn degenerate_ensemble_matches_uniform() {
    // one frame per segment leaves the sampler nothing to choose
    let t = small_trained(
        &format!("{SMALL_SPEC}frames_per_segment = 1\n"),
        &format!("{SMALL_RUN}frames_per_segment = 1\n"),
    );
    let base = [
        "eval",
        "--config",
        arg(&t.run),
        "--data",
        arg(&t.data),
        "--checkpoint",
        arg(&t.ckpt),
    ];
    let uniform = ok(&base);
    let with_ensemble = ok(&[&base[..], &["--ensemble"]].concat());
    let top1 = uniform.trim().strip_prefix("top1=").unwrap();
    assert_eq!(with_ensemble, format!("top1={top1}\ntop1_ensemble={top1}\n"));
}

#[test]
fn mismatches_exit_6() {
    let t = small_trained(SMALL_SPEC, SMALL_RUN);
    let dir = tempdir().unwrap();
    let other_spec = dir.path().join("spec.cfg");
    fs::write(&other_spec, SMALL_SPEC.replace("height = 8", "height = 12")).unwrap();
    let other = dir.path().join("other");
    ok(&["gen", "--spec", arg(&other_spec), "--out", arg(&other)]);
    let eval = |run: &std::path::Path, data: &std::path::Path, ckpt: &std::path::Path| {
        code(&[
            "eval",
            "--config",
            arg(run),
            "--data",
            arg(data),
            "--checkpoint",
            arg(ckpt),
        ])
    };
    assert_eq!(eval(&t.run, &t.data, &t.ckpt), 0);
    assert_eq!(eval(&t.run, &other, &t.ckpt), 6);

    let wrong_t = dir.path().join("t4.cfg");
    fs::write(&wrong_t, "T = 4\n").unwrap();
    assert_eq!(eval(&wrong_t, &t.data, &t.ckpt), 6);
    let out = dir.path().join("ck");
    assert_eq!(
        code(&[
            "train",
            "--config",
            arg(&wrong_t),
            "--data",
            arg(&t.data),
            "--out",
            arg(&out)
        ]),
        6
    );

    // truncated parameter vector
    let params = t.ckpt.join("checkpoint.fvt");
    write_container(&params, Tensor::zeros(&[3]).unwrap());
    assert_eq!(eval(&t.run, &t.data, &t.ckpt), 6);

    let unknown = dir.path().join("u.cfg");
    fs::write(&unknown, "batch_size = 4\n").unwrap();
    assert_eq!(eval(&unknown, &t.data, &t.ckpt), 6);
}

#[test]
fn missing_dataset_exits_4() {
    let dir = tempdir().unwrap();
    let nothing = dir.path().join("none");
    assert_eq!(
        code(&["train", "--data", arg(&nothing), "--out", arg(&dir.path().join("c"))]),
        4
    );
}
