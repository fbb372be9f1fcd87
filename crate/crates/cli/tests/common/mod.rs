#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fdmask::Tensor;
use fdmask_cli::commands::frame_path;
use fdmask_cli::container::{self, Container};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn fdmask(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdmask"))
        .args(args)
        .output()
        .expect("spawn fdmask")
}

pub fn arg(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Runs `args` and panics with stderr unless it exits 0.
pub fn ok(args: &[&str]) -> String {
    let o = fdmask(args);
    assert!(
        o.status.success(),
        "fdmask {args:?} exited {:?}: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

pub fn code(args: &[&str]) -> i32 {
    fdmask(args).status.code().expect("exit code")
}

/// SHA-256 over every file below `dir`, keyed by relative path.
pub fn hash_tree(dir: &Path) -> String {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    let mut files = Vec::new();
    walk(dir, dir, &mut files);
    files.sort();
    let mut h = Sha256::new();
    for (p, bytes) in files {
        h.update(p.to_string_lossy().as_bytes());
        h.update([0]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    format!("{:x}", h.finalize())
}

pub fn write_container(path: &Path, t: Tensor) {
    container::write(path, &Container::f64(t)).unwrap();
}

pub fn write_frames(dir: &Path, frames: &[Tensor]) {
    fs::create_dir_all(dir).unwrap();
    for (i, f) in frames.iter().enumerate() {
        write_container(&frame_path(dir, i), f.clone());
    }
}

pub struct Burst {
    pub frames: Vec<Tensor>,
    pub planted: usize,
}

/// 32 near-static 8x8 frames (T = 8, four per segment) with a bright 3x3
/// patch in one frame of segment 2.
pub fn burst_fixture(seed: u64) -> Burst {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (t, s, h, w) = (8, 4, 8, 8);
    let background: Vec<f64> = (0..h * w).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut frames: Vec<Tensor> = (0..t * s)
        .map(|_| {
            let data = background.iter().map(|b| b + 0.01 * rng.gen_range(-1.0..1.0)).collect();
            Tensor::new(&[1, h, w], data).unwrap()
        })
        .collect();
    let planted = s + rng.gen_range(0..s);
    let (r0, c0) = (rng.gen_range(0..h - 3), rng.gen_range(0..w - 3));
    let amp = rng.gen_range(1.0..2.0);
    let base = frames[planted].clone();
    frames[planted] = Tensor::from_fn(&[1, h, w], |i| {
        let inside = (r0..r0 + 3).contains(&i[1]) && (c0..c0 + 3).contains(&i[2]);
        base.at(i) + if inside { amp } else { 0.0 }
    })
    .unwrap();
    Burst { frames, planted }
}

pub const SMALL_SPEC: &str = "num_train = 8\nnum_eval = 4\nheight = 8\nwidth = 8\nseed = 3\n";
pub const SMALL_RUN: &str = "epochs = 2\nseed = 1\n";
