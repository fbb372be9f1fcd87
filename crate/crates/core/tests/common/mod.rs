#![allow(dead_code)]

use fdmask::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, dims: &[usize]) -> Tensor {
    Tensor::from_fn(dims, |_| rng.gen_range(-1.0..1.0)).unwrap()
}

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn numeric_gradient(x: &Tensor, h: f64, f: impl Fn(&Tensor) -> f64) -> Tensor {
    let mut probe = x.data().to_vec();
    let mut grad = Vec::with_capacity(probe.len());
    for i in 0..probe.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = f(&Tensor::new(x.dims(), probe.clone()).unwrap());
        probe[i] = orig - h;
        let down = f(&Tensor::new(x.dims(), probe.clone()).unwrap());
        probe[i] = orig;
        grad.push((up - down) / (2.0 * h));
    }
    Tensor::new(x.dims(), grad).unwrap()
}

/// Largest `|a - n|` relative to `max(|a|, |n|, floor)`.
pub fn max_rel_err(a: &Tensor, n: &Tensor, floor: f64) -> f64 {
    assert_eq!(a.dims(), n.dims());
    a.data()
        .iter()
        .zip(n.data())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}
