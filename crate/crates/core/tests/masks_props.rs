mod common;

use std::f64::consts::PI;

use fdmask::masks::{apply_mask, combined_mask, dynamic_mask, static_mask};
use fdmask::Tensor;
use proptest::prelude::*;

/// Per-location sum over bins of |X_k|^2 g(f_k), from the DFT definition.
fn mask_oracle(x: &Tensor, g: impl Fn(f64) -> f64) -> Vec<f64> {
    let t = x.dims()[0];
    let inner = x.len() / t;
    (0..inner)
        .map(|pos| {
            (0..t)
                .map(|k| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for n in 0..t {
                        let a = -2.0 * PI * ((k * n) % t) as f64 / t as f64;
                        re += x.data()[n * inner + pos] * a.cos();
                        im += x.data()[n * inner + pos] * a.sin();
                    }
                    let f = k.min(t - k) as f64 / t as f64;
                    (re * re + im * im) * g(f)
                })
                .sum()
        })
        .collect()
}

fn close(a: &[f64], b: &[f64], rel: f64) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - y).abs() <= rel * x.abs().max(y.abs()).max(1e-12))
}

#[test]
fn masks_match_definition() {
    let mut rng = common::rng(31);
    for t in [2, 5, 8, 12] {
        let x = common::random_tensor(&mut rng, &[t, 2, 3, 3]);
        let d = dynamic_mask(&x).unwrap();
        let s = static_mask(&x).unwrap();
        let c = combined_mask(&x, false).unwrap();
        assert_eq!(d.values().dims(), &[2, 3, 3]);
        let want_d = mask_oracle(&x, |f| f * f);
        let want_s = mask_oracle(&x, |f| 1.0 / (1.0 + f * f));
        let want_c: Vec<f64> = want_d.iter().zip(&want_s).map(|(a, b)| a + b).collect();
        assert!(close(d.values().data(), &want_d, 1e-10));
        assert!(close(s.values().data(), &want_s, 1e-10));
        assert!(close(c.values().data(), &want_c, 1e-10));
    }
}

#[test]
fn closed_forms_for_t8() {
    let c = 0.6;
    let x = Tensor::full(&[8, 1, 2, 2], c).unwrap();
    assert!(dynamic_mask(&x).unwrap().values().max_abs() <= 1e-12);
    for &v in static_mask(&x).unwrap().values().data() {
        assert!((v - 64.0 * c * c).abs() <= 1e-9 * 64.0 * c * c);
    }
    // +1, -1, +1, ... puts all energy (T^2 = 64) in the Nyquist bin, f = 1/2
    let alt = Tensor::from_fn(&[8, 1, 1, 1], |i| if i[0] % 2 == 0 { 1.0 } else { -1.0 }).unwrap();
    let d = dynamic_mask(&alt).unwrap().values().data()[0];
    let s = static_mask(&alt).unwrap().values().data()[0];
    assert!((d - 16.0).abs() <= 1e-9 * 16.0);
    assert!((s - 51.2).abs() <= 1e-9 * 51.2);
}

#[test]
fn masked_features_scale_per_location() {
    let mut rng = common::rng(32);
    let x = common::random_tensor(&mut rng, &[4, 2, 3, 3]);
    let m = combined_mask(&x, true).unwrap();
    let y = apply_mask(&m, &x).unwrap();
    for t in 0..4 {
        for c in 0..2 {
            for h in 0..3 {
                for w in 0..3 {
                    assert_eq!(y.at(&[t, c, h, w]), x.at(&[t, c, h, w]) * m.values().at(&[c, h, w]));
                }
            }
        }
    }
    let wrong = Tensor::zeros(&[4, 2, 3, 4]).unwrap();
    assert!(apply_mask(&m, &wrong).is_err());
}

fn volume() -> impl Strategy<Value = Tensor> {
    (1usize..9, 1usize..3, 1usize..4, 1usize..4, any::<u64>())
        .prop_map(|(t, c, h, w, seed)| common::random_tensor(&mut common::rng(seed), &[t, c, h, w]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn masks_scale_quadratically(x in volume(), a in 0.1f64..4.0) {
        let xa = x.scale(a);
        for (m, ma) in [
            (dynamic_mask(&x).unwrap(), dynamic_mask(&xa).unwrap()),
            (static_mask(&x).unwrap(), static_mask(&xa).unwrap()),
            (combined_mask(&x, false).unwrap(), combined_mask(&xa, false).unwrap()),
        ] {
            let want: Vec<f64> = m.values().data().iter().map(|v| v * a * a).collect();
            prop_assert!(close(ma.values().data(), &want, 1e-9));
        }
    }

    #[test]
    fn masks_ignore_circular_time_shift(x in volume(), shift in 0usize..8) {
        let t = x.dims()[0];
        let order: Vec<usize> = (0..t).map(|i| (i + shift) % t).collect();
        let shifted = x.select_axis0(&order).unwrap();
        let a = combined_mask(&x, false).unwrap();
        let b = combined_mask(&shifted, false).unwrap();
        prop_assert!(close(a.values().data(), b.values().data(), 1e-9));
    }

    #[test]
    fn normalized_mask_has_unit_mean(x in volume()) {
        let m = combined_mask(&x, true).unwrap();
        prop_assert!((m.mean() - 1.0).abs() < 1e-6);
        prop_assert!(m.values().data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn time_constant_volumes_have_no_dynamic_energy(
        t in 1usize..17, frame in prop::collection::vec(-3.0f64..3.0, 4)
    ) {
        let x = Tensor::from_fn(&[t, 1, 2, 2], |i| frame[i[2] * 2 + i[3]]).unwrap();
        prop_assert!(dynamic_mask(&x).unwrap().values().max_abs() <= 1e-12);
    }
}
