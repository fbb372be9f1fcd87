mod common;

use fdmask::tensor::{Axis, Conv3dParams, ReduceOp};
use fdmask::{Tape, Tensor, Var};

type Build = dyn Fn(&mut Tape, &[Var]) -> Var;

/// Checks d/dx_i sum(w * f(x)) against central differences for every input.
fn check(inputs: &[Tensor], build: &Build, tol: f64) {
    let mut rng = common::rng(99);
    let eval = |xs: &[Tensor]| -> Tensor {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.constant(x.clone())).collect();
        let out = build(&mut tape, &vars);
        tape.value(out).clone()
    };
    let w = common::random_tensor(&mut rng, eval(inputs).dims());
    let objective = |xs: &[Tensor]| -> f64 { eval(xs).mul(&w).unwrap().sum_all() };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone())).collect();
    let out = build(&mut tape, &vars);
    let wv = tape.constant(w.clone());
    let prod = tape.mul(out, wv).unwrap();
    let loss = tape.sum(prod);
    let grads = tape.backward(loss).unwrap();

    for (i, x) in inputs.iter().enumerate() {
        let numeric = common::numeric_gradient(x, 1e-6, |xi| {
            let mut xs = inputs.to_vec();
            xs[i] = xi.clone();
            objective(&xs)
        });
        let analytic = grads.wrt(vars[i]);
        let err = common::max_rel_err(&analytic, &numeric, 1e-3);
        assert!(err < tol, "input {i}: relative error {err:e}");
    }
}

fn rand(seed: u64, dims: &[usize]) -> Tensor {
    common::random_tensor(&mut common::rng(seed), dims)
}

#[test]
fn binary_ops_with_broadcasting() {
    let a = rand(1, &[3, 4]);
    let b = rand(2, &[1, 4]);
    check(&[a.clone(), b.clone()], &|t, v| t.add(v[0], v[1]).unwrap(), 1e-7);
    check(&[a.clone(), b.clone()], &|t, v| t.sub(v[0], v[1]).unwrap(), 1e-7);
    check(&[a.clone(), b.clone()], &|t, v| t.mul(v[0], v[1]).unwrap(), 1e-7);
    let denom = b.map(|v| v.abs() + 0.5);
    check(&[a, denom], &|t, v| t.div(v[0], v[1]).unwrap(), 1e-6);
}

#[test]
fn unary_ops() {
    let x = rand(3, &[2, 3, 2]);
    check(std::slice::from_ref(&x), &|t, v| t.square(v[0]), 1e-7);
    check(std::slice::from_ref(&x), &|t, v| t.scale(v[0], -1.75), 1e-7);
    check(std::slice::from_ref(&x), &|t, v| t.add_scalar(v[0], 3.0), 1e-7);
    check(std::slice::from_ref(&x), &|t, v| t.tanh(v[0]), 1e-7);
    let pos = x.map(|v| v.abs() + 0.1);
    check(
        std::slice::from_ref(&pos),
        &|t, v| t.shifted_reciprocal(v[0]).unwrap(),
        1e-6,
    );
    // keep clear of the kink
    let away = x.map(|v| if v.abs() < 0.05 { 0.3 } else { v });
    check(&[away], &|t, v| t.relu(v[0]), 1e-7);
}

#[test]
fn reductions_and_reshape() {
    let x = rand(4, &[3, 2, 4]);
    for axis in 0..3 {
        check(
            std::slice::from_ref(&x),
            &move |t, v| t.reduce(v[0], ReduceOp::Sum, Axis::Index(axis)).unwrap(),
            1e-7,
        );
        check(
            std::slice::from_ref(&x),
            &move |t, v| t.reduce(v[0], ReduceOp::Mean, Axis::Index(axis)).unwrap(),
            1e-7,
        );
    }
    check(std::slice::from_ref(&x), &|t, v| t.mean(v[0]), 1e-7);
    check(&[x], &|t, v| t.reshape(v[0], &[6, 4]).unwrap(), 1e-7);
}

#[test]
fn resize_both_directions() {
    check(
        &[rand(5, &[6, 5])],
        &|t, v| t.resize_bilinear(v[0], 3, 4).unwrap(),
        1e-6,
    );
    check(
        &[rand(6, &[3, 3])],
        &|t, v| t.resize_bilinear(v[0], 7, 5).unwrap(),
        1e-6,
    );
}

#[test]
fn conv3d_input_and_kernel() {
    let x = rand(7, &[4, 2, 5, 5]);
    let k = rand(8, &[3, 2, 3, 3, 3]);
    let p = Conv3dParams {
        stride: [1, 2, 2],
        padding: [1, 1, 1],
    };
    check(&[x, k], &move |t, v| t.conv3d(v[0], v[1], p).unwrap(), 1e-6);
}

#[test]
fn temporal_power_gradient() {
    for frames in [4, 5, 8] {
        check(
            &[rand(9, &[frames, 2, 2, 2])],
            &|t, v| t.temporal_power(v[0]).unwrap(),
            1e-5,
        );
    }
}

#[test]
fn matvec_and_cross_entropy() {
    let w = rand(10, &[3, 5]);
    let x = rand(11, &[5]);
    check(&[w, x], &|t, v| t.matvec(v[0], v[1]).unwrap(), 1e-7);
    for label in 0..4 {
        check(
            &[rand(12, &[4])],
            &move |t, v| t.cross_entropy(v[0], label).unwrap(),
            1e-6,
        );
    }
}

#[test]
fn cross_entropy_value_is_negative_log_softmax() {
    let logits = Tensor::from_vec(vec![1.0, 2.0, 0.5]);
    let mut tape = Tape::new();
    let l = tape.constant(logits.clone());
    let ce = tape.cross_entropy(l, 1).unwrap();
    let z: f64 = logits.data().iter().map(|v| v.exp()).sum();
    let want = -(2.0f64.exp() / z).ln();
    assert!((tape.value(ce).item().unwrap() - want).abs() < 1e-14);
    assert!(tape.cross_entropy(l, 3).is_err());
}

#[test]
fn detach_blocks_gradient() {
    let mut tape = Tape::new();
    let x = tape.leaf(rand(13, &[3]));
    let d = tape.detach(x);
    let y = tape.mul(d, x).unwrap();
    let loss = tape.sum(y);
    let g = tape.backward(loss).unwrap();
    // only the non-detached path contributes: d/dx sum(c * x) = c
    assert!(g.wrt(x).max_abs_diff(tape.value(x)).unwrap() < 1e-15);
}

#[test]
fn backward_is_linear_in_the_loss() {
    let x = rand(14, &[4, 3]);
    let grads_of = |a: f64, b: f64| -> Tensor {
        let mut tape = Tape::new();
        let v = tape.leaf(x.clone());
        let sq = tape.square(v);
        let f = tape.sum(sq);
        let th = tape.tanh(v);
        let g = tape.mean(th);
        let fa = tape.scale(f, a);
        let gb = tape.scale(g, b);
        let loss = tape.add(fa, gb).unwrap();
        tape.backward(loss).unwrap().wrt(v)
    };
    let combo = grads_of(2.0, -3.0);
    let expect = grads_of(1.0, 0.0)
        .scale(2.0)
        .add(&grads_of(0.0, 1.0).scale(-3.0))
        .unwrap();
    assert!(combo.max_abs_diff(&expect).unwrap() < 1e-14);
}

#[test]
fn shared_subexpressions_accumulate() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::from_vec(vec![1.5, -2.0]));
    let y = tape.mul(x, x).unwrap();
    let z = tape.add(y, x).unwrap();
    let loss = tape.sum(z);
    let g = tape.backward(loss).unwrap().wrt(x);
    assert_eq!(g.data(), &[4.0, -3.0]);
}

#[test]
fn non_scalar_loss_and_unreached_nodes() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::from_vec(vec![1.0, 2.0]));
    let unused = tape.leaf(Tensor::from_vec(vec![5.0]));
    assert!(tape.backward(x).is_err());
    let loss = tape.sum(x);
    let g = tape.backward(loss).unwrap();
    assert!(!g.is_reached(unused));
    assert_eq!(g.wrt(unused).data(), &[0.0]);
}
