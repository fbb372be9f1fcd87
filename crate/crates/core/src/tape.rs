//! Reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Tape`] is an append-only list of nodes. Each recorded operation
//! stores its forward value eagerly, so nodes are created in topological
//! order and [`Tape::backward`] is a single reverse sweep that visits every
//! node once. Nodes built only from constants carry no gradient and are
//! skipped by the sweep.

use crate::error::{Error, Result};
use crate::spectral::{self, Spectrum};
use crate::tensor::{self, Axis, Conv3dParams, ReduceOp, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Constant,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Square(Var),
    Scale(Var, f64),
    AddScalar(Var),
    ShiftedReciprocal(Var),
    Tanh(Var),
    Relu(Var),
    Reduce(Var, ReduceOp, Axis),
    Reshape(Var),
    Resize(Var),
    Conv3d(Var, Var, Conv3dParams),
    TemporalPower(Var, Box<Spectrum>),
    MatVec(Var, Var),
    CrossEntropy(Var, usize),
    Detach,
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    dims: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; zeros when `v` does not
    /// influence the loss.
    pub fn wrt(&self, v: Var) -> Tensor {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.dims[v.0]).expect("node dims are valid"),
        }
    }

    pub fn is_reached(&self, v: Var) -> bool {
        self.grads[v.0].is_some()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor, inputs: &[Var]) -> Var {
        let requires_grad = match op {
            Op::Leaf => true,
            Op::Constant | Op::Detach => false,
            _ => inputs.iter().any(|v| self.nodes[v.0].requires_grad),
        };
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// A differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, &[])
    }

    /// An input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Op::Constant, value, &[])
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn dims(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.dims()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(Op::Add(a, b), value, &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        Ok(self.push(Op::Sub(a, b), value, &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).mul(self.value(b))?;
        Ok(self.push(Op::Mul(a, b), value, &[a, b]))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).div(self.value(b))?;
        Ok(self.push(Op::Div(a, b), value, &[a, b]))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let value = self.value(a).square();
        self.push(Op::Square(a), value, &[a])
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).scale(factor);
        self.push(Op::Scale(a, factor), value, &[a])
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|v| v + c);
        self.push(Op::AddScalar(a), value, &[a])
    }

    pub fn shifted_reciprocal(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).shifted_reciprocal()?;
        Ok(self.push(Op::ShiftedReciprocal(a), value, &[a]))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), value, &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| v.max(0.0));
        self.push(Op::Relu(a), value, &[a])
    }

    pub fn reduce(&mut self, a: Var, op: ReduceOp, axis: Axis) -> Result<Var> {
        let value = tensor::reduce(op, self.value(a), axis)?;
        Ok(self.push(Op::Reduce(a, op, axis), value, &[a]))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        self.reduce(a, ReduceOp::Sum, Axis::All)
            .expect("full reduction cannot fail")
    }

    pub fn mean(&mut self, a: Var) -> Var {
        self.reduce(a, ReduceOp::Mean, Axis::All)
            .expect("full reduction cannot fail")
    }

    pub fn reshape(&mut self, a: Var, dims: &[usize]) -> Result<Var> {
        let value = self.value(a).reshape(dims)?;
        Ok(self.push(Op::Reshape(a), value, &[a]))
    }

    pub fn resize_bilinear(&mut self, a: Var, out_h: usize, out_w: usize) -> Result<Var> {
        let value = tensor::resize_bilinear(self.value(a), out_h, out_w)?;
        Ok(self.push(Op::Resize(a), value, &[a]))
    }

    pub fn conv3d(&mut self, input: Var, kernel: Var, params: Conv3dParams) -> Result<Var> {
        let value = tensor::conv3d(self.value(input), self.value(kernel), params)?;
        Ok(self.push(Op::Conv3d(input, kernel, params), value, &[input, kernel]))
    }

    /// `|DFT_t(x)|^2` along axis 0, shaped like `x`.
    pub fn temporal_power(&mut self, x: Var) -> Result<Var> {
        let spectrum = spectral::temporal_dft(self.value(x))?;
        let value = spectral::power(&spectrum);
        Ok(self.push(Op::TemporalPower(x, Box::new(spectrum)), value, &[x]))
    }

    /// `W x` for `W: [m, n]`, `x: [n]`.
    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let (wv, xv) = (self.value(w), self.value(x));
        let (&[m, n], &[nx]) = (wv.dims(), xv.dims()) else {
            return Err(Error::shape("matvec", wv.dims(), xv.dims()));
        };
        if n != nx {
            return Err(Error::shape("matvec", wv.dims(), xv.dims()));
        }
        let out = (0..m)
            .map(|r| {
                wv.data()[r * n..(r + 1) * n]
                    .iter()
                    .zip(xv.data())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        let value = Tensor::new(&[m], out)?;
        Ok(self.push(Op::MatVec(w, x), value, &[w, x]))
    }

    /// `-log softmax(logits)[label]` for a rank-1 `logits`.
    pub fn cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var> {
        let lv = self.value(logits);
        if lv.rank() != 1 {
            return Err(Error::arg(format!("logits must be rank 1, got {:?}", lv.dims())));
        }
        if label >= lv.len() {
            return Err(Error::arg(format!(
                "label {label} out of range for {} classes",
                lv.len()
            )));
        }
        let value = Tensor::scalar(-log_softmax(lv.data())[label]);
        Ok(self.push(Op::CrossEntropy(logits, label), value, &[logits]))
    }

    /// Same value as `a`, but gradients stop here.
    pub fn detach(&mut self, a: Var) -> Var {
        let value = self.value(a).clone();
        self.push(Op::Detach, value, &[a])
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got dims {:?}",
                lv.dims()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(Tensor::new(lv.dims(), vec![1.0])?);
        }
        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else {
                continue;
            };
            self.propagate(id, &g, &mut grads)?;
            grads[id] = Some(g);
        }
        grads.resize(self.nodes.len(), None);
        Ok(Gradients {
            grads,
            dims: self.nodes.iter().map(|n| n.value.dims().to_vec()).collect(),
        })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) -> Result<()> {
        if !self.nodes[v.0].requires_grad {
            return Ok(());
        }
        debug_assert_eq!(g.dims(), self.dims(v));
        grads[v.0] = Some(match grads[v.0].take() {
            Some(acc) => acc.add(&g)?,
            None => g,
        });
        Ok(())
    }

    fn propagate(&self, id: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let node = &self.nodes[id];
        let reduce_to = |v: Var, t: Tensor| tensor::sum_to_shape(&t, self.dims(v));
        match node.op {
            Op::Leaf | Op::Constant | Op::Detach => {}
            Op::Add(a, b) => {
                self.accumulate(grads, a, reduce_to(a, g.clone()))?;
                self.accumulate(grads, b, reduce_to(b, g.clone()))?;
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, a, reduce_to(a, g.clone()))?;
                self.accumulate(grads, b, reduce_to(b, g.scale(-1.0)))?;
            }
            Op::Mul(a, b) => {
                if self.requires_grad(a) {
                    self.accumulate(grads, a, reduce_to(a, g.mul(self.value(b))?))?;
                }
                if self.requires_grad(b) {
                    self.accumulate(grads, b, reduce_to(b, g.mul(self.value(a))?))?;
                }
            }
            Op::Div(a, b) => {
                let bv = self.value(b);
                if self.requires_grad(a) {
                    self.accumulate(grads, a, reduce_to(a, g.div(bv)?))?;
                }
                if self.requires_grad(b) {
                    // d(a/b)/db = -out / b
                    let gb = g.mul(&node.value)?.div(bv)?.scale(-1.0);
                    self.accumulate(grads, b, reduce_to(b, gb))?;
                }
            }
            Op::Square(a) => {
                let ga = g.mul(&self.value(a).scale(2.0))?;
                self.accumulate(grads, a, ga)?;
            }
            Op::Scale(a, f) => self.accumulate(grads, a, g.scale(f))?,
            Op::AddScalar(a) => self.accumulate(grads, a, g.clone())?,
            Op::ShiftedReciprocal(a) => {
                // d/dx 1/(1+x) = -1/(1+x)^2 = -out^2
                let ga = g.mul(&node.value.map(|y| -y * y))?;
                self.accumulate(grads, a, ga)?;
            }
            Op::Tanh(a) => {
                let ga = g.mul(&node.value.map(|y| 1.0 - y * y))?;
                self.accumulate(grads, a, ga)?;
            }
            Op::Relu(a) => {
                let mask = self.value(a).map(|x| if x > 0.0 { 1.0 } else { 0.0 });
                self.accumulate(grads, a, g.mul(&mask)?)?;
            }
            Op::Reduce(a, op, axis) => {
                let input_dims = self.dims(a);
                let ga = match axis {
                    Axis::All => {
                        let n = self.value(a).len() as f64;
                        let s = g.item().expect("full reduction is scalar");
                        let fill = if op == ReduceOp::Mean { s / n } else { s };
                        Tensor::full(input_dims, fill)?
                    }
                    Axis::Index(ax) => {
                        let extent = input_dims[ax];
                        let scale = if op == ReduceOp::Mean { 1.0 / extent as f64 } else { 1.0 };
                        tensor::expand_axis(g, ax, extent, scale)
                    }
                };
                self.accumulate(grads, a, ga)?;
            }
            Op::Reshape(a) => {
                let ga = g.reshape(self.dims(a))?;
                self.accumulate(grads, a, ga)?;
            }
            Op::Resize(a) => {
                let d = self.dims(a);
                let ga = tensor::resize_bilinear_adjoint(g, d[0], d[1]);
                self.accumulate(grads, a, ga)?;
            }
            Op::Conv3d(input, kernel, params) => {
                let (gi, gk) = tensor::conv3d_adjoint(
                    self.value(input),
                    self.value(kernel),
                    g,
                    params,
                    self.requires_grad(input),
                    self.requires_grad(kernel),
                )?;
                if let Some(gi) = gi {
                    self.accumulate(grads, input, gi)?;
                }
                if let Some(gk) = gk {
                    self.accumulate(grads, kernel, gk)?;
                }
            }
            Op::TemporalPower(x, ref spectrum) => {
                let gx = spectral::temporal_power_adjoint(spectrum, g)?;
                self.accumulate(grads, x, gx)?;
            }
            Op::MatVec(w, x) => {
                let (wv, xv) = (self.value(w), self.value(x));
                let (m, n) = (wv.dims()[0], wv.dims()[1]);
                if self.requires_grad(w) {
                    let gw = Tensor::from_fn(&[m, n], |i| g.data()[i[0]] * xv.data()[i[1]])?;
                    self.accumulate(grads, w, gw)?;
                }
                if self.requires_grad(x) {
                    let gx = (0..n)
                        .map(|c| (0..m).map(|r| wv.data()[r * n + c] * g.data()[r]).sum())
                        .collect();
                    self.accumulate(grads, x, Tensor::new(&[n], gx)?)?;
                }
            }
            Op::CrossEntropy(logits, label) => {
                let s = g.item().expect("cross entropy is scalar");
                let probs = softmax(self.value(logits).data());
                let gl = probs
                    .iter()
                    .enumerate()
                    .map(|(i, p)| s * (p - if i == label { 1.0 } else { 0.0 }))
                    .collect();
                self.accumulate(grads, logits, Tensor::new(&[probs.len()], gl)?)?;
            }
        }
        Ok(())
    }
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    logits.iter().map(|v| v - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}
