//! Dense row-major arrays of `f64` and `Complex64` with trailing-aligned
//! broadcasting, reductions, corner-aligned bilinear resizing and 3D
//! cross-correlation.
//!
//! Every kernel here is eager and allocation-returning. The differentiable
//! versions in [`crate::tape`] call into these and add their adjoints.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ElementwiseOp {
    Add,
    Sub,
    Mul,
    Div,
    Square,
    Scale(f64),
    /// `1 / (1 + x)`.
    ShiftedReciprocal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Mean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    All,
    Index(usize),
}

fn element_count(dims: &[usize]) -> Result<usize> {
    dims.iter().try_fold(1usize, |acc, &d| {
        if d == 0 {
            return Err(Error::arg(format!("zero extent in dims {dims:?}")));
        }
        acc.checked_mul(d)
            .ok_or_else(|| Error::arg(format!("element count overflows for dims {dims:?}")))
    })
}

impl Tensor {
    pub fn new(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        let n = element_count(dims)?;
        if n != data.len() {
            return Err(Error::arg(format!(
                "dims {dims:?} need {n} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        assert!(!data.is_empty(), "Tensor::from_vec needs at least one element");
        Tensor {
            dims: vec![data.len()],
            data,
        }
    }

    /// Rank-0 tensor holding one value.
    pub fn scalar(value: f64) -> Self {
        Tensor {
            dims: Vec::new(),
            data: vec![value],
        }
    }

    pub fn full(dims: &[usize], value: f64) -> Result<Self> {
        let n = element_count(dims)?;
        Ok(Tensor {
            dims: dims.to_vec(),
            data: vec![value; n],
        })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::full(dims, 0.0)
    }

    pub fn ones(dims: &[usize]) -> Result<Self> {
        Self::full(dims, 1.0)
    }

    /// Builds a tensor by evaluating `f` at every multi-index in row-major order.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let n = element_count(dims)?;
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..n {
            data.push(f(&idx));
            increment(&mut idx, dims);
        }
        Ok(Tensor {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Option<f64> {
        (self.data.len() == 1).then(|| self.data[0])
    }

    pub fn at(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    fn offset(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), self.dims.len(), "index rank mismatch");
        idx.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| {
            assert!(i < d, "index {idx:?} out of bounds for {:?}", self.dims);
            acc * d + i
        })
    }

    pub fn reshape(&self, dims: &[usize]) -> Result<Tensor> {
        let n = element_count(dims)?;
        if n != self.len() {
            return Err(Error::shape("reshape", &self.dims, dims));
        }
        Ok(Tensor {
            dims: dims.to_vec(),
            data: self.data.clone(),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::shape("max_abs_diff", &self.dims, &other.dims));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        broadcast_zip("add", self, other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        broadcast_zip("sub", self, other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        broadcast_zip("mul", self, other, |a, b| a * b)
    }

    pub fn div(&self, other: &Tensor) -> Result<Tensor> {
        if other.data.contains(&0.0) {
            return Err(Error::arg("division by zero"));
        }
        broadcast_zip("div", self, other, |a, b| a / b)
    }

    pub fn square(&self) -> Tensor {
        self.map(|v| v * v)
    }

    pub fn scale(&self, factor: f64) -> Tensor {
        self.map(|v| v * factor)
    }

    pub fn shifted_reciprocal(&self) -> Result<Tensor> {
        if self.data.iter().any(|&v| 1.0 + v == 0.0) {
            return Err(Error::arg("shifted_reciprocal is singular at -1"));
        }
        Ok(self.map(|v| 1.0 / (1.0 + v)))
    }

    pub fn sum_all(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean_all(&self) -> f64 {
        self.sum_all() / self.len() as f64
    }

    pub fn reduce(&self, op: ReduceOp, axis: Axis) -> Result<Tensor> {
        reduce(op, self, axis)
    }

    /// Slice `[i, ...]` along the leading axis, dropping it.
    pub fn index_axis0(&self, i: usize) -> Result<Tensor> {
        let (&lead, rest) = self
            .dims
            .split_first()
            .ok_or_else(|| Error::arg("index_axis0 on a rank-0 tensor"))?;
        if i >= lead {
            return Err(Error::arg(format!("index {i} out of range for leading extent {lead}")));
        }
        let inner: usize = rest.iter().product();
        Ok(Tensor {
            dims: rest.to_vec(),
            data: self.data[i * inner..(i + 1) * inner].to_vec(),
        })
    }

    /// Gathers leading-axis slices in the given order.
    pub fn select_axis0(&self, indices: &[usize]) -> Result<Tensor> {
        let slices = indices
            .iter()
            .map(|&i| self.index_axis0(i))
            .collect::<Result<Vec<_>>>()?;
        stack(&slices)
    }
}

/// Stacks equally-shaped tensors along a new leading axis.
pub fn stack(items: &[Tensor]) -> Result<Tensor> {
    let first = items.first().ok_or_else(|| Error::arg("stack of zero tensors"))?;
    let mut data = Vec::with_capacity(first.len() * items.len());
    for t in items {
        if t.dims != first.dims {
            return Err(Error::shape("stack", &first.dims, &t.dims));
        }
        data.extend_from_slice(&t.data);
    }
    let mut dims = vec![items.len()];
    dims.extend_from_slice(&first.dims);
    Tensor::new(&dims, data)
}

fn increment(idx: &mut [usize], dims: &[usize]) {
    for axis in (0..dims.len()).rev() {
        idx[axis] += 1;
        if idx[axis] < dims[axis] {
            return;
        }
        idx[axis] = 0;
    }
}

/// Result shape of broadcasting `a` against `b` with trailing alignment.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i < rank - a.len() { 1 } else { a[i - (rank - a.len())] };
        let db = if i < rank - b.len() { 1 } else { b[i - (rank - b.len())] };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return Err(Error::shape("broadcast", a, b)),
        };
    }
    Ok(out)
}

/// For each element of a tensor of shape `out`, the flat offset of the
/// element of `src` it reads under broadcasting.
pub(crate) fn broadcast_offsets(src: &[usize], out: &[usize]) -> Vec<usize> {
    debug_assert!(src.len() <= out.len());
    let lead = out.len() - src.len();
    let mut strides = vec![0usize; out.len()];
    let mut stride = 1;
    for i in (0..src.len()).rev() {
        strides[lead + i] = if src[i] == 1 { 0 } else { stride };
        stride *= src[i];
    }
    let n: usize = out.iter().product();
    let mut offsets = Vec::with_capacity(n);
    let mut idx = vec![0usize; out.len()];
    let mut off = 0usize;
    for _ in 0..n {
        offsets.push(off);
        for axis in (0..out.len()).rev() {
            idx[axis] += 1;
            off += strides[axis];
            if idx[axis] < out[axis] {
                break;
            }
            off -= strides[axis] * out[axis];
            idx[axis] = 0;
        }
    }
    offsets
}

fn broadcast_zip(op: &'static str, a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    if a.dims == b.dims {
        let data = a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect();
        return Ok(Tensor {
            dims: a.dims.clone(),
            data,
        });
    }
    let dims = broadcast_shape(&a.dims, &b.dims).map_err(|_| Error::shape(op, &a.dims, &b.dims))?;
    let oa = broadcast_offsets(&a.dims, &dims);
    let ob = broadcast_offsets(&b.dims, &dims);
    let data = oa.iter().zip(&ob).map(|(&i, &j)| f(a.data[i], b.data[j])).collect();
    Ok(Tensor { dims, data })
}

/// Sums `grad` (shaped like a broadcast result) back down to `shape`.
pub(crate) fn sum_to_shape(grad: &Tensor, shape: &[usize]) -> Tensor {
    if grad.dims == shape {
        return grad.clone();
    }
    let n: usize = shape.iter().product();
    let mut data = vec![0.0; n];
    for (g, off) in grad.data.iter().zip(broadcast_offsets(shape, &grad.dims)) {
        data[off] += g;
    }
    Tensor {
        dims: shape.to_vec(),
        data,
    }
}

/// Pointwise operation with broadcasting; binary ops require `b`.
pub fn elementwise(op: ElementwiseOp, a: &Tensor, b: Option<&Tensor>) -> Result<Tensor> {
    let need_b = || b.ok_or_else(|| Error::arg(format!("{op:?} needs a second operand")));
    match op {
        ElementwiseOp::Add => a.add(need_b()?),
        ElementwiseOp::Sub => a.sub(need_b()?),
        ElementwiseOp::Mul => a.mul(need_b()?),
        ElementwiseOp::Div => a.div(need_b()?),
        ElementwiseOp::Square => Ok(a.square()),
        ElementwiseOp::Scale(f) => Ok(a.scale(f)),
        ElementwiseOp::ShiftedReciprocal => a.shifted_reciprocal(),
    }
}

pub fn reduce(op: ReduceOp, a: &Tensor, axis: Axis) -> Result<Tensor> {
    match axis {
        Axis::All => {
            let s = a.sum_all();
            Ok(Tensor::scalar(match op {
                ReduceOp::Sum => s,
                ReduceOp::Mean => s / a.len() as f64,
            }))
        }
        Axis::Index(ax) => {
            if ax >= a.rank() {
                return Err(Error::Index {
                    axis: ax,
                    rank: a.rank(),
                });
            }
            let outer: usize = a.dims[..ax].iter().product();
            let extent = a.dims[ax];
            let inner: usize = a.dims[ax + 1..].iter().product();
            let mut data = vec![0.0; outer * inner];
            for o in 0..outer {
                for e in 0..extent {
                    let src = &a.data[(o * extent + e) * inner..(o * extent + e + 1) * inner];
                    for (d, s) in data[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
            if op == ReduceOp::Mean {
                let scale = 1.0 / extent as f64;
                data.iter_mut().for_each(|v| *v *= scale);
            }
            let mut dims = a.dims.clone();
            dims.remove(ax);
            Ok(Tensor { dims, data })
        }
    }
}

/// Inverse of an axis reduction for gradients: repeats `grad` along a new axis.
pub(crate) fn expand_axis(grad: &Tensor, axis: usize, extent: usize, scale: f64) -> Tensor {
    let outer: usize = grad.dims[..axis].iter().product();
    let inner: usize = grad.dims[axis..].iter().product();
    let mut data = Vec::with_capacity(outer * extent * inner);
    for o in 0..outer {
        let row = &grad.data[o * inner..(o + 1) * inner];
        for _ in 0..extent {
            data.extend(row.iter().map(|v| v * scale));
        }
    }
    let mut dims = grad.dims.clone();
    dims.insert(axis, extent);
    Tensor { dims, data }
}

/// Source coordinates and blend factor for one output position of a
/// corner-aligned linear resample.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LerpTap {
    pub lo: usize,
    pub hi: usize,
    pub frac: f64,
}

pub(crate) fn lerp_taps(input: usize, output: usize) -> Vec<LerpTap> {
    (0..output)
        .map(|i| {
            if output == 1 || input == 1 {
                return LerpTap {
                    lo: 0,
                    hi: 0,
                    frac: 0.0,
                };
            }
            let src = i as f64 * (input - 1) as f64 / (output - 1) as f64;
            let lo = (src.floor() as usize).min(input - 1);
            let hi = (lo + 1).min(input - 1);
            LerpTap {
                lo,
                hi,
                frac: src - lo as f64,
            }
        })
        .collect()
}

/// Corner-aligned bilinear resize of a `[H, W]` map.
pub fn resize_bilinear(a: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::arg(format!("resize target {out_h}x{out_w} must be positive")));
    }
    let [h, w] = a.dims[..] else {
        return Err(Error::arg(format!("resize_bilinear expects [H, W], got {:?}", a.dims)));
    };
    if (h, w) == (out_h, out_w) {
        return Ok(a.clone());
    }
    let rows = lerp_taps(h, out_h);
    let cols = lerp_taps(w, out_w);
    let mut data = Vec::with_capacity(out_h * out_w);
    for r in &rows {
        for c in &cols {
            let v00 = a.data[r.lo * w + c.lo];
            let v01 = a.data[r.lo * w + c.hi];
            let v10 = a.data[r.hi * w + c.lo];
            let v11 = a.data[r.hi * w + c.hi];
            let top = v00 + (v01 - v00) * c.frac;
            let bottom = v10 + (v11 - v10) * c.frac;
            data.push(top + (bottom - top) * r.frac);
        }
    }
    Tensor::new(&[out_h, out_w], data)
}

/// Adjoint of [`resize_bilinear`]: scatters an `[out_h, out_w]` gradient
/// back onto the `[h, w]` source grid.
pub(crate) fn resize_bilinear_adjoint(grad: &Tensor, h: usize, w: usize) -> Tensor {
    let (out_h, out_w) = (grad.dims[0], grad.dims[1]);
    if (h, w) == (out_h, out_w) {
        return grad.clone();
    }
    let rows = lerp_taps(h, out_h);
    let cols = lerp_taps(w, out_w);
    let mut data = vec![0.0; h * w];
    for (i, r) in rows.iter().enumerate() {
        for (j, c) in cols.iter().enumerate() {
            let g = grad.data[i * out_w + j];
            let (gr0, gr1) = (g * (1.0 - r.frac), g * r.frac);
            data[r.lo * w + c.lo] += gr0 * (1.0 - c.frac);
            data[r.lo * w + c.hi] += gr0 * c.frac;
            data[r.hi * w + c.lo] += gr1 * (1.0 - c.frac);
            data[r.hi * w + c.hi] += gr1 * c.frac;
        }
    }
    Tensor { dims: vec![h, w], data }
}

/// Per-axis stride and zero padding for [`conv3d`], ordered (time, height, width).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv3dParams {
    pub stride: [usize; 3],
    pub padding: [usize; 3],
}

impl Default for Conv3dParams {
    fn default() -> Self {
        Conv3dParams {
            stride: [1; 3],
            padding: [0; 3],
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct ConvGeometry {
    input: [usize; 4],  // T, C, H, W
    kernel: [usize; 5], // K, C, kt, kh, kw
    output: [usize; 4], // T', K, H', W'
    stride: [usize; 3],
    padding: [usize; 3],
}

impl ConvGeometry {
    fn new(input: &[usize], kernel: &[usize], p: Conv3dParams) -> Result<Self> {
        let (&[t, c, h, w], &[k, kc, kt, kh, kw]) = (input, kernel) else {
            return Err(Error::shape("conv3d", input, kernel));
        };
        if c != kc {
            return Err(Error::shape("conv3d", input, kernel));
        }
        if p.stride.contains(&0) {
            return Err(Error::arg("conv3d stride must be positive"));
        }
        let out = |n: usize, pad: usize, k: usize, s: usize| -> Result<usize> {
            let padded = n + 2 * pad;
            if k > padded {
                return Err(Error::shape("conv3d", input, kernel));
            }
            Ok((padded - k) / s + 1)
        };
        Ok(ConvGeometry {
            input: [t, c, h, w],
            kernel: [k, c, kt, kh, kw],
            output: [
                out(t, p.padding[0], kt, p.stride[0])?,
                k,
                out(h, p.padding[1], kh, p.stride[1])?,
                out(w, p.padding[2], kw, p.stride[2])?,
            ],
            stride: p.stride,
            padding: p.padding,
        })
    }

    /// Visits every (output position, input position, kernel tap) triple as
    /// flat offsets `(out, inp, ker)`, with the inner loop running along width.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        let [t_in, c_in, h_in, w_in] = self.input;
        let [k_out, _, kt, kh, kw] = self.kernel;
        let [t_out, _, h_out, w_out] = self.output;
        let [st, sh, sw] = self.stride;
        let [pt, ph, pw] = self.padding;
        for to in 0..t_out {
            for dt in 0..kt {
                let Some(ti) = (to * st + dt).checked_sub(pt).filter(|&v| v < t_in) else {
                    continue;
                };
                for ko in 0..k_out {
                    for c in 0..c_in {
                        for dh in 0..kh {
                            for dw in 0..kw {
                                let ker = (((ko * c_in + c) * kt + dt) * kh + dh) * kw + dw;
                                // wo range keeping wi = wo*sw + dw - pw inside [0, w_in)
                                let wo_lo = pw.saturating_sub(dw).div_ceil(sw);
                                let wo_hi = if w_in + pw > dw {
                                    ((w_in + pw - dw - 1) / sw + 1).min(w_out)
                                } else {
                                    0
                                };
                                for ho in 0..h_out {
                                    let Some(hi) = (ho * sh + dh).checked_sub(ph).filter(|&v| v < h_in) else {
                                        continue;
                                    };
                                    let out_row = ((to * k_out + ko) * h_out + ho) * w_out;
                                    let in_row = ((ti * c_in + c) * h_in + hi) * w_in;
                                    for wo in wo_lo..wo_hi {
                                        f(out_row + wo, in_row + wo * sw + dw - pw, ker);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// 3D cross-correlation of a `[T, C, H, W]` volume with a `[K, C, kt, kh, kw]`
/// kernel bank, producing `[T', K, H', W']`.
pub fn conv3d(input: &Tensor, kernel: &Tensor, params: Conv3dParams) -> Result<Tensor> {
    let g = ConvGeometry::new(&input.dims, &kernel.dims, params)?;
    let mut out = vec![0.0; g.output.iter().product()];
    g.for_each_tap(|o, i, k| out[o] += kernel.data[k] * input.data[i]);
    Tensor::new(&g.output, out)
}

/// Gradients of [`conv3d`] with respect to its input and kernel.
pub(crate) fn conv3d_adjoint(
    input: &Tensor,
    kernel: &Tensor,
    grad_out: &Tensor,
    params: Conv3dParams,
    want_input: bool,
    want_kernel: bool,
) -> Result<(Option<Tensor>, Option<Tensor>)> {
    let g = ConvGeometry::new(&input.dims, &kernel.dims, params)?;
    let mut gi = want_input.then(|| vec![0.0; input.len()]);
    let mut gk = want_kernel.then(|| vec![0.0; kernel.len()]);
    match (&mut gi, &mut gk) {
        (Some(gi), Some(gk)) => g.for_each_tap(|o, i, k| {
            let go = grad_out.data[o];
            gi[i] += kernel.data[k] * go;
            gk[k] += input.data[i] * go;
        }),
        (Some(gi), None) => g.for_each_tap(|o, i, k| gi[i] += kernel.data[k] * grad_out.data[o]),
        (None, Some(gk)) => g.for_each_tap(|o, i, k| gk[k] += input.data[i] * grad_out.data[o]),
        (None, None) => {}
    }
    Ok((
        gi.map(|d| Tensor {
            dims: input.dims.clone(),
            data: d,
        }),
        gk.map(|d| Tensor {
            dims: kernel.dims.clone(),
            data: d,
        }),
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTensor {
    dims: Vec<usize>,
    data: Vec<Complex64>,
}

impl ComplexTensor {
    pub fn new(dims: &[usize], data: Vec<Complex64>) -> Result<Self> {
        let n = element_count(dims)?;
        if n != data.len() {
            return Err(Error::arg(format!(
                "dims {dims:?} need {n} elements, got {}",
                data.len()
            )));
        }
        Ok(ComplexTensor {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn from_real(t: &Tensor) -> Self {
        ComplexTensor {
            dims: t.dims.clone(),
            data: t.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn at(&self, idx: &[usize]) -> Complex64 {
        let off = idx.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| acc * d + i);
        self.data[off]
    }

    /// Elementwise squared magnitude.
    pub fn norm_sqr(&self) -> Tensor {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|z| z.norm_sqr()).collect(),
        }
    }
}
